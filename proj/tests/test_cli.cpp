#include <doctest.h>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"

using critstep::cli::run;

namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome invoke(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run(args, out, err);
    return {code, out.str(), err.str()};
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream ss(s);
    while (std::getline(ss, cur, sep)) out.push_back(cur);
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

std::vector<std::string> lines_of(const std::string& s) {
    auto lines = split(s, '\n');
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    return lines;
}

}  // namespace

TEST_CASE("trace be/power2 from 1: points on the closed form, fold row at 1/4") {
    const auto r = invoke({"trace", "--method", "be", "--problem", "power2", "--state", "1.0"});
    REQUIRE(r.code == critstep::cli::kExitOk);
    CHECK(r.err.empty());
    const auto lines = lines_of(r.out);
    REQUIRE(lines.size() > 20);
    CHECK(lines[0] == "index,s,h,norm_y,tangent_h,residual_norm,e_rel,y_0,event");
    int folds = 0;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto c = split(lines[i], ',');
        REQUIRE(c.size() == 9);
        const double h = std::stod(c[2]), y = std::stod(c[7]);
        CHECK(std::abs(h * y * y - y + 1) <= 1e-8);
        if (c[8] == "fold") {
            ++folds;
            CHECK(std::abs(h - 0.25) <= 1e-6);
            CHECK(std::abs(y - 2.0) <= 1e-6);
        } else {
            CHECK(c[8].empty());
        }
    }
    CHECK(folds == 1);
}

TEST_CASE("critical sweep over all methods at t = 0.9 as JSON") {
    const auto r = invoke({"critical", "--problem", "double-pendulum", "--seed-time", "0.9", "--methods", "all",
                           "--format", "json"});
    REQUIRE(r.code == critstep::cli::kExitOk);
    const auto j = nlohmann::json::parse(r.out);
    REQUIRE(j["reports"].size() == 8);
    for (const auto& rep : j["reports"]) {
        REQUIRE(rep["h_c"].is_number());
        CHECK(rep["h_c"].get<double>() < 0.33);
        CHECK(rep["fold_count"].get<int>() >= 1);
        CHECK(rep["branch_e_rel"].size() == rep["branch_summary"].size());
    }
}

TEST_CASE("integrate vt1 at h_ref ends on the tabulated state") {
    const auto r = invoke({"integrate", "--method", "vt1", "--problem", "double-pendulum", "--h", "2e-5", "--tf", "2.0"});
    REQUIRE(r.code == critstep::cli::kExitOk);
    const auto lines = lines_of(r.out);
    REQUIRE(lines.size() == 100003);
    const auto c = split(lines.back(), ',');
    REQUIRE(c.size() == 5);
    CHECK(std::stod(c[0]) == 2.0);
    const double table[4] = {-1.570737451319846, 3.773018950076258, 4.118116660671203, -6.273626026547350};
    for (int i = 0; i < 4; ++i) CHECK(std::abs(std::stod(c[i + 1]) - table[i]) <= 1e-8 * std::abs(table[i]));
}

TEST_CASE("exit code 2 for configuration errors") {
    for (const auto& args : std::vector<std::vector<std::string>>{
             {},
             {"frobnicate"},
             {"trace", "--method", "nope", "--problem", "power2"},
             {"trace", "--method", "be", "--problem", "nope"},
             {"trace", "--method", "vt1", "--problem", "power2", "--state", "1"},
             {"trace", "--method", "be", "--problem", "power2", "--state", "1,2"},
             {"trace", "--method", "be", "--problem", "power2", "--ds0", "10"},
             {"integrate", "--method", "be", "--problem", "power2", "--h", "-1"},
             {"integrate", "--method", "be", "--problem", "power2", "--init", "guess"},
             {"trace", "--format", "xml"},
             {"trace", "--no-such-flag"},
         }) {
        const auto r = invoke(args);
        CHECK_MESSAGE(r.code == critstep::cli::kExitConfig, r.err);
        CHECK_FALSE(r.err.empty());
    }
}

TEST_CASE("help exits 0") {
    const auto r = invoke({"--help"});
    CHECK(r.code == critstep::cli::kExitOk);
    CHECK(r.out.find("critical") != std::string::npos);
    CHECK(invoke({"trace", "--help"}).code == critstep::cli::kExitOk);
}

TEST_CASE("exit code 1 with a partial dataset and a machine-readable error record") {
    const auto r = invoke({"integrate", "--method", "be", "--problem", "power2", "--state", "1", "--h", "0.2", "--tf",
                           "1"});
    CHECK(r.code == critstep::cli::kExitNumerical);
    // q blows up at t = 1; steps of 0.2 run out of solutions near t = 0.8.
    CHECK(r.out.find("t,q_0\n0,1\n0.20000000000000001,") != std::string::npos);
    CHECK(r.out.find("# error") != std::string::npos);
    const auto rec = nlohmann::json::parse(lines_of(r.err).front());
    CHECK(rec["error"]["command"] == "integrate");
    CHECK(rec["error"]["message"].get<std::string>().find("Newton") != std::string::npos);

    const auto j = invoke({"integrate", "--method", "be", "--problem", "power2", "--state", "1", "--h", "0.2", "--tf",
                           "1", "--format", "json"});
    CHECK(j.code == critstep::cli::kExitNumerical);
    const auto data = nlohmann::json::parse(j.out);
    CHECK(data["states"].size() >= 2);
    CHECK(data.contains("error"));
}

TEST_CASE("validate classifies the steps of a run") {
    const auto r = invoke({"validate", "--method", "be", "--problem", "power2", "--state", "1", "--h", "0.05", "--tf",
                           "0.6"});
    REQUIRE(r.code == critstep::cli::kExitOk);
    const auto lines = lines_of(r.out);
    CHECK(lines[0] == "t,h,verdict,h_c,distance");
    CHECK(lines[1].rfind("0,0.050000000000000003,consistent,", 0) == 0);
    REQUIRE(lines.size() == 13);
    for (std::size_t i = 1; i < lines.size(); ++i) CHECK(lines[i].find(",consistent,") != std::string::npos);

    // Past t = 0.5 a step of 0.1 has no solution at all: the rows so far are kept.
    const auto f = invoke({"validate", "--method", "be", "--problem", "power2", "--state", "1", "--h", "0.1", "--tf",
                           "1"});
    CHECK(f.code == critstep::cli::kExitNumerical);
    CHECK(lines_of(f.out).size() == 7);
    CHECK(f.out.find("# error") != std::string::npos);
}

TEST_CASE("property: identical configurations give byte-identical files") {
    const auto dir = std::filesystem::temp_directory_path() / "critstep-cli-test";
    std::filesystem::create_directories(dir);
    const std::vector<std::vector<std::string>> configs{
        {"trace", "--method", "gl4", "--problem", "cubic-spring", "--state", "1,0", "--format", "json"},
        {"critical", "--problem", "power2", "--state", "2", "--methods", "be,tr,radau5"},
        {"integrate", "--method", "vt1", "--problem", "double-pendulum", "--h", "0.1225", "--init", "extrapolate",
         "--cartesian"},
        {"reference", "--h", "1e-3", "--tf", "0.5"},
    };
    for (std::size_t k = 0; k < configs.size(); ++k) {
        std::string contents[2];
        for (int rep = 0; rep < 2; ++rep) {
            auto args = configs[k];
            const auto file = dir / ("out" + std::to_string(k) + "_" + std::to_string(rep));
            args.insert(args.end(), {"-o", file.string()});
            const auto r = invoke(args);
            REQUIRE_MESSAGE(r.code == critstep::cli::kExitOk, r.err);
            CHECK(r.out.empty());
            std::ifstream in(file, std::ios::binary);
            contents[rep].assign(std::istreambuf_iterator<char>(in), {});
        }
        CHECK(!contents[0].empty());
        CHECK(contents[0] == contents[1]);
    }
    std::filesystem::remove_all(dir);
}
