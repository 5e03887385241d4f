#include "critstep/io.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "critstep/problems.hpp"

namespace critstep {

std::string format_real(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

namespace {

double parse_real(const std::string& s) {
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw std::runtime_error("csv: cannot parse number '" + s + "'");
    return v;
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream ss(line);
    while (std::getline(ss, cur, sep)) out.push_back(cur);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

}  // namespace

std::string trajectory_key(const Trajectory& traj) {
    return "# trajectory method=" + traj.method + " problem=" + traj.problem + " t0=" + format_real(traj.t0) +
           " tf=" + format_real(traj.t_end()) + " h=" + format_real(traj.h);
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj, bool cartesian) {
    const std::size_t m = traj.states.empty() ? 0 : traj.states.front().size();
    if (cartesian && m != 4) throw std::invalid_argument("cartesian columns need 4-dimensional pendulum states");
    os << trajectory_key(traj) << '\n';
    os << 't';
    for (std::size_t i = 0; i < m; ++i) os << ",q_" << i;
    if (cartesian) os << ",b1x,b1y,b2x,b2y";
    os << '\n';
    for (std::size_t k = 0; k < traj.states.size(); ++k) {
        os << format_real(traj.times[k]);
        for (double v : traj.states[k]) os << ',' << format_real(v);
        if (cartesian) {
            const auto [b1, b2] = to_cartesian(traj.states[k]);
            os << ',' << format_real(b1.x) << ',' << format_real(b1.y) << ',' << format_real(b2.x) << ','
               << format_real(b2.y);
        }
        os << '\n';
    }
}

Trajectory read_trajectory_csv(std::istream& is) {
    Trajectory traj;
    std::string line;
    std::size_t m = 0;
    bool have_header = false;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line.front() == '#') {
            std::istringstream ss(line.substr(1));
            std::string tok;
            while (ss >> tok) {
                const auto eq = tok.find('=');
                if (eq == std::string::npos) continue;
                const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
                if (key == "method") traj.method = val;
                else if (key == "problem") traj.problem = val;
                else if (key == "t0") traj.t0 = parse_real(val);
                else if (key == "h") traj.h = parse_real(val);
            }
            continue;
        }
        const auto cols = split(line, ',');
        if (!have_header) {
            if (cols.empty() || cols[0] != "t") throw std::runtime_error("csv: expected header starting with 't'");
            for (std::size_t i = 1; i < cols.size(); ++i)
                if (cols[i].rfind("q_", 0) == 0) ++m;
            have_header = true;
            continue;
        }
        if (cols.size() < m + 1) throw std::runtime_error("csv: short row");
        traj.times.push_back(parse_real(cols[0]));
        Vector q(m);
        for (std::size_t i = 0; i < m; ++i) q[i] = parse_real(cols[i + 1]);
        traj.states.push_back(std::move(q));
    }
    if (!have_header) throw std::runtime_error("csv: missing header");
    return traj;
}

void write_trace_csv(std::ostream& os, const Branch& branch, const std::vector<double>& e_rel,
                     const std::vector<double>& fold_e_rel) {
    const std::size_t m = branch.points.empty() ? 0 : branch.points.front().y.size();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    os << "index,s,h,norm_y,tangent_h,residual_norm,e_rel";
    for (std::size_t i = 0; i < m; ++i) os << ",y_" << i;
    os << ",event\n";

    auto row = [&](std::size_t index, double s, double h, double ny, double th, double res, double err,
                   const Vector& y, const char* event) {
        os << index << ',' << format_real(s) << ',' << format_real(h) << ',' << format_real(ny) << ','
           << format_real(th) << ',' << format_real(res) << ',' << format_real(err);
        for (double v : y) os << ',' << format_real(v);
        os << ',' << event << '\n';
    };

    std::size_t next_fold = 0;
    for (std::size_t k = 0; k < branch.points.size(); ++k) {
        const auto& p = branch.points[k];
        row(k, p.arclength, p.h, p.norm_y, p.tangent_h(), p.residual_norm, k < e_rel.size() ? e_rel[k] : nan, p.y,
            "");
        while (next_fold < branch.folds.size() && branch.folds[next_fold].index_before == k) {
            const auto& f = branch.folds[next_fold];
            row(k, f.arclength, f.h_fold, f.norm_y, f.tangent_h_at_fold, nan,
                next_fold < fold_e_rel.size() ? fold_e_rel[next_fold] : nan, f.y_fold, "fold");
            ++next_fold;
        }
    }
}

}  // namespace critstep
