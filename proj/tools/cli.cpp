#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "critstep/analysis.hpp"
#include "critstep/io.hpp"

namespace critstep::cli {

namespace {

using nlohmann::ordered_json;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Raised after a partial dataset has been written.
struct NumericalFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Format { csv, json };

struct RunConfig {
    std::string command;
    std::string method = "vt1";
    std::string methods = "all";
    std::string problem = "double-pendulum";
    std::optional<double> h;
    double t0 = 0.0;
    double tf = 2.0;
    double seed_time = 0.9;
    std::string init = "previous";
    ContinuationSettings settings;
    Format format = Format::csv;
    std::string output = "-";
    std::vector<double> state;
    bool cartesian = false;
    bool no_cache = false;
};

Problem problem_of(const RunConfig& c) {
    auto p = find_problem(c.problem);
    if (!p) throw ConfigError("unknown problem '" + c.problem + "'");
    return *std::move(p);
}

ResidualSystem residual_of(const std::string& method, const Problem& p) {
    try {
        return make_residual(method, p);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

std::vector<std::string> methods_of(const RunConfig& c) {
    if (c.methods == "all") return method_ids();
    std::vector<std::string> out;
    std::stringstream ss(c.methods);
    std::string m;
    const auto known = method_ids();
    while (std::getline(ss, m, ',')) {
        if (std::find(known.begin(), known.end(), m) == known.end())
            throw ConfigError("unknown method '" + m + "'");
        out.push_back(m);
    }
    if (out.empty()) throw ConfigError("--methods is empty");
    return out;
}

Initializer init_of(const RunConfig& c) {
    auto i = parse_initializer(c.init);
    if (!i) throw ConfigError("unknown initializer '" + c.init + "'");
    return *i;
}

std::optional<std::filesystem::path> cache_of(const RunConfig& c) {
    if (c.no_cache) return std::nullopt;
    return default_cache_dir();
}

Trajectory pendulum_reference(const RunConfig& c) {
    return reference_trajectory(ReferenceSpec{}, cache_of(c));
}

/// Initial state for integrations: --state, else the problem's standard start.
Vector start_state(const RunConfig& c, const Problem& p) {
    if (!c.state.empty()) {
        if (c.state.size() != p.ode.dim)
            throw ConfigError("--state has " + std::to_string(c.state.size()) + " entries, problem '" + p.name +
                              "' needs " + std::to_string(p.ode.dim));
        return c.state;
    }
    if (p.name == "double-pendulum") {
        const auto ic = double_pendulum_initial_state();
        return {ic.begin(), ic.end()};
    }
    if (p.name == "cubic-spring") return {1.0, 0.0};
    return Vector(p.ode.dim, 1.0);
}

/// Seed state for branch computations: --state, else the reference state at
/// --seed-time for the pendulum, else the standard start.
Vector seed_state(const RunConfig& c, const Problem& p, const Trajectory* ref) {
    if (!c.state.empty() || !ref) return start_state(c, p);
    try {
        return state_at(*ref, p.ode, c.seed_time);
    } catch (const OutOfRange& e) {
        throw ConfigError(std::string("--seed-time: ") + e.what());
    }
}

ordered_json reals(std::span<const double> v) {
    ordered_json a = ordered_json::array();
    for (double d : v) a.push_back(d);
    return a;
}

ordered_json error_record(const std::string& command, const std::string& message) {
    return ordered_json{{"error", {{"command", command}, {"message", message}}}};
}

ordered_json trajectory_json(const Trajectory& t) {
    ordered_json j;
    j["method"] = t.method;
    j["problem"] = t.problem;
    j["t0"] = t.t0;
    j["h"] = t.h;
    j["times"] = reals(t.times);
    ordered_json states = ordered_json::array();
    for (const auto& s : t.states) states.push_back(reals(s));
    j["states"] = std::move(states);
    return j;
}

ordered_json report_json(const CriticalReport& r) {
    ordered_json j;
    j["method"] = r.method;
    j["x"] = reals(r.x);
    j["h_c"] = r.h_c ? ordered_json(*r.h_c) : ordered_json(nullptr);
    j["fold_count"] = r.fold_count;
    j["termination"] = r.termination;
    ordered_json summary = ordered_json::array();
    for (const auto& [h, n] : r.branch_summary) summary.push_back({h, n});
    j["branch_summary"] = std::move(summary);
    j["branch_e_rel"] = reals(r.branch_e_rel);
    ordered_json folds = ordered_json::array();
    for (const auto& f : r.folds)
        folds.push_back({{"h", f.h},
                         {"norm_y", f.norm_y},
                         {"arclength", f.arclength},
                         {"tangent_h", f.tangent_h},
                         {"e_rel", f.e_rel},
                         {"localized", f.localized},
                         {"counted", f.counted}});
    j["folds"] = std::move(folds);
    if (!r.error.empty()) j["error"] = r.error;
    return j;
}

/// Buffers the dataset and writes it in one piece at the end.
class Sink {
public:
    Sink(const RunConfig& c, std::ostream& fallback) : path_(c.output), fallback_(fallback) {}
    std::ostream& stream() { return buf_; }
    void flush() {
        if (path_ == "-" || path_.empty()) {
            fallback_ << buf_.str();
            return;
        }
        std::ofstream f(path_, std::ios::binary);
        if (!f) throw ConfigError("cannot open output file '" + path_ + "'");
        f << buf_.str();
    }

private:
    std::string path_;
    std::ostream& fallback_;
    std::ostringstream buf_;
};

void write_trajectory(const RunConfig& c, const Trajectory& t, const std::optional<std::string>& error,
                      std::ostream& os) {
    if (c.format == Format::json) {
        ordered_json j = trajectory_json(t);
        if (error) j["error"] = *error;
        os << j.dump(2) << '\n';
        return;
    }
    write_trajectory_csv(os, t, c.cartesian);
    if (error) os << "# error " << *error << '\n';
}

int cmd_reference(const RunConfig& c, std::ostream& out) {
    ReferenceSpec spec;
    spec.method = c.method;
    spec.problem = c.problem;
    spec.h = c.h.value_or(spec.h);
    spec.t0 = c.t0;
    spec.tf = c.tf;
    residual_of(spec.method, problem_of(c));  // validates the pairing
    if (c.cartesian && c.problem != "double-pendulum") throw ConfigError("--cartesian needs double-pendulum");
    Trajectory t;
    try {
        t = reference_trajectory(spec, cache_of(c));
    } catch (const std::runtime_error& e) {
        throw NumericalFailure(e.what());
    }
    Sink sink(c, out);
    write_trajectory(c, t, std::nullopt, sink.stream());
    sink.flush();
    return kExitOk;
}

int cmd_integrate(const RunConfig& c, std::ostream& out, std::ostream& err) {
    const Problem p = problem_of(c);
    const ResidualSystem rs = residual_of(c.method, p);
    if (!c.h) throw ConfigError("integrate needs --h");
    if (c.cartesian && p.name != "double-pendulum") throw ConfigError("--cartesian needs double-pendulum");
    const Vector x0 = start_state(c, p);
    IntegrationResult r;
    try {
        r = integrate_fixed(rs, x0, c.t0, c.tf, *c.h, init_of(c));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    r.trajectory.problem = p.name;
    r.trajectory.method = c.method;
    std::optional<std::string> error;
    if (r.failure) {
        std::ostringstream msg;
        msg << "Newton " << to_string(r.failure->report.status) << " at t=" << format_real(r.failure->t)
            << " h=" << format_real(r.failure->h);
        error = msg.str();
    }
    Sink sink(c, out);
    write_trajectory(c, r.trajectory, error, sink.stream());
    sink.flush();
    if (error) {
        err << error_record("integrate", *error).dump() << '\n';
        return kExitNumerical;
    }
    return kExitOk;
}

int cmd_trace(const RunConfig& c, std::ostream& out, std::ostream& err) {
    const Problem p = problem_of(c);
    const ResidualSystem rs = residual_of(c.method, p);
    std::optional<Trajectory> ref;
    if (p.name == "double-pendulum") ref = pendulum_reference(c);
    const Vector x = seed_state(c, p, ref ? &*ref : nullptr);

    Branch br;
    try {
        br = trace_branch(rs, x, c.settings);
    } catch (const SingularMatrix& e) {
        throw NumericalFailure(e.what());
    }

    std::vector<double> e_rel, fold_e_rel;
    if (ref) {
        const ErrorReference er{&*ref, &p.ode, c.seed_time};
        for (const auto& pt : br.points) e_rel.push_back(branch_relative_error(er, pt.y, pt.h));
        for (const auto& f : br.folds) fold_e_rel.push_back(branch_relative_error(er, f.y_fold, f.h_fold));
    }

    Sink sink(c, out);
    if (c.format == Format::json) {
        const CriticalReport r = make_report(c.method, x, br, c.settings,
                                             ref ? std::optional(ErrorReference{&*ref, &p.ode, c.seed_time})
                                                 : std::nullopt);
        ordered_json j = report_json(r);
        ordered_json pts = ordered_json::array();
        for (const auto& pt : br.points)
            pts.push_back({{"s", pt.arclength}, {"h", pt.h}, {"tangent_h", pt.tangent_h()}, {"y", reals(pt.y)}});
        j["points"] = std::move(pts);
        sink.stream() << j.dump(2) << '\n';
    } else {
        write_trace_csv(sink.stream(), br, e_rel, fold_e_rel);
    }
    sink.flush();
    if (br.termination == Termination::corrector_failed) {
        err << error_record("trace", "corrector failed after " + std::to_string(br.points.size()) + " points")
                   .dump()
            << '\n';
        return kExitNumerical;
    }
    return kExitOk;
}

int cmd_critical(const RunConfig& c, std::ostream& out, std::ostream& err) {
    const Problem p = problem_of(c);
    const auto methods = methods_of(c);
    for (const auto& m : methods) residual_of(m, p);
    std::optional<Trajectory> ref;
    if (p.name == "double-pendulum") ref = pendulum_reference(c);
    const Vector x = seed_state(c, p, ref ? &*ref : nullptr);
    std::optional<ErrorReference> er;
    if (ref) er = ErrorReference{&*ref, &p.ode, c.seed_time};

    const auto reports = critical_sweep(methods, p, x, c.settings, er);

    Sink sink(c, out);
    if (c.format == Format::json) {
        ordered_json j;
        j["problem"] = p.name;
        j["seed_time"] = ref ? ordered_json(c.seed_time) : ordered_json(nullptr);
        j["x"] = reals(x);
        ordered_json arr = ordered_json::array();
        for (const auto& r : reports) arr.push_back(report_json(r));
        j["reports"] = std::move(arr);
        sink.stream() << j.dump(2) << '\n';
    } else {
        auto& os = sink.stream();
        os << "method,h_c,fold_count,termination,fold_h,fold_e_rel,error\n";
        for (const auto& r : reports) {
            std::string fh, fe;
            for (const auto& f : r.folds) {
                if (!f.counted) continue;
                fh += (fh.empty() ? "" : ";") + format_real(f.h);
                fe += (fe.empty() ? "" : ";") + format_real(f.e_rel);
            }
            os << r.method << ',' << (r.h_c ? format_real(*r.h_c) : "") << ',' << r.fold_count << ','
               << r.termination << ',' << fh << ',' << fe << ',' << r.error << '\n';
        }
    }
    sink.flush();
    bool failed = false;
    for (const auto& r : reports)
        if (!r.error.empty()) {
            err << error_record("critical", r.method + ": " + r.error).dump() << '\n';
            failed = true;
        }
    return failed ? kExitNumerical : kExitOk;
}

int cmd_validate(const RunConfig& c, std::ostream& out, std::ostream& err) {
    const Problem p = problem_of(c);
    const ResidualSystem rs = residual_of(c.method, p);
    if (!c.h) throw ConfigError("validate needs --h");
    const Vector x0 = start_state(c, p);
    IntegrationResult r;
    try {
        r = integrate_fixed(rs, x0, c.t0, c.tf, *c.h, init_of(c));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    const auto verdicts = validate_trajectory(rs, r.steps, c.settings);

    Sink sink(c, out);
    if (c.format == Format::json) {
        ordered_json arr = ordered_json::array();
        for (std::size_t i = 0; i < verdicts.size(); ++i) {
            const auto& v = verdicts[i];
            arr.push_back({{"t", r.steps[i].t},
                           {"h", r.steps[i].h},
                           {"verdict", std::string(to_string(v.verdict))},
                           {"h_c", v.h_c ? ordered_json(*v.h_c) : ordered_json(nullptr)},
                           {"distance", v.distance}});
        }
        ordered_json j{{"method", c.method}, {"problem", p.name}, {"steps", std::move(arr)}};
        if (r.failure) j["error"] = "integration stopped at t=" + format_real(r.failure->t);
        sink.stream() << j.dump(2) << '\n';
    } else {
        auto& os = sink.stream();
        os << "t,h,verdict,h_c,distance\n";
        for (std::size_t i = 0; i < verdicts.size(); ++i) {
            const auto& v = verdicts[i];
            os << format_real(r.steps[i].t) << ',' << format_real(r.steps[i].h) << ',' << to_string(v.verdict)
               << ',' << (v.h_c ? format_real(*v.h_c) : "") << ',' << format_real(v.distance) << '\n';
        }
        if (r.failure) os << "# error integration stopped at t=" << format_real(r.failure->t) << '\n';
    }
    sink.flush();

    bool failed = r.failure.has_value();
    if (r.failure) err << error_record("validate", "integration stopped at t=" + format_real(r.failure->t)).dump() << '\n';
    const auto n_failed = std::count_if(verdicts.begin(), verdicts.end(),
                                        [](const StepValidation& v) { return v.verdict == Verdict::trace_failed; });
    if (n_failed > 0) {
        err << error_record("validate", std::to_string(n_failed) + " step(s) could not be traced").dump() << '\n';
        failed = true;
    }
    return failed ? kExitNumerical : kExitOk;
}

void add_common(CLI::App& sub, RunConfig& c) {
    // "--h" is the timestep, so help is long-form only.
    sub.set_help_flag("--help", "print this help");
    sub.add_option("--problem", c.problem, "power2 | cubic-spring | double-pendulum");
    sub.add_option("--format", c.format, "csv | json")
        ->transform(CLI::CheckedTransformer(std::map<std::string, Format>{{"csv", Format::csv}, {"json", Format::json}}))
        ->option_text("csv|json");
    sub.add_option("--output,-o", c.output, "output file ('-' for stdout)");
    sub.add_flag("--no-cache", c.no_cache, "do not read or write the reference cache");
}

void add_state(CLI::App& sub, RunConfig& c) {
    sub.add_option("--state", c.state, "explicit state vector, comma separated")->delimiter(',');
}

void add_branch(CLI::App& sub, RunConfig& c) {
    sub.add_option("--seed-time", c.seed_time, "reference time supplying the pendulum seed state");
    sub.add_option("--ds0", c.settings.ds0, "initial arclength step");
    sub.add_option("--h-max", c.settings.h_max, "stop once h exceeds this");
    sub.add_option("--norm-max", c.settings.norm_max, "stop once |y| exceeds this");
}

void add_integration(CLI::App& sub, RunConfig& c) {
    sub.add_option("--h", c.h, "timestep");
    sub.add_option("--t0", c.t0, "start time");
    sub.add_option("--tf", c.tf, "end time");
    sub.add_option("--init", c.init, "Newton initializer: previous | extrapolate");
    sub.add_flag("--cartesian", c.cartesian, "append bob coordinates (double pendulum)");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"critstep: solution branches and critical timesteps of implicit one-step methods"};
    app.set_help_flag("--help", "print this help");
    app.require_subcommand(1);
    RunConfig c;

    auto* reference = app.add_subcommand("reference", "reference trajectory (vt1, h=2e-5, t in [0,2])");
    add_common(*reference, c);
    reference->add_option("--method", c.method, "method id");
    reference->add_option("--h", c.h, "timestep");
    reference->add_option("--t0", c.t0, "start time");
    reference->add_option("--tf", c.tf, "end time");
    reference->add_flag("--cartesian", c.cartesian, "append bob coordinates");

    auto* integrate = app.add_subcommand("integrate", "fixed-step integration with Newton solves");
    add_common(*integrate, c);
    integrate->add_option("--method", c.method, "method id");
    add_integration(*integrate, c);
    add_state(*integrate, c);

    auto* trace = app.add_subcommand("trace", "principal solution branch of one method");
    add_common(*trace, c);
    trace->add_option("--method", c.method, "method id");
    add_branch(*trace, c);
    add_state(*trace, c);

    auto* critical = app.add_subcommand("critical", "critical timesteps for several methods");
    add_common(*critical, c);
    critical->add_option("--methods", c.methods, "'all' or a comma separated list");
    add_branch(*critical, c);
    add_state(*critical, c);

    auto* validate = app.add_subcommand("validate", "classify each step of an integration against the principal branch");
    add_common(*validate, c);
    validate->add_option("--method", c.method, "method id");
    add_integration(*validate, c);
    add_branch(*validate, c);
    add_state(*validate, c);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (!(c.settings.ds_min <= c.settings.ds0 && c.settings.ds0 <= c.settings.ds_max))
            throw ConfigError("--ds0 must lie in [ds_min, ds_max]");
        if (c.h && !(*c.h > 0.0)) throw ConfigError("--h must be positive");
        if (reference->parsed()) {
            c.command = "reference";
            return cmd_reference(c, out);
        }
        if (integrate->parsed()) {
            c.command = "integrate";
            return cmd_integrate(c, out, err);
        }
        if (trace->parsed()) {
            c.command = "trace";
            return cmd_trace(c, out, err);
        }
        if (critical->parsed()) {
            c.command = "critical";
            return cmd_critical(c, out, err);
        }
        c.command = "validate";
        return cmd_validate(c, out, err);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const NumericalFailure& e) {
        err << error_record(c.command, e.what()).dump() << '\n';
        return kExitNumerical;
    } catch (const std::exception& e) {
        err << error_record(c.command, e.what()).dump() << '\n';
        return kExitNumerical;
    }
}

}  // namespace critstep::cli
