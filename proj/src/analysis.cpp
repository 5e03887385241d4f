#include "critstep/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <exception>
#include <fstream>
#include <limits>
#include <sstream>

#include "critstep/io.hpp"
#include "critstep/linalg.hpp"

namespace critstep {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Problem require_problem(const std::string& name) {
    auto p = find_problem(name);
    if (!p) throw std::invalid_argument("unknown problem: " + name);
    return *std::move(p);
}

std::filesystem::path cache_file(const std::filesystem::path& dir, const ReferenceSpec& spec) {
    std::ostringstream name;
    name << "reference_" << spec.method << '_' << spec.problem << "_h" << format_real(spec.h) << "_t"
         << format_real(spec.t0) << '_' << format_real(spec.tf) << ".csv";
    return dir / name.str();
}

std::string expected_key(const ReferenceSpec& spec) {
    Trajectory probe;
    probe.method = spec.method;
    probe.problem = spec.problem;
    probe.t0 = spec.t0;
    probe.h = spec.h;
    probe.times = {spec.tf};
    return trajectory_key(probe);
}

std::optional<Trajectory> load_cached(const std::filesystem::path& file, const ReferenceSpec& spec) {
    std::ifstream in(file);
    if (!in) return std::nullopt;
    try {
        Trajectory t = read_trajectory_csv(in);
        if (trajectory_key(t) != expected_key(spec) || t.states.empty()) return std::nullopt;
        return t;
    } catch (const std::exception&) {
        // A stale or truncated cache is simply recomputed.
        return std::nullopt;
    }
}

void store_cached(const std::filesystem::path& file, const Trajectory& traj) {
    std::error_code ec;
    std::filesystem::create_directories(file.parent_path(), ec);
    if (ec) return;
    // Write to a private name and rename, so concurrent readers never see a partial file.
    std::filesystem::path tmp = file;
    tmp += ".tmp." + std::to_string(static_cast<unsigned long long>(std::hash<std::string>{}(file.string()) ^
                                                                    reinterpret_cast<std::uintptr_t>(&traj)));
    {
        std::ofstream out(tmp);
        if (!out) return;
        write_trajectory_csv(out, traj);
        if (!out) {
            std::filesystem::remove(tmp, ec);
            return;
        }
    }
    std::filesystem::rename(tmp, file, ec);
    if (ec) std::filesystem::remove(tmp, ec);
}

}  // namespace

std::filesystem::path default_cache_dir() {
    if (const char* d = std::getenv(kCacheDirEnv); d && *d) return d;
    if (const char* x = std::getenv("XDG_CACHE_HOME"); x && *x) return std::filesystem::path(x) / "critstep";
    if (const char* home = std::getenv("HOME"); home && *home)
        return std::filesystem::path(home) / ".cache" / "critstep";
    return std::filesystem::temp_directory_path() / "critstep";
}

Trajectory compute_reference(const ReferenceSpec& spec) {
    const Problem problem = require_problem(spec.problem);
    const ResidualSystem rs = make_residual(spec.method, problem);
    Vector x0;
    if (spec.problem == "double-pendulum") {
        const auto ic = double_pendulum_initial_state();
        x0.assign(ic.begin(), ic.end());
    } else {
        x0.assign(problem.ode.dim, 1.0);
    }
    IntegrationResult r = integrate_fixed(rs, x0, spec.t0, spec.tf, spec.h, Initializer::previous);
    if (!r.ok()) {
        std::ostringstream msg;
        msg << "reference integration failed at t = " << r.failure->t << " ("
            << to_string(r.failure->report.status) << ')';
        throw std::runtime_error(msg.str());
    }
    r.trajectory.problem = spec.problem;
    r.trajectory.method = spec.method;
    return std::move(r.trajectory);
}

Trajectory reference_trajectory(const ReferenceSpec& spec, const std::optional<std::filesystem::path>& cache_dir) {
    if (!cache_dir) return compute_reference(spec);
    const auto file = cache_file(*cache_dir, spec);
    if (auto cached = load_cached(file, spec)) return *std::move(cached);
    Trajectory t = compute_reference(spec);
    store_cached(file, t);
    return t;
}

Vector state_at(const Trajectory& traj, const OdeSystem& sys, double t) {
    if (traj.states.empty() || traj.times.size() != traj.states.size())
        throw OutOfRange("state_at: empty trajectory");
    const auto& ts = traj.times;
    if (!(t >= ts.front() && t <= ts.back())) {
        std::ostringstream msg;
        msg << "state_at: t = " << t << " outside [" << ts.front() << ", " << ts.back() << ']';
        throw OutOfRange(msg.str());
    }
    auto it = std::lower_bound(ts.begin(), ts.end(), t);
    const auto i = static_cast<std::size_t>(it - ts.begin());
    if (*it == t) return traj.states[i];

    const std::size_t k = i - 1;
    const double t0 = ts[k], t1 = ts[i];
    const double dt = t1 - t0;
    const double s = (t - t0) / dt;
    const Vector& y0 = traj.states[k];
    const Vector& y1 = traj.states[i];
    const Vector f0 = sys.rhs(y0);
    const Vector f1 = sys.rhs(y1);
    const double s2 = s * s, s3 = s2 * s;
    const double h00 = 2 * s3 - 3 * s2 + 1;
    const double h10 = s3 - 2 * s2 + s;
    const double h01 = -2 * s3 + 3 * s2;
    const double h11 = s3 - s2;
    Vector out(y0.size());
    for (std::size_t j = 0; j < out.size(); ++j)
        out[j] = h00 * y0[j] + h10 * dt * f0[j] + h01 * y1[j] + h11 * dt * f1[j];
    return out;
}

double relative_error(std::span<const double> y, std::span<const double> y_ref) {
    if (y.size() != y_ref.size()) throw std::invalid_argument("relative_error: dimension mismatch");
    const double nref = norm2(y_ref);
    if (nref == 0.0) throw DegenerateReference("relative_error: reference has zero norm");
    Vector d(y.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = y[i] - y_ref[i];
    return norm2(d) / nref;
}

std::vector<std::size_t> fold_census(const Branch& branch, const ContinuationSettings& settings,
                                     const CensusRules& rules) {
    const auto& folds = branch.folds;
    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < folds.size(); ++i) {
        // A pair of folds within min_h_gap of each other is a near-cusp wiggle
        // that does not change how the branch crosses any resolvable h.
        if (i + 1 < folds.size() && std::abs(folds[i + 1].h_fold - folds[i].h_fold) < rules.min_h_gap) {
            ++i;
            continue;
        }
        if (!kept.empty() && std::abs(folds[i].arclength - folds[kept.back()].arclength) <
                                 rules.min_arclength_factor * settings.ds_min)
            continue;
        kept.push_back(i);
    }
    return kept;
}

double branch_relative_error(const ErrorReference& ref, std::span<const double> y, double h) {
    if (!ref.trajectory || !ref.ode) return kNaN;
    const double t = ref.seed_time + h;
    if (!(t >= ref.trajectory->times.front() && t <= ref.trajectory->t_end())) return kNaN;
    const Vector yr = state_at(*ref.trajectory, *ref.ode, t);
    try {
        return relative_error(y, yr);
    } catch (const DegenerateReference&) {
        return kNaN;
    }
}

CriticalReport make_report(std::string method, std::span<const double> x, const Branch& branch,
                           const ContinuationSettings& settings, const std::optional<ErrorReference>& ref) {
    CriticalReport r;
    r.method = std::move(method);
    r.x.assign(x.begin(), x.end());
    r.termination = std::string(to_string(branch.termination));
    r.branch_summary.reserve(branch.points.size());
    for (const auto& p : branch.points) r.branch_summary.emplace_back(p.h, p.norm_y);
    if (ref) {
        r.branch_e_rel.reserve(branch.points.size());
        for (const auto& p : branch.points) r.branch_e_rel.push_back(branch_relative_error(*ref, p.y, p.h));
    }
    if (!branch.points.empty()) r.final_tangent_h = branch.points.back().tangent_h();

    const auto counted = fold_census(branch, settings);
    for (std::size_t i = 0; i < branch.folds.size(); ++i) {
        const auto& f = branch.folds[i];
        FoldSummary s;
        s.h = f.h_fold;
        s.norm_y = f.norm_y;
        s.arclength = f.arclength;
        s.tangent_h = f.tangent_h_at_fold;
        s.localized = f.localized;
        s.counted = std::find(counted.begin(), counted.end(), i) != counted.end();
        s.e_rel = ref ? branch_relative_error(*ref, f.y_fold, f.h_fold) : kNaN;
        r.folds.push_back(s);
    }
    r.fold_count = counted.size();
    if (!counted.empty()) r.h_c = branch.folds[counted.front()].h_fold;
    return r;
}

namespace {

CriticalReport sweep_one(const std::string& method, const Problem& problem, std::span<const double> x,
                         const ContinuationSettings& settings, const std::optional<ErrorReference>& ref) {
    try {
        const ResidualSystem rs = make_residual(method, problem);
        const Branch br = trace_branch(rs, x, settings);
        return make_report(method, x, br, settings, ref);
    } catch (const std::exception& e) {
        CriticalReport r;
        r.method = method;
        r.x.assign(x.begin(), x.end());
        r.termination = "error";
        r.error = e.what();
        return r;
    }
}

}  // namespace

std::vector<CriticalReport> critical_sweep_serial(std::span<const std::string> methods, const Problem& problem,
                                                  std::span<const double> x, const ContinuationSettings& settings,
                                                  const std::optional<ErrorReference>& ref) {
    std::vector<CriticalReport> out;
    out.reserve(methods.size());
    for (const auto& m : methods) out.push_back(sweep_one(m, problem, x, settings, ref));
    return out;
}

std::vector<CriticalReport> critical_sweep(std::span<const std::string> methods, const Problem& problem,
                                           std::span<const double> x, const ContinuationSettings& settings,
                                           const std::optional<ErrorReference>& ref) {
    const auto n = static_cast<std::ptrdiff_t>(methods.size());
    std::vector<CriticalReport> out(methods.size());
    // Traces differ in cost by an order of magnitude, hence dynamic scheduling.
    // sweep_one never throws, so no exception escapes the parallel region.
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        out[k] = sweep_one(methods[k], problem, x, settings, ref);
    }
    return out;
}

std::string_view to_string(Verdict v) noexcept {
    switch (v) {
        case Verdict::consistent: return "consistent";
        case Verdict::inconsistent: return "inconsistent";
        case Verdict::invalid_timestep: return "invalid_timestep";
        case Verdict::trace_failed: return "trace_failed";
    }
    return "unknown";
}

StepValidation validate_step(const ResidualSystem& rs, std::span<const double> x, double h_used,
                             std::span<const double> z_obtained, const ContinuationSettings& settings) {
    if (z_obtained.size() != rs.unknown_dim) throw std::invalid_argument("validate_step: z has wrong dimension");
    if (!(h_used > 0.0)) throw std::invalid_argument("validate_step: h_used must be positive");

    ContinuationSettings s = settings;
    s.h_max = std::max(h_used, 0.0) * (1.0 + 1e-12) + 1e-15;
    s.ds_max = std::min(settings.ds_max, std::max(h_used / 4.0, settings.ds_min));
    s.ds0 = std::clamp(settings.ds0, s.ds_min, s.ds_max);
    const Branch br = trace_branch(rs, x, s);

    StepValidation out;
    if (!br.folds.empty() && br.folds.front().h_fold < h_used) {
        out.verdict = Verdict::invalid_timestep;
        out.h_c = br.folds.front().h_fold;
        return out;
    }

    // The first bracket [h_k, h_{k+1}] containing h_used, necessarily before any fold.
    const auto& pts = br.points;
    std::size_t k = pts.size();
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        if (pts[i].h <= h_used && pts[i + 1].h >= h_used) {
            k = i;
            break;
        }
    }
    if (k == pts.size()) {
        std::ostringstream msg;
        msg << "validate_step: principal branch did not reach h = " << h_used << " (" << to_string(br.termination)
            << ')';
        throw TraceFailed(msg.str());
    }

    // Fixed-h correction from the linear interpolant of the bracket; this is
    // the corrector with constraint row (0, ..., 0, 1).
    const auto& a = pts[k];
    const auto& b = pts[k + 1];
    const double w = b.h > a.h ? (h_used - a.h) / (b.h - a.h) : 0.0;
    Vector guess(rs.unknown_dim);
    for (std::size_t i = 0; i < guess.size(); ++i) guess[i] = (1 - w) * a.z[i] + w * b.z[i];
    NewtonOptions opts;
    opts.f_tol = std::min(settings.f_tol, 1e-12);
    NewtonReport nr = newton_solve(rs, x, h_used, guess, opts);
    if (!nr.converged) {
        opts.f_tol = settings.f_tol;
        nr = newton_solve(rs, x, h_used, guess, opts);
    }
    if (!nr.converged) throw TraceFailed("validate_step: fixed-h correction on the principal branch failed");

    out.z_principal = nr.z;
    Vector d(rs.unknown_dim);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = nr.z[i] - z_obtained[i];
    out.distance = norm2(d);
    const double tol = 1e-6 * (1.0 + norm2(nr.z));
    out.verdict = out.distance <= tol ? Verdict::consistent : Verdict::inconsistent;
    return out;
}

namespace {

StepValidation validate_record(const ResidualSystem& rs, const StepRecord& rec, const ContinuationSettings& s) {
    try {
        return validate_step(rs, rec.x, rec.h, rec.z, s);
    } catch (const std::exception&) {
        return StepValidation{};
    }
}

}  // namespace

std::vector<StepValidation> validate_trajectory_serial(const ResidualSystem& rs, std::span<const StepRecord> steps,
                                                       const ContinuationSettings& settings) {
    std::vector<StepValidation> out;
    out.reserve(steps.size());
    for (const auto& rec : steps) out.push_back(validate_record(rs, rec, settings));
    return out;
}

std::vector<StepValidation> validate_trajectory(const ResidualSystem& rs, std::span<const StepRecord> steps,
                                                const ContinuationSettings& settings) {
    const auto n = static_cast<std::ptrdiff_t>(steps.size());
    std::vector<StepValidation> out(steps.size());
#pragma omp parallel for schedule(dynamic, 4)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        out[k] = validate_record(rs, steps[k], settings);
    }
    return out;
}

namespace {

/// Kernel direction of [G_z G_h] at (z, h). Prefers the normalization T_h = 1;
/// at a fold that row is singular and T_z-rows are tried instead.
Vector seed_tangent(const ResidualSystem& rs, std::span<const double> x, std::span<const double> z, double h) {
    const std::size_t n = rs.unknown_dim;
    const DenseMatrix gz = rs.d_z(z, x, h);
    const Vector gh = rs.d_h(z, x, h);
    Vector e(n + 1, 0.0);
    e[n] = 1.0;
    const Vector zero(n + 1, 0.0);
    for (std::size_t k = n + 1; k-- > 0;) {
        Vector row(n + 1, 0.0);
        row[k] = 1.0;
        try {
            auto [t, unused] = solve_bordered(gz, gh, row, e, zero);
            (void)unused;
            const double nt = norm2(t);
            if (all_finite(t) && nt > 0.0) {
                for (double& v : t) v /= nt;
                // Orient toward increasing h where that is defined.
                if (t[n] < 0.0)
                    for (double& v : t) v = -v;
                return t;
            }
        } catch (const SingularMatrix&) {
        }
    }
    throw SingularMatrix("seed_secondary_branch: no tangent at the seed");
}

}  // namespace

Branch seed_secondary_branch(const ResidualSystem& rs, std::span<const double> x, std::span<const double> z_seed,
                             double h_seed, const ContinuationSettings& settings) {
    const Vector t = seed_tangent(rs, x, z_seed, h_seed);
    Vector t_rev = t;
    for (double& v : t_rev) v = -v;

    Branch fwd = trace_from(rs, x, z_seed, h_seed, t, settings);
    Branch rev = trace_from(rs, x, z_seed, h_seed, t_rev, settings);

    Branch out;
    const std::size_t nr = rev.points.size();
    const double s_rev = rev.points.back().arclength;
    out.points.reserve(nr + fwd.points.size() - 1);
    for (std::size_t i = nr; i-- > 0;) {
        BranchPoint p = std::move(rev.points[i]);
        p.arclength = s_rev - p.arclength;
        for (double& v : p.tangent) v = -v;
        out.points.push_back(std::move(p));
    }
    for (auto it = rev.folds.rbegin(); it != rev.folds.rend(); ++it) {
        FoldEvent f = std::move(*it);
        f.index_before = nr - 2 - f.index_before;
        f.arclength = s_rev - f.arclength;
        f.tangent_h_at_fold = -f.tangent_h_at_fold;
        out.folds.push_back(std::move(f));
    }
    for (std::size_t i = 1; i < fwd.points.size(); ++i) {
        BranchPoint p = std::move(fwd.points[i]);
        p.arclength += s_rev;
        out.points.push_back(std::move(p));
    }
    for (auto& f : fwd.folds) {
        f.index_before += nr - 1;
        f.arclength += s_rev;
        out.folds.push_back(std::move(f));
    }
    out.termination = fwd.termination;
    out.termination_reverse = rev.termination;
    return out;
}

}  // namespace critstep
