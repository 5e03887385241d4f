#include "critstep/newton.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace critstep {

std::string_view to_string(NewtonStatus s) noexcept {
    switch (s) {
        case NewtonStatus::converged: return "converged";
        case NewtonStatus::max_iterations: return "max_iterations";
        case NewtonStatus::singular_jacobian: return "singular_jacobian";
        case NewtonStatus::non_finite: return "non_finite";
    }
    return "unknown";
}

std::string_view to_string(Initializer i) noexcept {
    return i == Initializer::previous ? "previous" : "extrapolate";
}

std::optional<Initializer> parse_initializer(std::string_view s) {
    if (s == "previous") return Initializer::previous;
    if (s == "extrapolate") return Initializer::extrapolate;
    return std::nullopt;
}

NewtonReport newton_solve(const ResidualSystem& rs, std::span<const double> x, double h,
                          std::span<const double> z0, const NewtonOptions& opts) {
    if (z0.size() != rs.unknown_dim) throw std::invalid_argument("newton_solve: z0 has wrong size");
    const double tol = opts.step_scaled ? opts.f_tol * std::min(1.0, h) : opts.f_tol;
    NewtonReport rep;
    rep.z.assign(z0.begin(), z0.end());

    for (std::size_t it = 0;; ++it) {
        const Vector g = rs.eval(rep.z, x, h);
        const double r = norm2(g);
        rep.residual_history.push_back(r);
        rep.final_residual_norm = r;
        rep.iterations = it;
        if (!std::isfinite(r)) {
            rep.status = NewtonStatus::non_finite;
            return rep;
        }
        if (r < tol) {
            rep.status = NewtonStatus::converged;
            rep.converged = true;
            return rep;
        }
        if (it == opts.max_iterations) {
            rep.status = NewtonStatus::max_iterations;
            return rep;
        }
        Vector dz;
        try {
            dz = solve_dense(rs.d_z(rep.z, x, h), g);
        } catch (const SingularMatrix&) {
            rep.status = NewtonStatus::singular_jacobian;
            return rep;
        }
        for (std::size_t i = 0; i < dz.size(); ++i) rep.z[i] -= dz[i];
        const double zn = norm2(rep.z);
        if (!std::isfinite(zn) || zn > opts.divergence_norm) {
            rep.iterations = it + 1;
            rep.status = NewtonStatus::non_finite;
            return rep;
        }
    }
}

IntegrationResult integrate_fixed(const ResidualSystem& rs, std::span<const double> x0, double t0, double tf,
                                  double h, Initializer init, const NewtonOptions& opts) {
    if (!(tf > t0) || !(h > 0.0)) throw std::invalid_argument("integrate_fixed: need tf > t0 and h > 0");
    if (x0.size() != rs.state_dim) throw std::invalid_argument("integrate_fixed: x0 has wrong size");

    // Number of steps, tolerant of (tf - t0)/h landing a hair off an integer.
    const double ratio = (tf - t0) / h;
    auto n_steps = static_cast<std::size_t>(std::ceil(ratio));
    if (n_steps > 0 && std::abs(ratio - static_cast<double>(n_steps - 1)) <= 1e-9 * ratio) --n_steps;
    if (n_steps == 0) n_steps = 1;

    IntegrationResult out;
    auto& traj = out.trajectory;
    traj.t0 = t0;
    traj.h = h;
    traj.method = rs.label;
    traj.times.reserve(n_steps + 1);
    traj.states.reserve(n_steps + 1);
    out.steps.reserve(n_steps);
    traj.times.push_back(t0);
    traj.states.emplace_back(x0.begin(), x0.end());

    double h_prev = h;
    for (std::size_t k = 0; k < n_steps; ++k) {
        const double t = t0 + static_cast<double>(k) * h;
        const double t_next = (k + 1 == n_steps) ? tf : t0 + static_cast<double>(k + 1) * h;
        const double hk = t_next - t;
        const Vector& x = traj.states.back();

        Vector z0;
        if (init == Initializer::extrapolate && traj.states.size() >= 2) {
            const Vector& xm = traj.states[traj.states.size() - 2];
            Vector guess(x.size());
            const double r = hk / h_prev;
            for (std::size_t i = 0; i < x.size(); ++i) guess[i] = x[i] + r * (x[i] - xm[i]);
            z0 = rs.initial_z(guess);
        } else {
            z0 = rs.initial_z(x);
        }

        NewtonReport rep = newton_solve(rs, x, hk, z0, opts);
        if (!rep.converged) {
            out.failure = StepFailure{t, hk, std::move(rep)};
            return out;
        }
        Vector y = rs.reconstruct(rep.z, x, hk);
        out.steps.push_back(StepRecord{t, hk, x, rep.z, rep.iterations, rep.final_residual_norm});
        traj.times.push_back(t_next);
        traj.states.push_back(std::move(y));
        h_prev = hk;
    }
    return out;
}

}  // namespace critstep
