#include "critstep/continuation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace critstep {

std::string_view to_string(Termination t) noexcept {
    switch (t) {
        case Termination::h_exceeded: return "h_exceeded";
        case Termination::h_nonpositive: return "h_nonpositive";
        case Termination::norm_exceeded: return "norm_exceeded";
        case Termination::max_steps: return "max_steps";
        case Termination::corrector_failed: return "corrector_failed";
    }
    return "unknown";
}

namespace {

constexpr double kOrthogonalityTol = 1e-9;
// Absolute floor on |c . T| / |T| relative to the size of (z, h): the dot
// product cannot be driven below the roundoff of the iterates themselves.
constexpr double kOrthogonalityFloor = 1e-14;

Vector unit_last(std::size_t n) {
    Vector e(n, 0.0);
    e.back() = 1.0;
    return e;
}

Vector normalized(Vector v) {
    const double n = norm2(v);
    for (double& x : v) x /= n;
    return v;
}

BranchPoint make_point(const ResidualSystem& rs, std::span<const double> x, Vector z, double h, Vector tangent,
                       double arclength, double residual) {
    BranchPoint p;
    p.y = rs.reconstruct(z, x, h);
    p.norm_y = norm2(p.y);
    p.z = std::move(z);
    p.h = h;
    p.tangent = normalized(std::move(tangent));
    p.arclength = arclength;
    p.residual_norm = residual;
    return p;
}

// Predictor along the unit tangent followed by the corrector.
CorrectorResult advance(const ResidualSystem& rs, std::span<const double> x, const BranchPoint& from, double ds,
                        const ContinuationSettings& settings) {
    const std::size_t nz = from.z.size();
    Vector z_hat(nz);
    for (std::size_t i = 0; i < nz; ++i) z_hat[i] = from.z[i] + ds * from.tangent[i];
    const double h_hat = from.h + ds * from.tangent_h();
    return corrector(rs, x, z_hat, h_hat, from.tangent, settings);
}

int sign_of(double v) { return (v > 0.0) - (v < 0.0); }

}  // namespace

Vector initial_tangent(const ResidualSystem& rs, std::span<const double> x) {
    const Vector z0 = rs.initial_z(x);
    const std::size_t nz = rs.unknown_dim;
    const Vector e = unit_last(nz + 1);
    const DenseMatrix gz = rs.d_z(z0, x, 0.0);
    const Vector gh = rs.d_h(z0, x, 0.0);
    return LuFactorization(bordered_matrix(gz, gh, e)).solve(e);
}

CorrectorResult corrector(const ResidualSystem& rs, std::span<const double> x, std::span<const double> z_hat,
                          double h_hat, std::span<const double> t_prev, const ContinuationSettings& settings) {
    const std::size_t nz = rs.unknown_dim;
    if (t_prev.size() != nz + 1 || z_hat.size() != nz) throw std::invalid_argument("corrector: size mismatch");

    CorrectorResult res;
    res.z.assign(z_hat.begin(), z_hat.end());
    res.h = h_hat;
    const Vector e = unit_last(nz + 1);
    Vector rhs2(nz + 1, 0.0);
    // Accumulated correction from the predictor, summed from the updates so
    // its direction stays accurate even when it is tiny compared with z.
    Vector off(nz + 1, 0.0);

    for (std::size_t it = 0;; ++it) {
        const Vector g = rs.eval(res.z, x, res.h);
        const double r = norm2(g);
        res.residual_norm = r;
        res.iterations = it;
        if (!std::isfinite(r)) {
            res.status = CorrectorStatus::non_finite;
            return res;
        }
        for (std::size_t i = 0; i < nz; ++i) rhs2[i] = -g[i];
        Vector tangent, delta;
        try {
            auto [t, d] = solve_bordered(rs.d_z(res.z, x, res.h), rs.d_h(res.z, x, res.h), t_prev, e, rhs2);
            tangent = std::move(t);
            delta = std::move(d);
        } catch (const SingularMatrix&) {
            res.status = CorrectorStatus::singular;
            return res;
        }
        res.tangent = tangent;

        const double tt = dot(tangent, tangent);
        const double off_t = dot(off, tangent);

        // Accept once the residual is small and the accumulated correction is
        // orthogonal to the tangent at this point, i.e. it is the
        // minimum-norm correction onto the curve.
        const double scale = 1.0 + std::hypot(norm2(res.z), res.h);
        const double off_norm = norm2(off);
        const bool orthogonal =
            std::abs(off_t) <= (kOrthogonalityTol * off_norm + kOrthogonalityFloor * scale) * std::sqrt(tt);
        if (r < settings.f_tol && orthogonal) {
            res.status = CorrectorStatus::converged;
            return res;
        }
        if (it == settings.max_corrector_iters) {
            res.status = CorrectorStatus::no_convergence;
            return res;
        }
        // The projection is taken from the predictor, so every iterate is the
        // minimum-norm solution of the linearized constraints at the
        // previous iterate; on the first iteration off = 0.
        const double eta = -(dot(delta, tangent) + off_t) / tt;
        for (std::size_t i = 0; i <= nz; ++i) delta[i] += eta * tangent[i];

        for (std::size_t i = 0; i < nz; ++i) res.z[i] += delta[i];
        res.h += delta[nz];
        for (std::size_t i = 0; i <= nz; ++i) off[i] += delta[i];
        const double on = norm2(off);
        if (on > 0.0) {
            const double defect = std::abs(dot(off, tangent)) / (on * std::sqrt(tt));
            res.max_orthogonality_defect = std::max(res.max_orthogonality_defect, defect);
        }
        if (!all_finite(res.z) || !std::isfinite(res.h)) {
            res.status = CorrectorStatus::non_finite;
            return res;
        }
    }
}

double step_length(double ds_prev, std::span<const double> t_curr, std::span<const double> t_prev,
                   const ContinuationSettings& settings) {
    if (!(ds_prev > 0.0)) throw std::invalid_argument("step_length: ds_prev must be positive");
    Vector w(t_curr.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = (t_curr[i] - t_prev[i]) / ds_prev;
    const double wn = norm2(w);
    if (wn < 1e-12) return settings.ds_max;
    return std::clamp(std::sqrt(2.0 * settings.eps / wn), settings.ds_min, settings.ds_max);
}

FoldEvent localize_fold(const ResidualSystem& rs, std::span<const double> x, const BranchPoint& before,
                        std::size_t index_before, double ds, const ContinuationSettings& settings) {
    const int sign_lo = sign_of(before.tangent_h());
    double lo = 0.0, hi = ds;

    FoldEvent ev;
    ev.index_before = index_before;
    ev.localized = false;
    double best = std::abs(before.tangent_h());
    auto record = [&](const Vector& z, double h, const Vector& t, double s) {
        const BranchPoint p = make_point(rs, x, z, h, t, before.arclength + s, 0.0);
        ev.z_fold = p.z;
        ev.h_fold = p.h;
        ev.y_fold = p.y;
        ev.norm_y = p.norm_y;
        ev.arclength = p.arclength;
        ev.tangent_h_at_fold = p.tangent_h();
        best = std::abs(p.tangent_h());
    };
    record(before.z, before.h, before.tangent, 0.0);

    for (std::size_t it = 0; it < settings.max_fold_bisections; ++it) {
        const double mid = 0.5 * (lo + hi);
        const CorrectorResult c = advance(rs, x, before, mid, settings);
        if (!c.ok()) return ev;
        const Vector t = normalized(c.tangent);
        const double th = t.back();
        if (std::abs(th) <= best) record(c.z, c.h, t, mid);
        if (sign_of(th) == sign_lo) lo = mid;
        else hi = mid;
        if (hi - lo <= settings.fold_bracket_tol || th == 0.0) {
            ev.localized = best <= settings.fold_tol;
            return ev;
        }
    }
    ev.localized = false;
    return ev;
}

double tangent_kernel_residual(const ResidualSystem& rs, std::span<const double> x, const BranchPoint& p) {
    const std::size_t nz = rs.unknown_dim;
    const DenseMatrix gz = rs.d_z(p.z, x, p.h);
    const Vector gh = rs.d_h(p.z, x, p.h);
    const Vector tz(p.tangent.begin(), p.tangent.begin() + static_cast<std::ptrdiff_t>(nz));
    Vector r = gz.multiply(tz);
    for (std::size_t i = 0; i < nz; ++i) r[i] += gh[i] * p.tangent_h();
    return norm2(r) / norm2(p.tangent);
}

Branch trace_from(const ResidualSystem& rs, std::span<const double> x, std::span<const double> z0, double h0,
                  std::span<const double> t0, const ContinuationSettings& settings) {
    if (!(settings.ds_min <= settings.ds0 && settings.ds0 <= settings.ds_max))
        throw std::invalid_argument("ContinuationSettings: need ds_min <= ds0 <= ds_max");

    Branch br;
    const Vector g0 = rs.eval(z0, x, h0);
    br.points.push_back(make_point(rs, x, Vector(z0.begin(), z0.end()), h0, Vector(t0.begin(), t0.end()), 0.0,
                                   norm2(g0)));
    const bool seeded = h0 > 0.0;

    double ds = settings.ds0;
    for (std::size_t step = 0; step < settings.max_steps; ++step) {
        const BranchPoint& last = br.points.back();

        CorrectorResult c;
        bool accepted = false;
        for (std::size_t attempt = 0; attempt <= settings.max_halvings; ++attempt) {
            c = advance(rs, x, last, ds, settings);
            if (c.ok()) {
                accepted = true;
                break;
            }
            if (ds <= settings.ds_min) break;
            ds = std::max(0.5 * ds, settings.ds_min);
        }
        if (!accepted) {
            br.termination = Termination::corrector_failed;
            return br;
        }

        const std::size_t idx = br.points.size() - 1;
        BranchPoint next = make_point(rs, x, std::move(c.z), c.h, std::move(c.tangent), last.arclength + ds,
                                      c.residual_norm);

        if (sign_of(next.tangent_h()) != sign_of(last.tangent_h()))
            br.folds.push_back(localize_fold(rs, x, last, idx, ds, settings));

        const double ds_next = step_length(ds, next.tangent, last.tangent, settings);
        br.points.push_back(std::move(next));
        ds = ds_next;

        const BranchPoint& p = br.points.back();
        if (p.h > settings.h_max) {
            br.termination = Termination::h_exceeded;
            return br;
        }
        if (p.norm_y > settings.norm_max) {
            br.termination = Termination::norm_exceeded;
            return br;
        }
        if (p.h <= 0.0 && (seeded || !br.folds.empty())) {
            br.termination = Termination::h_nonpositive;
            return br;
        }
    }
    br.termination = Termination::max_steps;
    return br;
}

Branch trace_branch(const ResidualSystem& rs, std::span<const double> x, const ContinuationSettings& settings) {
    const Vector t0 = initial_tangent(rs, x);
    const Vector z0 = rs.initial_z(x);
    return trace_from(rs, x, z0, 0.0, t0, settings);
}

}  // namespace critstep
