#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "critstep/linalg.hpp"
#include "critstep/steppers.hpp"

namespace critstep {

struct ContinuationSettings {
    double ds0 = 1e-2;
    double ds_min = 1e-8;
    double ds_max = 0.1;
    double f_tol = 1e-9;
    /// Absolute error target of the predictor; 100 * f_tol.
    double eps = 1e-7;
    std::size_t max_corrector_iters = 20;
    std::size_t max_steps = 100000;
    double h_max = 0.35;
    double norm_max = 1e3;
    double fold_tol = 1e-6;
    std::size_t max_halvings = 10;
    std::size_t max_fold_bisections = 80;
    /// Bisection on a fold bracket stops once the arclength bracket is this narrow.
    double fold_bracket_tol = 1e-10;
};

/// One accepted point of a branch in augmented (z, h) space. `tangent` has
/// unit Euclidean norm and its last entry is the h-component.
struct BranchPoint {
    Vector z;
    double h = 0.0;
    Vector tangent;
    double arclength = 0.0;
    Vector y;
    double norm_y = 0.0;
    double residual_norm = 0.0;

    double tangent_h() const { return tangent.back(); }
};

struct FoldEvent {
    std::size_t index_before = 0;
    Vector z_fold;
    double h_fold = 0.0;
    Vector y_fold;
    double norm_y = 0.0;
    double arclength = 0.0;
    double tangent_h_at_fold = 0.0;
    /// False when bisection ran out of iterations or a trial corrector failed.
    bool localized = true;
};

enum class Termination { h_exceeded, h_nonpositive, norm_exceeded, max_steps, corrector_failed };

std::string_view to_string(Termination t) noexcept;

struct Branch {
    std::vector<BranchPoint> points;
    std::vector<FoldEvent> folds;
    Termination termination = Termination::max_steps;
    /// Set only for branches traced in both directions from a seed.
    std::optional<Termination> termination_reverse;
};

/// Tangent at the zero-step root (initial_z(x), 0), normalized so T_h = 1.
/// Throws SingularMatrix when G_z is singular there.
Vector initial_tangent(const ResidualSystem& rs, std::span<const double> x);

enum class CorrectorStatus { converged, no_convergence, singular, non_finite };

struct CorrectorResult {
    CorrectorStatus status = CorrectorStatus::no_convergence;
    Vector z;
    double h = 0.0;
    /// Kernel vector at the final iterate, scaled so t_prev . tangent = 1.
    Vector tangent;
    std::size_t iterations = 0;
    double residual_norm = 0.0;
    /// max over iterations k of |c_{k+1} . T_k| / (|c_{k+1}| |T_k|), where c_{k+1}
    /// is the accumulated correction from the predictor after the update
    /// built with tangent T_k; zero in exact arithmetic.
    double max_orthogonality_defect = 0.0;

    bool ok() const noexcept { return status == CorrectorStatus::converged; }
};

/// Gauss-Newton corrector: minimum-norm updates from the bordered system with
/// the bottom row held at t_prev. Converges when |G| < f_tol and the total
/// correction from the predictor is orthogonal to the tangent at the result
/// to 1e-9 relative, with an absolute floor of 1e-14 (1 + |(z, h)|) for the
/// roundoff of the dot product.
CorrectorResult corrector(const ResidualSystem& rs, std::span<const double> x, std::span<const double> z_hat,
                          double h_hat, std::span<const double> t_prev, const ContinuationSettings& settings);

/// Step-length control ds = sqrt(2 eps / |w|), w = (t_curr - t_prev) / ds_prev,
/// clamped to [ds_min, ds_max].
double step_length(double ds_prev, std::span<const double> t_curr, std::span<const double> t_prev,
                   const ContinuationSettings& settings);

/// Principal branch from (initial_z(x), 0), oriented toward increasing h.
Branch trace_branch(const ResidualSystem& rs, std::span<const double> x, const ContinuationSettings& settings);

/// Branch from an arbitrary solution (z0, h0) along direction t0 (any scale).
Branch trace_from(const ResidualSystem& rs, std::span<const double> x, std::span<const double> z0, double h0,
                  std::span<const double> t0, const ContinuationSettings& settings);

/// Refines a sign change of T_h between `before` and the point reached from it
/// with arclength step `ds`.
FoldEvent localize_fold(const ResidualSystem& rs, std::span<const double> x, const BranchPoint& before,
                        std::size_t index_before, double ds, const ContinuationSettings& settings);

/// Kernel residual |[G_z G_h] t| / |t| at a branch point.
double tangent_kernel_residual(const ResidualSystem& rs, std::span<const double> x, const BranchPoint& p);

}  // namespace critstep
