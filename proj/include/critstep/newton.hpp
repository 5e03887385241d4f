#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "critstep/linalg.hpp"
#include "critstep/steppers.hpp"
#include "critstep/trajectory.hpp"

namespace critstep {

inline constexpr double kResidualTol = 1e-9;

enum class NewtonStatus { converged, max_iterations, singular_jacobian, non_finite };

std::string_view to_string(NewtonStatus s) noexcept;

struct NewtonOptions {
    double f_tol = kResidualTol;
    std::size_t max_iterations = 50;
    /// Iterates with ||z|| above this are treated as divergent.
    double divergence_norm = 1e12;
    /// Use f_tol * min(1, h) as the tolerance, i.e. bound the defect per unit
    /// time. Fixed-step integration defaults to this so the solve bias summed
    /// over (tf - t0)/h steps stays below f_tol * (tf - t0).
    bool step_scaled = false;
};

inline constexpr NewtonOptions kIntegrationNewton{.step_scaled = true};

struct NewtonReport {
    NewtonStatus status = NewtonStatus::max_iterations;
    bool converged = false;
    std::size_t iterations = 0;
    double final_residual_norm = 0.0;
    Vector z;
    /// ||G|| at every iterate, starting with the initial guess.
    std::vector<double> residual_history;
};

/// Full (undamped) Newton iteration z <- z - G_z^{-1} G at fixed h.
NewtonReport newton_solve(const ResidualSystem& rs, std::span<const double> x, double h,
                          std::span<const double> z0, const NewtonOptions& opts = {});

enum class Initializer { previous, extrapolate };

std::string_view to_string(Initializer i) noexcept;
std::optional<Initializer> parse_initializer(std::string_view s);

struct StepRecord {
    double t = 0.0;  ///< time at the start of the step
    double h = 0.0;
    Vector x;        ///< state the step started from
    Vector z;        ///< converged unknowns
    std::size_t iterations = 0;
    double residual_norm = 0.0;
};

struct StepFailure {
    double t = 0.0;
    double h = 0.0;
    NewtonReport report;
};

struct IntegrationResult {
    Trajectory trajectory;
    std::vector<StepRecord> steps;
    std::optional<StepFailure> failure;

    bool ok() const noexcept { return !failure.has_value(); }
};

/// Fixed-step integration from t0 to tf. The last step is shortened to land
/// exactly on tf. On a failed step the trajectory up to the failure is kept.
IntegrationResult integrate_fixed(const ResidualSystem& rs, std::span<const double> x0, double t0, double tf,
                                  double h, Initializer init, const NewtonOptions& opts = kIntegrationNewton);

}  // namespace critstep
