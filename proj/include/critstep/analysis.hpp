#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "critstep/continuation.hpp"
#include "critstep/newton.hpp"
#include "critstep/problems.hpp"
#include "critstep/steppers.hpp"
#include "critstep/trajectory.hpp"

namespace critstep {

// ---------------------------------------------------------------------------
// Reference trajectory
// ---------------------------------------------------------------------------

struct ReferenceSpec {
    std::string method = "vt1";
    std::string problem = "double-pendulum";
    double h = 2e-5;
    double t0 = 0.0;
    double tf = 2.0;
};

/// Environment variable naming the reference cache directory.
inline constexpr const char* kCacheDirEnv = "CRITSTEP_CACHE_DIR";

/// $CRITSTEP_CACHE_DIR, else $XDG_CACHE_HOME/critstep, else ~/.cache/critstep.
std::filesystem::path default_cache_dir();

/// Integrates the reference (vt1 on the double pendulum from the standard
/// initial condition by default). With a cache directory the result is
/// loaded from / stored to a CSV whose metadata line must match the spec.
/// Throws std::runtime_error when a step fails.
Trajectory reference_trajectory(const ReferenceSpec& spec = {},
                                const std::optional<std::filesystem::path>& cache_dir = std::nullopt);

Trajectory compute_reference(const ReferenceSpec& spec);

class OutOfRange : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

/// Cubic Hermite interpolation with slopes f(q) at the bracketing samples;
/// grid times return the stored state exactly. Throws OutOfRange.
Vector state_at(const Trajectory& traj, const OdeSystem& sys, double t);

class DegenerateReference : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// ||y - y_ref|| / ||y_ref||. Throws DegenerateReference when y_ref = 0.
double relative_error(std::span<const double> y, std::span<const double> y_ref);

// ---------------------------------------------------------------------------
// Fold census and critical-timestep reports
// ---------------------------------------------------------------------------

/// Folds bracketed by at least `min_arclength` and differing in h by at
/// least `min_h_gap` from their neighbours; pairs closer than `min_h_gap`
/// in h are an unresolved S-wiggle and are dropped together.
struct CensusRules {
    double min_arclength_factor = 10.0;  ///< times ds_min
    double min_h_gap = 1e-6;
};

/// Indices into branch.folds that count as distinct folds.
std::vector<std::size_t> fold_census(const Branch& branch, const ContinuationSettings& settings,
                                     const CensusRules& rules = {});

struct FoldSummary {
    double h = 0.0;
    double norm_y = 0.0;
    double arclength = 0.0;
    double tangent_h = 0.0;
    double e_rel = 0.0;  ///< NaN without a reference
    bool localized = true;
    bool counted = true;
};

struct CriticalReport {
    std::string method;
    Vector x;
    std::optional<double> h_c;
    std::size_t fold_count = 0;
    std::string termination;
    std::vector<std::pair<double, double>> branch_summary;  ///< (h, norm_y) per accepted point
    std::vector<double> branch_e_rel;                       ///< empty without a reference
    std::vector<FoldSummary> folds;
    double final_tangent_h = 0.0;
    std::string error;  ///< set when the method could not be traced at all
};

/// Reference used to attach e_rel: branch point (y, h) is compared with the
/// reference state at seed_time + h.
struct ErrorReference {
    const Trajectory* trajectory = nullptr;
    const OdeSystem* ode = nullptr;
    double seed_time = 0.0;
};

/// e_rel for each state y reached with timestep h; NaN where seed_time + h
/// falls outside the reference.
double branch_relative_error(const ErrorReference& ref, std::span<const double> y, double h);

CriticalReport make_report(std::string method, std::span<const double> x, const Branch& branch,
                           const ContinuationSettings& settings, const std::optional<ErrorReference>& ref = std::nullopt);

/// One trace per method from state x. Methods that fail are reported with
/// `error` set rather than thrown. `critical_sweep_serial` is the reference
/// path; `critical_sweep` runs the traces on OpenMP threads and returns
/// identical reports.
std::vector<CriticalReport> critical_sweep_serial(std::span<const std::string> methods, const Problem& problem,
                                                  std::span<const double> x, const ContinuationSettings& settings,
                                                  const std::optional<ErrorReference>& ref = std::nullopt);
std::vector<CriticalReport> critical_sweep(std::span<const std::string> methods, const Problem& problem,
                                           std::span<const double> x, const ContinuationSettings& settings,
                                           const std::optional<ErrorReference>& ref = std::nullopt);

// ---------------------------------------------------------------------------
// Post hoc validation
// ---------------------------------------------------------------------------

enum class Verdict { consistent, inconsistent, invalid_timestep, trace_failed };

std::string_view to_string(Verdict v) noexcept;

class TraceFailed : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct StepValidation {
    Verdict verdict = Verdict::trace_failed;
    std::optional<double> h_c;  ///< first fold of the principal branch, when below h_used
    Vector z_principal;         ///< principal-branch unknowns at h_used (when reached)
    double distance = 0.0;      ///< |z_principal - z_obtained|
};

/// Classifies a converged step (x, h_used) -> z_obtained against the
/// principal branch traced from h = 0. Throws TraceFailed when the branch
/// cannot be followed up to h_used.
StepValidation validate_step(const ResidualSystem& rs, std::span<const double> x, double h_used,
                             std::span<const double> z_obtained, const ContinuationSettings& settings);

/// validate_step for every step of an integration; trace failures are
/// reported as Verdict::trace_failed. The serial form is the reference for
/// the OpenMP one.
std::vector<StepValidation> validate_trajectory_serial(const ResidualSystem& rs, std::span<const StepRecord> steps,
                                                       const ContinuationSettings& settings);
std::vector<StepValidation> validate_trajectory(const ResidualSystem& rs, std::span<const StepRecord> steps,
                                                const ContinuationSettings& settings);

/// Traces both orientations from a converged solution (z_seed, h_seed) that
/// need not lie on the principal branch, and joins them into one branch
/// ordered by arclength (reverse part first).
Branch seed_secondary_branch(const ResidualSystem& rs, std::span<const double> x, std::span<const double> z_seed,
                             double h_seed, const ContinuationSettings& settings);

}  // namespace critstep
