#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <span>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "critstep/linalg.hpp"

namespace critstep {

/// Autonomous first-order system q' = f(q) with analytic Jacobian.
struct OdeSystem {
    std::size_t dim = 0;
    std::function<Vector(std::span<const double>)> rhs;
    std::function<DenseMatrix(std::span<const double>)> jacobian;
    std::string label;
};

/// Lagrangian L(q, v) on an n-dimensional configuration space with its
/// gradients. Second derivatives are not required from problem definitions.
struct LagrangianSystem {
    std::size_t config_dim = 0;
    std::function<double(std::span<const double>, std::span<const double>)> lagrangian;
    std::function<Vector(std::span<const double>, std::span<const double>)> grad_position;
    std::function<Vector(std::span<const double>, std::span<const double>)> grad_velocity;
    std::string label;
};

inline constexpr double kGravity = 9.81;

/// q' = q^2.
OdeSystem power2_system();

/// L = v^2/2 - q^3/3.
LagrangianSystem cubic_spring();

/// First-order form of the spring, state (q, v).
OdeSystem cubic_spring_ode();

struct DoublePendulum {
    OdeSystem ode;
    LagrangianSystem lagrangian;
};

/// Double pendulum in angles (alpha, beta), state (alpha, beta, alpha', beta').
/// Angles are never wrapped.
DoublePendulum double_pendulum();

/// Conserved energy of the double pendulum.
double energy(std::span<const double> q);

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

/// Bob positions for unit-length rods hanging from the origin.
std::pair<Point2, Point2> to_cartesian(std::span<const double> q);

/// Standard initial condition (9pi/10, pi, 0.7, 0.4) for the experiments.
std::array<double, 4> double_pendulum_initial_state();

/// A named test system: its first-order form and, when it has one, its
/// Lagrangian. State ordering of the two agrees: (positions, velocities).
struct Problem {
    std::string name;
    OdeSystem ode;
    std::optional<LagrangianSystem> lagrangian;
};

/// power2, cubic-spring, double-pendulum.
std::vector<std::string> problem_ids();
std::optional<Problem> find_problem(std::string_view name);

/// Classical RK4 step; used for independent reference integrations only.
Vector rk4_step(const OdeSystem& sys, std::span<const double> q, double h);

}  // namespace critstep
