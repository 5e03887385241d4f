#include "critstep/problems.hpp"

#include <cmath>
#include <numbers>

namespace critstep {

OdeSystem power2_system() {
    OdeSystem sys;
    sys.dim = 1;
    sys.label = "power2";
    sys.rhs = [](std::span<const double> q) { return Vector{q[0] * q[0]}; };
    sys.jacobian = [](std::span<const double> q) {
        DenseMatrix j(1, 1);
        j(0, 0) = 2.0 * q[0];
        return j;
    };
    return sys;
}

LagrangianSystem cubic_spring() {
    LagrangianSystem lag;
    lag.config_dim = 1;
    lag.label = "cubic-spring";
    lag.lagrangian = [](std::span<const double> x, std::span<const double> v) {
        return 0.5 * v[0] * v[0] - x[0] * x[0] * x[0] / 3.0;
    };
    lag.grad_position = [](std::span<const double> x, std::span<const double>) {
        return Vector{-x[0] * x[0]};
    };
    lag.grad_velocity = [](std::span<const double>, std::span<const double> v) {
        return Vector{v[0]};
    };
    return lag;
}

OdeSystem cubic_spring_ode() {
    OdeSystem sys;
    sys.dim = 2;
    sys.label = "cubic-spring";
    sys.rhs = [](std::span<const double> q) { return Vector{q[1], -q[0] * q[0]}; };
    sys.jacobian = [](std::span<const double> q) {
        return DenseMatrix::from_rows({{0.0, 1.0}, {-2.0 * q[0], 0.0}});
    };
    return sys;
}

namespace {

// M(q) (a1, a2)^T = b with M = ((2, c), (c, 1)).
std::array<double, 2> pendulum_accel(double a, double b, double ad, double bd) {
    const double c = std::cos(a - b);
    const double s = std::sin(a - b);
    DenseMatrix m = DenseMatrix::from_rows({{2.0, c}, {c, 1.0}});
    const Vector rhs{-bd * bd * s - 2.0 * kGravity * std::sin(a), ad * ad * s - kGravity * std::sin(b)};
    const Vector acc = solve_dense(m, rhs);
    return {acc[0], acc[1]};
}

DenseMatrix pendulum_jacobian(std::span<const double> q) {
    const double a = q[0], b = q[1], ad = q[2], bd = q[3];
    const double c = std::cos(a - b);
    const double s = std::sin(a - b);
    const auto acc = pendulum_accel(a, b, ad, bd);
    const LuFactorization mass(DenseMatrix::from_rows({{2.0, c}, {c, 1.0}}));

    // d(acc)/dp = M^-1 (db/dp - dM/dp acc), dM/dalpha = -dM/dbeta = ((0,-s),(-s,0))
    const std::array<Vector, 4> rhs{
        Vector{-bd * bd * c - 2.0 * kGravity * std::cos(a) + s * acc[1], ad * ad * c + s * acc[0]},
        Vector{bd * bd * c - s * acc[1], -ad * ad * c - kGravity * std::cos(b) - s * acc[0]},
        Vector{0.0, 2.0 * ad * s},
        Vector{-2.0 * bd * s, 0.0},
    };
    DenseMatrix j(4, 4);
    j(0, 2) = 1.0;
    j(1, 3) = 1.0;
    for (std::size_t p = 0; p < 4; ++p) {
        const Vector col = mass.solve(rhs[p]);
        j(2, p) = col[0];
        j(3, p) = col[1];
    }
    return j;
}

}  // namespace

DoublePendulum double_pendulum() {
    DoublePendulum dp;
    dp.ode.dim = 4;
    dp.ode.label = "double-pendulum";
    dp.ode.rhs = [](std::span<const double> q) {
        const auto acc = pendulum_accel(q[0], q[1], q[2], q[3]);
        return Vector{q[2], q[3], acc[0], acc[1]};
    };
    dp.ode.jacobian = pendulum_jacobian;

    auto& lag = dp.lagrangian;
    lag.config_dim = 2;
    lag.label = "double-pendulum";
    lag.lagrangian = [](std::span<const double> x, std::span<const double> v) {
        return v[0] * v[0] + 0.5 * v[1] * v[1] + v[0] * v[1] * std::cos(x[0] - x[1]) +
               kGravity * (2.0 * std::cos(x[0]) + std::cos(x[1]));
    };
    lag.grad_position = [](std::span<const double> x, std::span<const double> v) {
        const double s = std::sin(x[0] - x[1]);
        return Vector{-v[0] * v[1] * s - 2.0 * kGravity * std::sin(x[0]),
                      v[0] * v[1] * s - kGravity * std::sin(x[1])};
    };
    lag.grad_velocity = [](std::span<const double> x, std::span<const double> v) {
        const double c = std::cos(x[0] - x[1]);
        return Vector{2.0 * v[0] + v[1] * c, v[1] + v[0] * c};
    };
    return dp;
}

double energy(std::span<const double> q) {
    const double a = q[0], b = q[1], ad = q[2], bd = q[3];
    return ad * ad + 0.5 * bd * bd + ad * bd * std::cos(a - b) -
           kGravity * (2.0 * std::cos(a) + std::cos(b));
}

std::pair<Point2, Point2> to_cartesian(std::span<const double> q) {
    const Point2 b1{std::sin(q[0]), -std::cos(q[0])};
    const Point2 b2{b1.x + std::sin(q[1]), b1.y - std::cos(q[1])};
    return {b1, b2};
}

std::array<double, 4> double_pendulum_initial_state() {
    return {0.9 * std::numbers::pi, std::numbers::pi, 0.7, 0.4};
}

std::vector<std::string> problem_ids() { return {"power2", "cubic-spring", "double-pendulum"}; }

std::optional<Problem> find_problem(std::string_view name) {
    if (name == "power2") return Problem{"power2", power2_system(), std::nullopt};
    if (name == "cubic-spring") return Problem{"cubic-spring", cubic_spring_ode(), cubic_spring()};
    if (name == "double-pendulum") {
        DoublePendulum dp = double_pendulum();
        return Problem{"double-pendulum", std::move(dp.ode), std::move(dp.lagrangian)};
    }
    return std::nullopt;
}

Vector rk4_step(const OdeSystem& sys, std::span<const double> q, double h) {
    const std::size_t m = q.size();
    auto axpy = [m](std::span<const double> x, double a, const Vector& k) {
        Vector r(m);
        for (std::size_t i = 0; i < m; ++i) r[i] = x[i] + a * k[i];
        return r;
    };
    const Vector k1 = sys.rhs(q);
    const Vector k2 = sys.rhs(axpy(q, 0.5 * h, k1));
    const Vector k3 = sys.rhs(axpy(q, 0.5 * h, k2));
    const Vector k4 = sys.rhs(axpy(q, h, k3));
    Vector out(m);
    for (std::size_t i = 0; i < m; ++i) out[i] = q[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    return out;
}

}  // namespace critstep
