#include <doctest.h>

#include <numbers>

#include "critstep/newton.hpp"
#include "critstep/problems.hpp"
#include "critstep/steppers.hpp"
#include "support.hpp"

using namespace critstep;

namespace {

struct Case {
    std::string method;
    Problem problem;
};

std::vector<Case> all_cases() {
    std::vector<Case> out;
    for (const auto& pid : problem_ids()) {
        const Problem p = *find_problem(pid);
        for (const auto& m : method_ids()) {
            if (m == "vt1" && !p.lagrangian) continue;
            out.push_back({m, p});
        }
    }
    return out;
}

double state_scale(const Problem& p) { return p.name == "power2" ? 1.0 : 2.0; }

/// Closed-form vt1 roots for the cubic spring (forward-time sign convention).
std::pair<Vector, Vector> spring_roots(double x, double xd, double h) {
    const double disc = 4 - h * h * (h * h * x * x - 4 * h * xd - 4 * x);
    const double r = std::sqrt(disc);
    auto make = [&](double y) { return Vector{y, 2 * (y - x) / h - xd}; };
    return {make((-2 + r) / (h * h)), make((-2 - r) / (h * h))};
}

}  // namespace

TEST_CASE("tableau registry") {
    const auto& reg = tableau_registry();
    REQUIRE(reg.size() == 7);
    const std::vector<std::string> names{"be", "tr", "trb2", "radau3", "radau5", "gl4", "gl6"};
    const std::vector<int> orders{1, 2, 2, 3, 5, 4, 6};
    for (std::size_t k = 0; k < reg.size(); ++k) {
        const auto& t = reg[k];
        CHECK(t.name == names[k]);
        CHECK(t.order == orders[k]);
        double bsum = 0;
        for (double b : t.b) bsum += b;
        CHECK(bsum == doctest::Approx(1.0).epsilon(1e-15));
        for (std::size_t i = 0; i < t.stages; ++i) {
            double row = 0;
            for (std::size_t j = 0; j < t.stages; ++j) row += t.a(i, j);
            CHECK(t.c[i] == doctest::Approx(row).epsilon(1e-15));
        }
    }
    CHECK(method_ids() == std::vector<std::string>{"be", "tr", "trb2", "radau3", "radau5", "gl4", "gl6", "vt1"});

    const auto& be = *find_tableau("be");
    CHECK(be.stages == 1);
    CHECK(be.a(0, 0) == 1.0);
    CHECK(be.b[0] == 1.0);
    CHECK(be.c[0] == 1.0);

    const auto& trb = *find_tableau("trb2");
    const double g = 2 - std::numbers::sqrt2;
    CHECK(trb.a(1, 0) == doctest::Approx(g / 2));
    CHECK(trb.a(1, 1) == doctest::Approx(g / 2));
    CHECK(trb.a(1, 2) == 0.0);
    CHECK(trb.b[0] == doctest::Approx(1 / (2 * (2 - g))));
    CHECK(trb.b[1] == doctest::Approx(1 / (2 * (2 - g))));
    CHECK(trb.b[2] == doctest::Approx((1 - g) / (2 - g)));

    const auto& gl4 = *find_tableau("gl4");
    const double s3 = std::sqrt(3.0) / 6;
    CHECK(gl4.c[0] == doctest::Approx(0.5 - s3));
    CHECK(gl4.c[1] == doctest::Approx(0.5 + s3));
    CHECK(gl4.b[0] == 0.5);
    CHECK(gl4.b[1] == 0.5);

    CHECK_FALSE(find_tableau("rk4"));
}

TEST_CASE("property: tableaux satisfy the simplifying conditions of their order") {
    // sum_i b_i c_i^(k-1) = 1/k up to the quadrature order of each method.
    for (const auto& t : tableau_registry()) {
        const int q = t.name == "trb2" ? 2 : t.order;
        for (int k = 1; k <= q; ++k) {
            double s = 0;
            for (std::size_t i = 0; i < t.stages; ++i) s += t.b[i] * std::pow(t.c[i], k - 1);
            CHECK_MESSAGE(s == doctest::Approx(1.0 / k).epsilon(1e-13), t.name << " k=" << k);
        }
    }
}

TEST_CASE("Gauss-Legendre rules on [-1/2, 1/2]") {
    for (std::size_t n : {1u, 2u, 3u, 5u, 20u}) {
        const auto r = gauss_legendre(n);
        REQUIRE(r.nodes.size() == n);
        for (int d = 0; d <= static_cast<int>(2 * n - 1); ++d) {
            double s = 0;
            for (std::size_t i = 0; i < n; ++i) s += r.weights[i] * std::pow(r.nodes[i], d);
            const double exact = d % 2 ? 0.0 : 1.0 / ((d + 1) * std::pow(2.0, d));
            CHECK(s == doctest::Approx(exact).epsilon(1e-13));
        }
    }
}

TEST_CASE("property: zero-step root and nonsingular d_z there") {
    for (const auto& c : all_cases()) {
        const ResidualSystem rs = make_residual(c.method, c.problem);
        for (int k = 0; k < 20; ++k) {
            const Vector x = test::random_vector(rs.state_dim, -state_scale(c.problem), state_scale(c.problem));
            const Vector z0 = rs.initial_z(x);
            REQUIRE(z0.size() == rs.unknown_dim);
            CHECK(norm2(rs.eval(z0, x, 0.0)) <= 1e-12);
            CHECK_NOTHROW(LuFactorization(rs.d_z(z0, x, 0.0)));
            const Vector y = rs.reconstruct(z0, x, 0.0);
            CHECK(norm2(test::sub(y, x)) <= 1e-14);
        }
    }
}

TEST_CASE("property: d_z and d_h agree with finite differences of eval") {
    for (const auto& c : all_cases()) {
        const ResidualSystem rs = make_residual(c.method, c.problem);
        for (int k = 0; k < 10; ++k) {
            const double sc = state_scale(c.problem);
            const Vector x = test::random_vector(rs.state_dim, -sc, sc);
            Vector z = rs.initial_z(x);
            const Vector dz = test::random_vector(z.size(), -0.3, 0.3);
            for (std::size_t i = 0; i < z.size(); ++i) z[i] += dz[i];
            const double h = test::random_real(0.0, 0.3);

            const DenseMatrix jz = rs.d_z(z, x, h);
            const DenseMatrix fd = test::fd_jacobian([&](std::span<const double> v) { return rs.eval(v, x, h); }, z,
                                                     1e-6);
            CHECK_MESSAGE(test::frobenius_diff(jz, fd) <= 1e-6 * (1 + test::frobenius(jz)), c.method << "/"
                                                                                            << c.problem.name);

            const Vector jh = rs.d_h(z, x, h);
            const double step = 1e-6;
            const Vector gp = rs.eval(z, x, h + step);
            const Vector gm = rs.eval(z, x, h - step);
            Vector fdh(jh.size());
            for (std::size_t i = 0; i < jh.size(); ++i) fdh[i] = (gp[i] - gm[i]) / (2 * step);
            CHECK_MESSAGE(norm2(test::sub(jh, fdh)) <= 1e-6 * (1 + norm2(jh)), c.method << "/" << c.problem.name);
        }
    }
}

TEST_CASE("irk residual: backward Euler on q'=q^2 is hy^2 - y + x") {
    const ResidualSystem rs = make_residual("be", *find_problem("power2"));
    for (double y : {0.5, 1.3, 2.0})
        for (double h : {0.0, 0.1, 0.25}) {
            const Vector x{1.0};
            CHECK(rs.eval(Vector{y}, x, h)[0] == doctest::Approx(y - 1 - h * y * y));
            CHECK(rs.reconstruct(Vector{y}, x, h)[0] == doctest::Approx(1 + h * y * y));
        }
}

TEST_CASE("irk residual: gl4 on q'=q^2 matches the Taylor expansion of 1/(1-t)") {
    const ResidualSystem rs = make_residual("gl4", *find_problem("power2"));
    const Vector x{1.0};
    const double h = 1e-3;
    const NewtonReport r = newton_solve(rs, x, h, rs.initial_z(x), {.f_tol = 1e-14});
    REQUIRE(r.converged);
    const double y = rs.reconstruct(r.z, x, h)[0];
    CHECK(std::abs(y - 1.001001) <= 1e-8);
    CHECK(std::abs(y - 1.0 / (1.0 - h)) <= 1e-14);
}

TEST_CASE("property: consistency, (y - x)/h tends to f(x) at first order") {
    for (const auto& c : all_cases()) {
        const ResidualSystem rs = make_residual(c.method, c.problem);
        const Vector x = test::random_vector(rs.state_dim, -1, 1);
        const Vector f = c.problem.ode.rhs(x);
        double prev = 0;
        for (double h : {1e-2, 5e-3}) {
            const NewtonReport r = newton_solve(rs, x, h, rs.initial_z(x), {.f_tol = 1e-14});
            REQUIRE(r.converged);
            const Vector y = rs.reconstruct(r.z, x, h);
            Vector slope(y.size());
            for (std::size_t i = 0; i < y.size(); ++i) slope[i] = (y[i] - x[i]) / h - f[i];
            const double dev = norm2(slope);
            CHECK(dev <= 10 * h * (1 + norm2(f)) * (1 + norm2(x)));
            if (prev > 0) CHECK(dev <= 0.6 * prev);
            prev = dev;
        }
    }
}

TEST_CASE("property: IRK global order of accuracy on the double pendulum over [0, 0.1]") {
    const Problem p = *find_problem("double-pendulum");
    const auto ic = double_pendulum_initial_state();
    const Vector x0(ic.begin(), ic.end());
    Vector ref = x0;
    for (int i = 0; i < 20000; ++i) ref = rk4_step(p.ode, ref, 5e-6);

    for (const auto& tab : tableau_registry()) {
        // Step pairs inside the asymptotic range and above roundoff.
        const int n = (tab.order >= 5) ? 4 : 10;
        const ResidualSystem rs = irk_residual(tab, p.ode);
        const NewtonOptions tight{.f_tol = 1e-14};
        double err[2];
        for (int k = 0; k < 2; ++k) {
            const auto r = integrate_fixed(rs, x0, 0.0, 0.1, 0.1 / (n << k), Initializer::previous, tight);
            REQUIRE(r.ok());
            err[k] = norm2(test::sub(r.trajectory.states.back(), ref));
        }
        const double observed = std::log2(err[0] / err[1]);
        CHECK_MESSAGE(std::abs(observed - tab.order) <= 0.15 * tab.order, tab.name << " observed " << observed);
    }
}

TEST_CASE("vt1 cubic spring: roots at x=1, xd=0, h=1 are -2 +/- sqrt(7)") {
    const ResidualSystem rs = make_residual("vt1", *find_problem("cubic-spring"));
    const Vector x{1.0, 0.0};
    for (double y : {-2 + std::sqrt(7.0), -2 - std::sqrt(7.0)}) {
        const NewtonReport r = newton_solve(rs, x, 1.0, Vector{y + 1e-2, 2 * (y - 1) + 1e-2}, {.f_tol = 1e-13});
        REQUIRE(r.converged);
        CHECK(r.z[0] == doctest::Approx(y).epsilon(1e-12));
    }
    CHECK(-2 + std::sqrt(7.0) == doctest::Approx(0.6457513));
}

TEST_CASE("property: vt1 spring roots match the closed form") {
    const ResidualSystem rs = make_residual("vt1", *find_problem("cubic-spring"));
    int tested = 0;
    while (tested < 50) {
        const double x = test::random_real(-2, 2), xd = test::random_real(-2, 2), h = test::random_real(0.05, 1.5);
        if (4 - h * h * (h * h * x * x - 4 * h * xd - 4 * x) <= 1e-3) continue;
        ++tested;
        const Vector xs{x, xd};
        for (const Vector& root : {spring_roots(x, xd, h).first, spring_roots(x, xd, h).second}) {
            CHECK(norm2(rs.eval(root, xs, h)) <= 1e-9 * (1 + norm2(root)) * (1 + norm2(root)));
            Vector guess = root;
            guess[0] += 1e-4;
            const NewtonReport r = newton_solve(rs, xs, h, guess, {.f_tol = 1e-12});
            REQUIRE(r.converged);
            CHECK(norm2(test::sub(r.z, root)) <= 1e-9 * (1 + norm2(root)));
        }
    }
}

TEST_CASE("vt1 cubic spring: real solutions exist only up to sqrt(2 + 2 sqrt 2)") {
    const ResidualSystem rs = make_residual("vt1", *find_problem("cubic-spring"));
    const Vector x{1.0, 0.0};
    const double hc = std::sqrt(2 + 2 * std::numbers::sqrt2);
    // Just below h_c both roots exist and are close to -2/h^2.
    const auto [lo, hi] = spring_roots(1.0, 0.0, hc - 1e-3);
    CHECK(norm2(rs.eval(lo, x, hc - 1e-3)) <= 1e-9);
    CHECK(norm2(rs.eval(hi, x, hc - 1e-3)) <= 1e-9);
    // Above h_c Newton from the double root cannot converge.
    const double y_double = -2 / (hc * hc);
    const NewtonReport r = newton_solve(rs, x, hc + 1e-2, Vector{y_double, 2 * (y_double - 1) / hc});
    CHECK_FALSE(r.converged);
}

TEST_CASE("vt1 quadrature option: more nodes agree at h = 0 and differ at second order in h") {
    const Problem p = *find_problem("double-pendulum");
    const ResidualSystem one = vt1_residual(*p.lagrangian, 1);
    const ResidualSystem many = vt1_residual(*p.lagrangian, 20);
    const Vector x = test::random_vector(4, -1, 1);
    Vector z = x;
    z[0] += 0.01;
    CHECK(norm2(test::sub(one.eval(z, x, 0.0), many.eval(z, x, 0.0))) <= 1e-14);
    const double d1 = norm2(test::sub(one.eval(z, x, 1e-3), many.eval(z, x, 1e-3)));
    const double d2 = norm2(test::sub(one.eval(z, x, 2e-3), many.eval(z, x, 2e-3)));
    CHECK(d1 <= 0.1 * 1e-6);
    CHECK(d2 / d1 == doctest::Approx(4.0).epsilon(0.1));
}

TEST_CASE("make_residual rejects bad pairings") {
    CHECK_THROWS_AS(make_residual("vt1", *find_problem("power2")), std::invalid_argument);
    CHECK_THROWS_AS(make_residual("rk4", *find_problem("power2")), std::invalid_argument);
    CHECK_NOTHROW(make_residual("radau5", *find_problem("cubic-spring")));
}
