#include "critstep/steppers.hpp"

#include <algorithm>
#include <memory>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace critstep {

namespace {

ButcherTableau make_tableau(std::string name, int order, std::initializer_list<std::initializer_list<double>> a,
                            Vector b) {
    ButcherTableau t;
    t.name = std::move(name);
    t.order = order;
    t.a = DenseMatrix::from_rows(a);
    t.stages = t.a.rows();
    t.b = std::move(b);
    t.c.assign(t.stages, 0.0);
    for (std::size_t i = 0; i < t.stages; ++i)
        for (std::size_t j = 0; j < t.stages; ++j) t.c[i] += t.a(i, j);
    return t;
}

std::vector<ButcherTableau> build_registry() {
    const double r6 = std::sqrt(6.0);
    const double r3 = std::sqrt(3.0);
    const double r15 = std::sqrt(15.0);
    const double gamma = 2.0 - std::numbers::sqrt2;
    const double bt = 1.0 / (2.0 * (2.0 - gamma));
    const double bl = (1.0 - gamma) / (2.0 - gamma);

    std::vector<ButcherTableau> reg;
    reg.push_back(make_tableau("be", 1, {{1.0}}, {1.0}));
    reg.push_back(make_tableau("tr", 2, {{0.0, 0.0}, {0.5, 0.5}}, {0.5, 0.5}));
    reg.push_back(make_tableau("trb2", 2,
                               {{0.0, 0.0, 0.0}, {gamma / 2.0, gamma / 2.0, 0.0}, {bt, bt, bl}},
                               {bt, bt, bl}));
    reg.push_back(make_tableau("radau3", 3, {{5.0 / 12.0, -1.0 / 12.0}, {0.75, 0.25}}, {0.75, 0.25}));
    reg.push_back(make_tableau(
        "radau5", 5,
        {{11.0 / 45.0 - 7.0 * r6 / 360.0, 37.0 / 225.0 - 169.0 * r6 / 1800.0, -2.0 / 225.0 + r6 / 75.0},
         {37.0 / 225.0 + 169.0 * r6 / 1800.0, 11.0 / 45.0 + 7.0 * r6 / 360.0, -2.0 / 225.0 - r6 / 75.0},
         {4.0 / 9.0 - r6 / 36.0, 4.0 / 9.0 + r6 / 36.0, 1.0 / 9.0}},
        {4.0 / 9.0 - r6 / 36.0, 4.0 / 9.0 + r6 / 36.0, 1.0 / 9.0}));
    reg.push_back(make_tableau("gl4", 4, {{0.25, 0.25 - r3 / 6.0}, {0.25 + r3 / 6.0, 0.25}}, {0.5, 0.5}));
    reg.push_back(make_tableau("gl6", 6,
                               {{5.0 / 36.0, 2.0 / 9.0 - r15 / 15.0, 5.0 / 36.0 - r15 / 30.0},
                                {5.0 / 36.0 + r15 / 24.0, 2.0 / 9.0, 5.0 / 36.0 - r15 / 24.0},
                                {5.0 / 36.0 + r15 / 30.0, 2.0 / 9.0 + r15 / 15.0, 5.0 / 36.0}},
                               {5.0 / 18.0, 4.0 / 9.0, 5.0 / 18.0}));
    return reg;
}

}  // namespace

const std::vector<ButcherTableau>& tableau_registry() {
    static const std::vector<ButcherTableau> reg = build_registry();
    return reg;
}

const ButcherTableau* find_tableau(std::string_view name) {
    for (const auto& t : tableau_registry())
        if (t.name == name) return &t;
    return nullptr;
}

std::vector<std::string> method_ids() {
    std::vector<std::string> ids;
    for (const auto& t : tableau_registry()) ids.push_back(t.name);
    ids.emplace_back("vt1");
    return ids;
}

ResidualSystem irk_residual(const ButcherTableau& tab, const OdeSystem& sys) {
    const std::size_t s = tab.stages;
    const std::size_t m = sys.dim;

    auto stage_rhs = [s, m, sys](std::span<const double> z) {
        std::vector<Vector> f(s);
        for (std::size_t j = 0; j < s; ++j) f[j] = sys.rhs(z.subspan(j * m, m));
        return f;
    };

    ResidualSystem rs;
    rs.unknown_dim = s * m;
    rs.state_dim = m;
    rs.label = tab.name + "/" + sys.label;

    rs.eval = [tab, s, m, stage_rhs](std::span<const double> z, std::span<const double> x, double h) {
        const auto f = stage_rhs(z);
        Vector g(s * m);
        for (std::size_t i = 0; i < s; ++i)
            for (std::size_t k = 0; k < m; ++k) {
                double acc = 0.0;
                for (std::size_t j = 0; j < s; ++j) acc += tab.a(i, j) * f[j][k];
                g[i * m + k] = z[i * m + k] - x[k] - h * acc;
            }
        return g;
    };
    rs.d_z = [tab, s, m, sys](std::span<const double> z, std::span<const double>, double h) {
        DenseMatrix jz = DenseMatrix::identity(s * m);
        for (std::size_t j = 0; j < s; ++j) {
            const DenseMatrix fj = sys.jacobian(z.subspan(j * m, m));
            for (std::size_t i = 0; i < s; ++i) {
                const double aij = tab.a(i, j);
                if (aij == 0.0) continue;
                for (std::size_t r = 0; r < m; ++r)
                    for (std::size_t c = 0; c < m; ++c) jz(i * m + r, j * m + c) -= h * aij * fj(r, c);
            }
        }
        return jz;
    };
    rs.d_h = [tab, s, m, stage_rhs](std::span<const double> z, std::span<const double>, double) {
        const auto f = stage_rhs(z);
        Vector gh(s * m, 0.0);
        for (std::size_t i = 0; i < s; ++i)
            for (std::size_t j = 0; j < s; ++j)
                for (std::size_t k = 0; k < m; ++k) gh[i * m + k] -= tab.a(i, j) * f[j][k];
        return gh;
    };
    rs.reconstruct = [tab, s, m, stage_rhs](std::span<const double> z, std::span<const double> x, double h) {
        const auto f = stage_rhs(z);
        Vector y(x.begin(), x.end());
        for (std::size_t j = 0; j < s; ++j)
            for (std::size_t k = 0; k < m; ++k) y[k] += h * tab.b[j] * f[j][k];
        return y;
    };
    rs.initial_z = [s, m](std::span<const double> x) {
        Vector z(s * m);
        for (std::size_t i = 0; i < s; ++i) std::copy(x.begin(), x.end(), z.begin() + i * m);
        return z;
    };
    return rs;
}

ResidualSystem make_residual(std::string_view method, const Problem& problem) {
    if (method == "vt1") {
        if (!problem.lagrangian)
            throw std::invalid_argument("vt1 needs a Lagrangian problem; " + problem.name + " has none");
        return vt1_residual(*problem.lagrangian);
    }
    if (auto tab = find_tableau(method)) return irk_residual(*tab, problem.ode);
    throw std::invalid_argument("unknown method '" + std::string(method) + "'");
}

QuadratureRule gauss_legendre(std::size_t n) {
    if (n == 0) throw std::invalid_argument("gauss_legendre: need at least one node");
    QuadratureRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    // Newton on P_n from the Chebyshev-like initial guesses, then map [-1,1] -> [-1/2,1/2].
    for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (static_cast<double>(n) + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (std::size_t k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / static_cast<double>(k);
                p0 = p1;
                p1 = p2;
            }
            dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        // recompute derivative at the converged node
        double p0 = 1.0, p1 = x;
        for (std::size_t k = 2; k <= n; ++k) {
            const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / static_cast<double>(k);
            p0 = p1;
            p1 = p2;
        }
        dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.nodes[i] = -0.5 * x;
        rule.nodes[n - 1 - i] = 0.5 * x;
        rule.weights[i] = 0.5 * w;
        rule.weights[n - 1 - i] = 0.5 * w;
    }
    if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
    return rule;
}

namespace {

// Second-derivative blocks of L at (q, v); entry (i, j) = d(grad_i)/d(arg_j).
struct HessianBlocks {
    DenseMatrix qq, qv, vq, vv;
};

constexpr double kHessianStep = 1e-7;

HessianBlocks fd_hessian(const LagrangianSystem& lag, std::span<const double> q, std::span<const double> v) {
    const std::size_t n = lag.config_dim;
    HessianBlocks hb{DenseMatrix(n, n), DenseMatrix(n, n), DenseMatrix(n, n), DenseMatrix(n, n)};
    Vector qp(q.begin(), q.end()), qm = qp, vp(v.begin(), v.end()), vm = vp;
    for (std::size_t j = 0; j < n; ++j) {
        const double dq = kHessianStep * std::max(1.0, std::abs(q[j]));
        qp[j] = q[j] + dq;
        qm[j] = q[j] - dq;
        const Vector gqp = lag.grad_position(qp, v), gqm = lag.grad_position(qm, v);
        const Vector gvp = lag.grad_velocity(qp, v), gvm = lag.grad_velocity(qm, v);
        qp[j] = qm[j] = q[j];

        const double dv = kHessianStep * std::max(1.0, std::abs(v[j]));
        vp[j] = v[j] + dv;
        vm[j] = v[j] - dv;
        const Vector hqp = lag.grad_position(q, vp), hqm = lag.grad_position(q, vm);
        const Vector hvp = lag.grad_velocity(q, vp), hvm = lag.grad_velocity(q, vm);
        vp[j] = vm[j] = v[j];

        for (std::size_t i = 0; i < n; ++i) {
            hb.qq(i, j) = (gqp[i] - gqm[i]) / (2.0 * dq);
            hb.vq(i, j) = (gvp[i] - gvm[i]) / (2.0 * dq);
            hb.qv(i, j) = (hqp[i] - hqm[i]) / (2.0 * dv);
            hb.vv(i, j) = (hvp[i] - hvm[i]) / (2.0 * dv);
        }
    }
    return hb;
}

// Averaged discrete-Lagrangian derivatives F = (1/h) dL_h/dq, P = (1/h) dL_h/dv.
struct SegmentForces {
    Vector force;
    Vector momentum;
};

// Their derivatives in the state variables and in h.
struct SegmentLinearization {
    DenseMatrix force_q, force_v, mom_q, mom_v;
    Vector force_h, mom_h;
};

class Vt1Kernel {
public:
    Vt1Kernel(LagrangianSystem lag, std::size_t nodes) : lag_(std::move(lag)), rule_(gauss_legendre(nodes)) {}

    std::size_t n() const { return lag_.config_dim; }

    SegmentForces forces(std::span<const double> q, std::span<const double> v, double h) const {
        const std::size_t n = this->n();
        SegmentForces out{Vector(n, 0.0), Vector(n, 0.0)};
        Vector p(n);
        for (std::size_t k = 0; k < rule_.nodes.size(); ++k) {
            const double ht = h * rule_.nodes[k];
            const double w = rule_.weights[k];
            for (std::size_t i = 0; i < n; ++i) p[i] = q[i] + ht * v[i];
            const Vector gq = lag_.grad_position(p, v);
            const Vector gv = lag_.grad_velocity(p, v);
            for (std::size_t i = 0; i < n; ++i) {
                out.force[i] += w * gq[i];
                out.momentum[i] += w * (ht * gq[i] + gv[i]);
            }
        }
        return out;
    }

    SegmentLinearization linearize(std::span<const double> q, std::span<const double> v, double h) const {
        const std::size_t n = this->n();
        SegmentLinearization out{DenseMatrix(n, n), DenseMatrix(n, n), DenseMatrix(n, n), DenseMatrix(n, n),
                                 Vector(n, 0.0), Vector(n, 0.0)};
        Vector p(n);
        for (std::size_t k = 0; k < rule_.nodes.size(); ++k) {
            const double tau = rule_.nodes[k];
            const double ht = h * tau;
            const double w = rule_.weights[k];
            for (std::size_t i = 0; i < n; ++i) p[i] = q[i] + ht * v[i];
            const Vector gq = lag_.grad_position(p, v);
            const HessianBlocks hb = fd_hessian(lag_, p, v);
            const Vector qq_v = hb.qq.multiply(v);
            const Vector vq_v = hb.vq.multiply(v);
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    const double qq = hb.qq(i, j);
                    out.force_q(i, j) += w * qq;
                    out.force_v(i, j) += w * (ht * qq + hb.qv(i, j));
                    out.mom_q(i, j) += w * (ht * qq + hb.vq(i, j));
                    out.mom_v(i, j) += w * (ht * (ht * qq + hb.qv(i, j)) + ht * hb.vq(i, j) + hb.vv(i, j));
                }
                out.force_h[i] += w * tau * qq_v[i];
                out.mom_h[i] += w * (tau * gq[i] + ht * tau * qq_v[i] + tau * vq_v[i]);
            }
        }
        return out;
    }

private:
    LagrangianSystem lag_;
    QuadratureRule rule_;
};

}  // namespace

ResidualSystem vt1_residual(const LagrangianSystem& lag, std::size_t quadrature_nodes) {
    const auto kernel = std::make_shared<const Vt1Kernel>(lag, quadrature_nodes);
    const std::size_t n = lag.config_dim;

    ResidualSystem rs;
    rs.unknown_dim = 2 * n;
    rs.state_dim = 2 * n;
    rs.label = "vt1/" + lag.label;

    rs.eval = [kernel, n](std::span<const double> z, std::span<const double> x, double h) {
        const auto y = z.first(n), yd = z.subspan(n, n);
        const auto xq = x.first(n), xd = x.subspan(n, n);
        const SegmentForces fx = kernel->forces(xq, xd, h);
        const SegmentForces fy = kernel->forces(y, yd, h);
        Vector g(2 * n);
        for (std::size_t i = 0; i < n; ++i) {
            g[i] = y[i] - xq[i] - 0.5 * h * (xd[i] + yd[i]);
            g[n + i] = fy.momentum[i] - fx.momentum[i] - 0.5 * h * (fx.force[i] + fy.force[i]);
        }
        return g;
    };
    rs.d_z = [kernel, n](std::span<const double> z, std::span<const double>, double h) {
        const SegmentLinearization ly = kernel->linearize(z.first(n), z.subspan(n, n), h);
        DenseMatrix jz(2 * n, 2 * n);
        for (std::size_t i = 0; i < n; ++i) {
            jz(i, i) = 1.0;
            jz(i, n + i) = -0.5 * h;
            for (std::size_t j = 0; j < n; ++j) {
                jz(n + i, j) = ly.mom_q(i, j) - 0.5 * h * ly.force_q(i, j);
                jz(n + i, n + j) = ly.mom_v(i, j) - 0.5 * h * ly.force_v(i, j);
            }
        }
        return jz;
    };
    rs.d_h = [kernel, n](std::span<const double> z, std::span<const double> x, double h) {
        const auto y = z.first(n), yd = z.subspan(n, n);
        const auto xq = x.first(n), xd = x.subspan(n, n);
        const SegmentForces fx = kernel->forces(xq, xd, h);
        const SegmentForces fy = kernel->forces(y, yd, h);
        const SegmentLinearization lx = kernel->linearize(xq, xd, h);
        const SegmentLinearization ly = kernel->linearize(y, yd, h);
        Vector gh(2 * n);
        for (std::size_t i = 0; i < n; ++i) {
            gh[i] = -0.5 * (xd[i] + yd[i]);
            gh[n + i] = ly.mom_h[i] - lx.mom_h[i] - 0.5 * (fx.force[i] + fy.force[i]) -
                        0.5 * h * (lx.force_h[i] + ly.force_h[i]);
        }
        return gh;
    };
    rs.reconstruct = [](std::span<const double> z, std::span<const double>, double) {
        return Vector(z.begin(), z.end());
    };
    rs.initial_z = [](std::span<const double> x) { return Vector(x.begin(), x.end()); };
    return rs;
}

}  // namespace critstep
