#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "critstep/linalg.hpp"
#include "critstep/problems.hpp"

namespace critstep {

struct ButcherTableau {
    std::string name;
    std::size_t stages = 0;
    DenseMatrix a;
    Vector b;
    Vector c;
    int order = 0;
};

/// be, tr, trb2, radau3, radau5, gl4, gl6 in that order.
const std::vector<ButcherTableau>& tableau_registry();
/// Entry of tableau_registry(), or nullptr for an unknown name.
const ButcherTableau* find_tableau(std::string_view name);

/// Every method id the tools accept: the tableau names followed by vt1.
std::vector<std::string> method_ids();

/// The update equation G(z; x, h) = 0 of one implicit step, in the unknowns
/// z the method naturally solves for, plus the map z -> advanced state y.
struct ResidualSystem {
    using Eval = std::function<Vector(std::span<const double>, std::span<const double>, double)>;
    using Jac = std::function<DenseMatrix(std::span<const double>, std::span<const double>, double)>;

    std::size_t unknown_dim = 0;
    std::size_t state_dim = 0;
    Eval eval;
    Jac d_z;
    Eval d_h;
    Eval reconstruct;
    /// Exact root at h = 0; also maps a predicted state into unknown space.
    std::function<Vector(std::span<const double>)> initial_z;
    std::string label;
};

/// Stage-state formulation: z = (Y_1, ..., Y_s) with
/// G_i = Y_i - x - h sum_j a_ij f(Y_j), y = x + h sum_j b_j f(Y_j).
ResidualSystem irk_residual(const ButcherTableau& tab, const OdeSystem& sys);

/// First-order Variational Taylor step, unknowns z = (y, y').
///
/// The discrete Lagrangian is L_h(q, v) = int_{-h/2}^{h/2} L(q + t v, v) dt.
/// Eliminating the multipliers of the endpoint and continuity constraints
/// leaves
///   y - x - (h/2)(x' + y') = 0
///   P(y, y') - P(x, x') - (h/2)(F(x, x') + F(y, y')) = 0
/// with F = (1/h) dL_h/dq and P = (1/h) dL_h/dv, evaluated by Gauss-Legendre
/// quadrature over the normalized interval so h = 0 is regular.
/// `quadrature_nodes` = 1 (midpoint) is the scheme the reference data uses.
ResidualSystem vt1_residual(const LagrangianSystem& lag, std::size_t quadrature_nodes = 1);

/// Residual for a method id from method_ids() applied to a problem. Throws
/// std::invalid_argument for unknown ids and for vt1 on a problem without a
/// Lagrangian.
ResidualSystem make_residual(std::string_view method, const Problem& problem);

/// Nodes on [-1/2, 1/2] and weights summing to one.
struct QuadratureRule {
    Vector nodes;
    Vector weights;
};
QuadratureRule gauss_legendre(std::size_t n);

}  // namespace critstep
