#include "critstep/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace critstep {

DenseMatrix DenseMatrix::identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

DenseMatrix DenseMatrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    DenseMatrix m(r, c);
    std::size_t i = 0;
    for (const auto& row : rows) {
        if (row.size() != c) throw std::invalid_argument("DenseMatrix::from_rows: ragged rows");
        std::size_t j = 0;
        for (double v : row) m(i, j++) = v;
        ++i;
    }
    return m;
}

Vector DenseMatrix::multiply(std::span<const double> x) const {
    if (x.size() != cols_) throw std::invalid_argument("DenseMatrix::multiply: size mismatch");
    Vector y(rows_, 0.0);
    for (std::size_t i = 0; i < rows_; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < cols_; ++j) acc += (*this)(i, j) * x[j];
        y[i] = acc;
    }
    return y;
}

bool DenseMatrix::all_finite() const { return critstep::all_finite(data_); }

double DenseMatrix::max_abs() const { return critstep::max_abs(data_); }

LuFactorization::LuFactorization(DenseMatrix a) : lu_(std::move(a)), perm_(lu_.rows()) {
    if (!lu_.square()) throw std::invalid_argument("LuFactorization: matrix not square");
    if (!lu_.all_finite()) throw SingularMatrix("LuFactorization: non-finite entries");
    const std::size_t n = lu_.rows();
    std::iota(perm_.begin(), perm_.end(), std::size_t{0});

    const double scale = lu_.max_abs();
    const double tiny = kPivotRelTol * scale;
    if (scale == 0.0) throw SingularMatrix("LuFactorization: zero matrix");

    for (std::size_t k = 0; k < n; ++k) {
        std::size_t p = k;
        double best = std::abs(lu_(k, k));
        for (std::size_t i = k + 1; i < n; ++i) {
            if (std::abs(lu_(i, k)) > best) {
                best = std::abs(lu_(i, k));
                p = i;
            }
        }
        if (best <= tiny) throw SingularMatrix("LuFactorization: pivot below threshold at column " + std::to_string(k));
        if (p != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(lu_(k, j), lu_(p, j));
            std::swap(perm_[k], perm_[p]);
        }
        const double piv = lu_(k, k);
        for (std::size_t i = k + 1; i < n; ++i) {
            const double l = lu_(i, k) / piv;
            lu_(i, k) = l;
            if (l == 0.0) continue;
            for (std::size_t j = k + 1; j < n; ++j) lu_(i, j) -= l * lu_(k, j);
        }
    }
}

Vector LuFactorization::solve(std::span<const double> b) const {
    const std::size_t n = lu_.rows();
    if (b.size() != n) throw std::invalid_argument("LuFactorization::solve: size mismatch");
    Vector x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = b[perm_[i]];
    for (std::size_t i = 0; i < n; ++i) {
        double acc = x[i];
        for (std::size_t j = 0; j < i; ++j) acc -= lu_(i, j) * x[j];
        x[i] = acc;
    }
    for (std::size_t ii = n; ii-- > 0;) {
        double acc = x[ii];
        for (std::size_t j = ii + 1; j < n; ++j) acc -= lu_(ii, j) * x[j];
        x[ii] = acc / lu_(ii, ii);
    }
    return x;
}

Vector solve_dense(const DenseMatrix& a, std::span<const double> b) {
    if (!a.square() || b.size() != a.rows()) throw std::invalid_argument("solve_dense: shape mismatch");
    return LuFactorization(a).solve(b);
}

DenseMatrix bordered_matrix(const DenseMatrix& jz, std::span<const double> jh,
                            std::span<const double> t_row) {
    const std::size_t n = jz.rows();
    if (!jz.square() || jh.size() != n || t_row.size() != n + 1)
        throw std::invalid_argument("bordered_matrix: shape mismatch");
    DenseMatrix m(n + 1, n + 1);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) m(i, j) = jz(i, j);
        m(i, n) = jh[i];
    }
    for (std::size_t j = 0; j <= n; ++j) m(n, j) = t_row[j];
    return m;
}

std::pair<Vector, Vector> solve_bordered(const DenseMatrix& jz, std::span<const double> jh,
                                         std::span<const double> t_row,
                                         std::span<const double> rhs1,
                                         std::span<const double> rhs2) {
    if (max_abs(t_row) == 0.0) throw std::invalid_argument("solve_bordered: zero bordering row");
    const LuFactorization lu(bordered_matrix(jz, jh, t_row));
    return {lu.solve(rhs1), lu.solve(rhs2)};
}

double norm2(std::span<const double> v) {
    // scaled to avoid overflow on the divergent iterates Newton can produce
    const double m = max_abs(v);
    if (m == 0.0 || !std::isfinite(m)) return m;
    double acc = 0.0;
    for (double x : v) acc += (x / m) * (x / m);
    return m * std::sqrt(acc);
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("dot: size mismatch");
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

double max_abs(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) {
        if (std::isnan(x)) return x;
        m = std::max(m, std::abs(x));
    }
    return m;
}

bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace critstep
