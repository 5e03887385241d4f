#pragma once

// Finite-difference oracles and small numeric helpers shared by the tests.

#include <cmath>
#include <functional>
#include <random>

#include "critstep/linalg.hpp"

namespace critstep::test {

inline std::mt19937_64& rng() {
    static std::mt19937_64 gen(20240611u);
    return gen;
}

inline Vector random_vector(std::size_t n, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    Vector v(n);
    for (double& x : v) x = u(rng());
    return v;
}

inline double random_real(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng());
}

/// Central differences of f at v, one column per coordinate.
inline DenseMatrix fd_jacobian(const std::function<Vector(std::span<const double>)>& f, std::span<const double> v,
                               double step) {
    const Vector f0 = f(v);
    DenseMatrix j(f0.size(), v.size());
    Vector p(v.begin(), v.end());
    for (std::size_t k = 0; k < v.size(); ++k) {
        const double hk = step * std::max(1.0, std::abs(v[k]));
        p[k] = v[k] + hk;
        const Vector fp = f(p);
        p[k] = v[k] - hk;
        const Vector fm = f(p);
        p[k] = v[k];
        for (std::size_t i = 0; i < f0.size(); ++i) j(i, k) = (fp[i] - fm[i]) / (2 * hk);
    }
    return j;
}

inline double fd_scalar(const std::function<double(double)>& f, double v, double step) {
    const double hk = step * std::max(1.0, std::abs(v));
    return (f(v + hk) - f(v - hk)) / (2 * hk);
}

inline double frobenius_diff(const DenseMatrix& a, const DenseMatrix& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.data().size(); ++i) s += (a.data()[i] - b.data()[i]) * (a.data()[i] - b.data()[i]);
    return std::sqrt(s);
}

inline double frobenius(const DenseMatrix& a) { return norm2(a.data()); }

inline Vector sub(std::span<const double> a, std::span<const double> b) {
    Vector d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    return d;
}

/// Lower and upper roots of h y^2 - y + x = 0.
inline double power2_lower(double x, double h) { return 2 * x / (1 + std::sqrt(1 - 4 * h * x)); }
inline double power2_upper(double x, double h) { return (1 + std::sqrt(1 - 4 * h * x)) / (2 * h); }

}  // namespace critstep::test
