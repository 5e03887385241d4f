#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace critstep {

using Vector = std::vector<double>;

/// Dense row-major matrix for the small systems (n <= ~12) that appear in
/// one-step update equations and their bordered extensions.
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static DenseMatrix identity(std::size_t n);
    static DenseMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool square() const noexcept { return rows_ == cols_; }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<const double> row(std::size_t i) const {
        return {data_.data() + i * cols_, cols_};
    }
    std::span<const double> data() const noexcept { return data_; }

    Vector multiply(std::span<const double> x) const;
    bool all_finite() const;
    double max_abs() const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

class SingularMatrix : public std::runtime_error {
public:
    explicit SingularMatrix(const std::string& what) : std::runtime_error(what) {}
};

/// Partial-pivoted LU factorization. Factor once, solve for any number of
/// right-hand sides.
class LuFactorization {
public:
    /// Throws SingularMatrix when a pivot falls below 1e-14 times the
    /// largest entry magnitude of the input.
    explicit LuFactorization(DenseMatrix a);

    std::size_t size() const noexcept { return lu_.rows(); }
    Vector solve(std::span<const double> b) const;

private:
    DenseMatrix lu_;
    std::vector<std::size_t> perm_;
};

inline constexpr double kPivotRelTol = 1e-14;

Vector solve_dense(const DenseMatrix& a, std::span<const double> b);

/// Assembles [jz jh; t_row] and solves it for two right-hand sides with a
/// single factorization. Used for tangents (rhs (0,..,0,1)) and for the
/// Gauss-Newton correction (rhs (-G, 0)) at the same iterate.
std::pair<Vector, Vector> solve_bordered(const DenseMatrix& jz, std::span<const double> jh,
                                         std::span<const double> t_row,
                                         std::span<const double> rhs1,
                                         std::span<const double> rhs2);

DenseMatrix bordered_matrix(const DenseMatrix& jz, std::span<const double> jh,
                            std::span<const double> t_row);

double norm2(std::span<const double> v);
double dot(std::span<const double> a, std::span<const double> b);
double max_abs(std::span<const double> v);
bool all_finite(std::span<const double> v);

}  // namespace critstep
