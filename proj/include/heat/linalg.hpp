#pragma once

// Dense row-major linear algebra used by the scorers and the residual net.
// Everything is 64-bit; sizes stay small enough (d <= 2048) that O(d^3)
// Cholesky without BLAS is fine.

#include <cstddef>
#include <span>
#include <vector>

#include "heat/error.hpp"

namespace heat {

using Vector = std::vector<double>;

class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    // Rejects non-finite entries and size mismatches.
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Matrix identity(std::size_t n);
    static Matrix from_rows(const std::vector<Vector>& rows);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept {
        return {data_.data() + r * cols_, cols_};
    }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    Matrix transpose() const;
    double trace() const;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
// a * x
Vector matvec(const Matrix& a, std::span<const double> x);
// a^T * x
Vector matvec_transposed(const Matrix& a, std::span<const double> x);

double dot(std::span<const double> a, std::span<const double> b);
double squared_norm(std::span<const double> a);
Vector subtract(std::span<const double> a, std::span<const double> b);

// Lower-triangular L with L * L^T equal to the factored matrix (plus whatever
// jitter was needed to make it positive definite).
class CholeskyFactor {
public:
    CholeskyFactor() = default;

    std::size_t dim() const noexcept { return lower_.rows(); }
    const Matrix& lower() const noexcept { return lower_; }
    // Diagonal jitter that was finally added before the factorization succeeded.
    double jitter() const noexcept { return jitter_; }

    // Solves L y = b.
    Vector solve_lower(std::span<const double> b) const;
    // Solves L^T x = y.
    Vector solve_upper(std::span<const double> y) const;
    // Sigma^{-1} b via the two triangular solves.
    Vector solve(std::span<const double> b) const;
    // L * L^T
    Matrix reconstruct() const;

    // Takes an already-triangular factor (validated: square, zeros above the
    // diagonal, strictly positive diagonal).
    static CholeskyFactor from_lower(Matrix lower, double jitter = 0.0);

private:
    Matrix lower_;
    double jitter_ = 0.0;
};

// Factors a + jitter*I. When the factorization breaks down the jitter is
// escalated x10 (starting from 1e-10 * trace/dim when jitter is 0) up to
// 1e-2 * trace/dim before giving up with NotPositiveDefinite.
CholeskyFactor cholesky(const Matrix& a, double jitter = 0.0);

// (x - mu)^T Sigma^{-1} (x - mu)
double mahalanobis_sq(const CholeskyFactor& factor, std::span<const double> x,
                      std::span<const double> mu);

double logsumexp(std::span<const double> values);

// softmax(values) computed with the same max shift as logsumexp.
Vector softmax(std::span<const double> values);

bool all_finite(std::span<const double> values) noexcept;

}  // namespace heat
