#include "heat/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace heat {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {
    require(std::isfinite(fill), ErrorCode::NonFiniteValue, "matrix fill value is not finite");
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    require(data_.size() == rows * cols, ErrorCode::DimensionMismatch,
            "matrix data length " + std::to_string(data_.size()) + " != " +
                std::to_string(rows) + "x" + std::to_string(cols));
    require(all_finite(data_), ErrorCode::NonFiniteValue, "matrix contains NaN/Inf");
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::from_rows(const std::vector<Vector>& rows) {
    if (rows.empty()) return {};
    const std::size_t cols = rows.front().size();
    std::vector<double> data;
    data.reserve(rows.size() * cols);
    for (const auto& r : rows) {
        require(r.size() == cols, ErrorCode::DimensionMismatch, "ragged rows");
        data.insert(data.end(), r.begin(), r.end());
    }
    return Matrix(rows.size(), cols, std::move(data));
}

Matrix Matrix::transpose() const {
    Matrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
}

double Matrix::trace() const {
    double s = 0.0;
    for (std::size_t i = 0; i < std::min(rows_, cols_); ++i) s += (*this)(i, i);
    return s;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    require(a.cols() == b.rows(), ErrorCode::DimensionMismatch, "matmul inner dimensions");
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto orow = out.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            auto brow = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aik * brow[j];
        }
    }
    return out;
}

Vector matvec(const Matrix& a, std::span<const double> x) {
    require(a.cols() == x.size(), ErrorCode::DimensionMismatch, "matvec");
    Vector y(a.rows());
    for (std::size_t r = 0; r < a.rows(); ++r) y[r] = dot(a.row(r), x);
    return y;
}

Vector matvec_transposed(const Matrix& a, std::span<const double> x) {
    require(a.rows() == x.size(), ErrorCode::DimensionMismatch, "matvec_transposed");
    Vector y(a.cols(), 0.0);
    for (std::size_t r = 0; r < a.rows(); ++r) {
        const double xr = x[r];
        auto arow = a.row(r);
        for (std::size_t c = 0; c < a.cols(); ++c) y[c] += arow[c] * xr;
    }
    return y;
}

double dot(std::span<const double> a, std::span<const double> b) {
    require(a.size() == b.size(), ErrorCode::DimensionMismatch, "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double squared_norm(std::span<const double> a) { return dot(a, a); }

Vector subtract(std::span<const double> a, std::span<const double> b) {
    require(a.size() == b.size(), ErrorCode::DimensionMismatch, "subtract");
    Vector out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
    return out;
}

Vector CholeskyFactor::solve_lower(std::span<const double> b) const {
    const std::size_t n = dim();
    require(b.size() == n, ErrorCode::DimensionMismatch, "solve_lower");
    Vector y(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = b[i];
        auto lrow = lower_.row(i);
        for (std::size_t k = 0; k < i; ++k) s -= lrow[k] * y[k];
        y[i] = s / lrow[i];
    }
    return y;
}

Vector CholeskyFactor::solve_upper(std::span<const double> y) const {
    const std::size_t n = dim();
    require(y.size() == n, ErrorCode::DimensionMismatch, "solve_upper");
    Vector x(y.begin(), y.end());
    for (std::size_t ii = n; ii-- > 0;) {
        x[ii] /= lower_(ii, ii);
        const double xi = x[ii];
        auto lrow = lower_.row(ii);
        for (std::size_t k = 0; k < ii; ++k) x[k] -= lrow[k] * xi;
    }
    return x;
}

Vector CholeskyFactor::solve(std::span<const double> b) const { return solve_upper(solve_lower(b)); }

Matrix CholeskyFactor::reconstruct() const {
    const std::size_t n = dim();
    Matrix a(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j <= i; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k <= j; ++k) s += lower_(i, k) * lower_(j, k);
            a(i, j) = s;
            a(j, i) = s;
        }
    return a;
}

CholeskyFactor CholeskyFactor::from_lower(Matrix lower, double jitter) {
    require(lower.rows() == lower.cols(), ErrorCode::DimensionMismatch, "factor must be square");
    for (std::size_t i = 0; i < lower.rows(); ++i) {
        require(lower(i, i) > 0.0, ErrorCode::NotPositiveDefinite, "non-positive diagonal in factor");
        for (std::size_t j = i + 1; j < lower.cols(); ++j)
            require(lower(i, j) == 0.0, ErrorCode::ShapeMismatch, "factor is not lower-triangular");
    }
    CholeskyFactor f;
    f.lower_ = std::move(lower);
    f.jitter_ = jitter;
    return f;
}

namespace {

std::optional<Matrix> try_factor(const Matrix& a, double jitter) {
    const std::size_t n = a.rows();
    Matrix l(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double diag = a(j, j) + jitter;
        auto lj = l.row(j);
        for (std::size_t k = 0; k < j; ++k) diag -= lj[k] * lj[k];
        if (!(diag > 0.0) || !std::isfinite(diag)) return std::nullopt;
        const double ljj = std::sqrt(diag);
        lj[j] = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            auto li = l.row(i);
            double s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= li[k] * lj[k];
            li[j] = s / ljj;
        }
    }
    return l;
}

}  // namespace

CholeskyFactor cholesky(const Matrix& a, double jitter) {
    require(a.rows() == a.cols(), ErrorCode::DimensionMismatch, "cholesky needs a square matrix");
    require(a.rows() > 0, ErrorCode::DimensionMismatch, "cholesky of an empty matrix");
    require(jitter >= 0.0 && std::isfinite(jitter), ErrorCode::InvalidSpec, "jitter must be >= 0");
    const std::size_t n = a.rows();

    double max_abs = 0.0;
    for (double v : a.data()) max_abs = std::max(max_abs, std::abs(v));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            require(std::abs(a(i, j) - a(j, i)) <= 1e-9 * max_abs, ErrorCode::NotPositiveDefinite,
                    "matrix is not symmetric");

    const double scale = a.trace() / static_cast<double>(n);
    require(scale > 0.0 && std::isfinite(scale), ErrorCode::NotPositiveDefinite,
            "matrix has non-positive trace");
    const double cap = 1e-2 * scale;

    double current = jitter;
    for (;;) {
        if (auto l = try_factor(a, current)) return CholeskyFactor::from_lower(std::move(*l), current);
        if (current >= cap) break;
        current = current > 0.0 ? std::min(current * 10.0, cap) : std::min(1e-10 * scale, cap);
    }
    fail(ErrorCode::NotPositiveDefinite,
         "factorization failed even with jitter " + std::to_string(current));
}

double mahalanobis_sq(const CholeskyFactor& factor, std::span<const double> x,
                      std::span<const double> mu) {
    require(x.size() == factor.dim() && mu.size() == factor.dim(), ErrorCode::DimensionMismatch,
            "mahalanobis_sq");
    const Vector y = factor.solve_lower(subtract(x, mu));
    return squared_norm(y);
}

double logsumexp(std::span<const double> values) {
    require(!values.empty(), ErrorCode::EmptyInput, "logsumexp of an empty vector");
    const double m = *std::max_element(values.begin(), values.end());
    if (std::isinf(m)) return m;
    double s = 0.0;
    for (double v : values) s += std::exp(v - m);
    return m + std::log(s);
}

Vector softmax(std::span<const double> values) {
    require(!values.empty(), ErrorCode::EmptyInput, "softmax of an empty vector");
    const double m = *std::max_element(values.begin(), values.end());
    Vector out(values.size());
    double s = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        out[i] = std::exp(values[i] - m);
        s += out[i];
    }
    for (double& v : out) v /= s;
    return out;
}

bool all_finite(std::span<const double> values) noexcept {
    return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace heat
