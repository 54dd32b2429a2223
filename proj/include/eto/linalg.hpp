#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "eto/errors.hpp"

namespace eto {

using Vec = std::vector<double>;

inline double dot(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) throw DimensionMismatch("dot: sizes differ");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

inline Vec sub(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) throw DimensionMismatch("sub: sizes differ");
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
    return r;
}

inline Vec add(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) throw DimensionMismatch("add: sizes differ");
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
    return r;
}

inline Vec scale(const Vec& a, double c) {
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = c * a[i];
    return r;
}

inline double distance(const Vec& a, const Vec& b) { return norm2(sub(a, b)); }

/// Dense row-major square-friendly matrix, sized for observable covariances
/// and mapping matrices (d <= 50), not for large-scale linear algebra.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    bool operator==(const Matrix&) const = default;

    Matrix transpose() const {
        Matrix t(cols_, rows_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
        return t;
    }

    Matrix operator*(const Matrix& rhs) const {
        if (cols_ != rhs.rows_) throw DimensionMismatch("matmul: inner sizes differ");
        Matrix r(rows_, rhs.cols_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t k = 0; k < cols_; ++k) {
                const double aik = (*this)(i, k);
                if (aik == 0.0) continue;
                for (std::size_t j = 0; j < rhs.cols_; ++j) r(i, j) += aik * rhs(k, j);
            }
        return r;
    }

    Matrix operator+(const Matrix& rhs) const {
        if (rows_ != rhs.rows_ || cols_ != rhs.cols_) throw DimensionMismatch("mat add");
        Matrix r = *this;
        for (std::size_t i = 0; i < data_.size(); ++i) r.data_[i] += rhs.data_[i];
        return r;
    }

    Matrix operator-(const Matrix& rhs) const {
        if (rows_ != rhs.rows_ || cols_ != rhs.cols_) throw DimensionMismatch("mat sub");
        Matrix r = *this;
        for (std::size_t i = 0; i < data_.size(); ++i) r.data_[i] -= rhs.data_[i];
        return r;
    }

    Vec operator*(const Vec& v) const {
        if (cols_ != v.size()) throw DimensionMismatch("matvec: sizes differ");
        Vec r(rows_, 0.0);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) r[i] += (*this)(i, j) * v[j];
        return r;
    }

    double trace() const {
        double t = 0.0;
        for (std::size_t i = 0; i < rows_ && i < cols_; ++i) t += (*this)(i, i);
        return t;
    }

    double max_abs() const {
        double m = 0.0;
        for (double x : data_) m = std::max(m, std::fabs(x));
        return m;
    }

    bool is_symmetric(double tol) const {
        if (rows_ != cols_) return false;
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = i + 1; j < cols_; ++j)
                if (std::fabs((*this)(i, j) - (*this)(j, i)) > tol) return false;
        return true;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

struct EigenDecomposition {
    Vec values;       // ascending
    Matrix vectors;   // column i pairs with values[i]
};

/// Cyclic Jacobi eigendecomposition for symmetric matrices. Plenty for the
/// small covariance and mapping matrices this library handles.
inline EigenDecomposition sym_eigen(const Matrix& m, int max_sweeps = 100) {
    if (m.rows() != m.cols()) throw DimensionMismatch("sym_eigen: not square");
    const std::size_t n = m.rows();
    Matrix a = m;
    Matrix v = Matrix::identity(n);

    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (off <= 1e-30 * (1.0 + a.max_abs() * a.max_abs())) break;

        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                if (a(p, q) == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t i = 0; i < n; ++i) {
                    const double aip = a(i, p), aiq = a(i, q);
                    a(i, p) = c * aip - s * aiq;
                    a(i, q) = s * aip + c * aiq;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double api = a(p, i), aqi = a(q, i);
                    a(p, i) = c * api - s * aqi;
                    a(q, i) = s * api + c * aqi;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double vip = v(i, p), viq = v(i, q);
                    v(i, p) = c * vip - s * viq;
                    v(i, q) = s * vip + c * viq;
                }
            }
        }
    }

    EigenDecomposition d;
    d.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) d.values[i] = a(i, i);

    // sort ascending, carrying the eigenvector columns along
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t x, std::size_t y) { return d.values[x] < d.values[y]; });
    Vec sorted(n);
    Matrix vs(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        sorted[i] = d.values[order[i]];
        for (std::size_t r = 0; r < n; ++r) vs(r, i) = v(r, order[i]);
    }
    d.values = std::move(sorted);
    d.vectors = std::move(vs);
    return d;
}

/// Applies f to the eigenvalues of a symmetric matrix.
template <typename F>
Matrix sym_apply(const Matrix& m, F&& f) {
    const auto eig = sym_eigen(m);
    const std::size_t n = m.rows();
    Matrix r(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        const double fk = f(eig.values[k]);
        if (fk == 0.0) continue;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                r(i, j) += fk * eig.vectors(i, k) * eig.vectors(j, k);
    }
    return r;
}

/// Symmetric PSD square root. Eigenvalues in (-1e-8, 0) are clamped to zero;
/// anything more negative is rejected as a genuinely indefinite input.
inline Matrix psd_sqrt(const Matrix& m) {
    const auto eig = sym_eigen(m);
    for (double lambda : eig.values)
        if (lambda < -1e-8)
            throw NonPSDCovariance("eigenvalue " + std::to_string(lambda) + " below -1e-8");
    return sym_apply(m, [](double lambda) { return std::sqrt(std::max(lambda, 0.0)); });
}

/// Pseudo inverse square root on the positive eigenspace.
inline Matrix psd_inv_sqrt(const Matrix& m) {
    const auto eig = sym_eigen(m);
    double lambda_max = 0.0;
    for (double lambda : eig.values) {
        if (lambda < -1e-8)
            throw NonPSDCovariance("eigenvalue " + std::to_string(lambda) + " below -1e-8");
        lambda_max = std::max(lambda_max, lambda);
    }
    const double cutoff = std::max(lambda_max, 1.0) * 1e-12;
    return sym_apply(m, [cutoff](double lambda) {
        return lambda > cutoff ? 1.0 / std::sqrt(lambda) : 0.0;
    });
}

}  // namespace eto
