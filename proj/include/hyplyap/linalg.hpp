#pragma once

/**
 * @file linalg.hpp
 * @brief Small dense matrices and symmetric eigenvalue kernels.
 *
 * The stability checks only ever need the smallest eigenvalue of small
 * symmetric matrices (k x k with k the number of PDE components), so a
 * cyclic Jacobi sweep is plenty. 1x1 and 2x2 use closed forms.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "hyplyap/errors.hpp"

namespace hyplyap {

class Matrix {
public:
    Matrix() = default;

    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    Matrix(std::initializer_list<std::initializer_list<double>> rows) {
        rows_ = rows.size();
        cols_ = rows_ == 0 ? 0 : rows.begin()->size();
        data_.reserve(rows_ * cols_);
        for (const auto& r : rows) {
            if (r.size() != cols_) throw InvalidParameter("Matrix: ragged initializer");
            data_.insert(data_.end(), r.begin(), r.end());
        }
    }

    static Matrix identity(std::size_t n) {
        Matrix out(n, n);
        for (std::size_t i = 0; i < n; ++i) out(i, i) = 1.0;
        return out;
    }

    static Matrix diagonal(std::span<const double> d) {
        Matrix out(d.size(), d.size());
        for (std::size_t i = 0; i < d.size(); ++i) out(i, i) = d[i];
        return out;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return data_.empty(); }
    bool square() const noexcept { return rows_ == cols_; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    Matrix transpose() const {
        Matrix out(cols_, rows_);
        for (std::size_t r = 0; r < rows_; ++r)
            for (std::size_t c = 0; c < cols_; ++c) out(c, r) = (*this)(r, c);
        return out;
    }

    /// Maximum absolute row sum.
    double norm_inf() const {
        double best = 0.0;
        for (std::size_t r = 0; r < rows_; ++r) {
            double s = 0.0;
            for (std::size_t c = 0; c < cols_; ++c) s += std::abs((*this)(r, c));
            best = std::max(best, s);
        }
        return best;
    }

    friend Matrix operator*(const Matrix& a, const Matrix& b) {
        if (a.cols_ != b.rows_) throw InvalidParameter("Matrix product: dimension mismatch");
        Matrix out(a.rows_, b.cols_);
        for (std::size_t r = 0; r < a.rows_; ++r)
            for (std::size_t k = 0; k < a.cols_; ++k) {
                const double v = a(r, k);
                if (v == 0.0) continue;
                for (std::size_t c = 0; c < b.cols_; ++c) out(r, c) += v * b(k, c);
            }
        return out;
    }

    friend Matrix operator+(Matrix a, const Matrix& b) {
        a.check_same(b);
        for (std::size_t i = 0; i < a.data_.size(); ++i) a.data_[i] += b.data_[i];
        return a;
    }

    friend Matrix operator-(Matrix a, const Matrix& b) {
        a.check_same(b);
        for (std::size_t i = 0; i < a.data_.size(); ++i) a.data_[i] -= b.data_[i];
        return a;
    }

    friend Matrix operator*(double s, Matrix a) {
        for (auto& v : a.data_) v *= s;
        return a;
    }

    /// y = A x
    std::vector<double> apply(std::span<const double> x) const {
        if (x.size() != cols_) throw InvalidParameter("Matrix apply: dimension mismatch");
        std::vector<double> y(rows_, 0.0);
        for (std::size_t r = 0; r < rows_; ++r)
            for (std::size_t c = 0; c < cols_; ++c) y[r] += (*this)(r, c) * x[c];
        return y;
    }

    /// x^T A x
    double quadratic_form(std::span<const double> x) const {
        const auto ax = apply(x);
        double s = 0.0;
        for (std::size_t i = 0; i < ax.size(); ++i) s += x[i] * ax[i];
        return s;
    }

private:
    void check_same(const Matrix& b) const {
        if (rows_ != b.rows_ || cols_ != b.cols_) throw InvalidParameter("Matrix sum: dimension mismatch");
    }

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Smaller eigenvalue of [[a, b], [b, c]].
inline double min_eig_2x2(double a, double b, double c) {
    return 0.5 * (a + c) - std::hypot(0.5 * (a - c), b);
}

/// All eigenvalues (ascending) of a symmetric matrix by cyclic Jacobi rotations.
/// The input is symmetrized first; iteration stops once the off-diagonal
/// Frobenius mass drops below 1e-12 of the total.
inline std::vector<double> jacobi_eigenvalues(const Matrix& input) {
    if (!input.square()) throw InvalidParameter("jacobi_eigenvalues: matrix is not square");
    const std::size_t n = input.rows();
    Matrix a(n, n);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) a(r, c) = 0.5 * (input(r, c) + input(c, r));

    auto off_norm2 = [&] {
        double s = 0.0;
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < n; ++c)
                if (r != c) s += a(r, c) * a(r, c);
        return s;
    };
    double total = 0.0;
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) total += a(r, c) * a(r, c);
    const double target = 1e-24 * total;  // (1e-12)^2 relative, squared norms

    for (int sweep = 0; sweep < 100 && off_norm2() > target; ++sweep) {
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double cs = 1.0 / std::sqrt(t * t + 1.0);
                const double sn = t * cs;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = cs * akp - sn * akq;
                    a(k, q) = sn * akp + cs * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(q, k);
                    a(p, k) = cs * apk - sn * aqk;
                    a(q, k) = sn * apk + cs * aqk;
                }
            }
        }
    }

    std::vector<double> eig(n);
    for (std::size_t i = 0; i < n; ++i) eig[i] = a(i, i);
    std::sort(eig.begin(), eig.end());
    return eig;
}

/// Smallest eigenvalue of a symmetric matrix.
inline double min_eig_symmetric(const Matrix& a) {
    if (!a.square() || a.rows() == 0) throw InvalidParameter("min_eig_symmetric: matrix must be square and non-empty");
    switch (a.rows()) {
        case 1:
            return a(0, 0);
        case 2:
            return min_eig_2x2(a(0, 0), 0.5 * (a(0, 1) + a(1, 0)), a(1, 1));
        default:
            return jacobi_eigenvalues(a).front();
    }
}

}  // namespace hyplyap
