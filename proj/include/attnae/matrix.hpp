#pragma once

// Dense row-major matrix of doubles plus the handful of kernels the
// network needs: matmul, matrix-vector products, outer-product accumulation
// and elementwise helpers. Deliberately minimal; everything is value
// semantics and single ownership.

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace attnae {

using Vec = std::vector<double>;

struct shape_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), d_(rows * cols, fill) {}

    Matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> vals)
        : rows_(rows), cols_(cols), d_(vals) {
        if (d_.size() != rows * cols)
            throw shape_error("Matrix init list size " + std::to_string(d_.size()) +
                              " != " + std::to_string(rows) + "x" + std::to_string(cols));
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return d_.size(); }

    double& operator()(std::size_t r, std::size_t c) { return d_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return d_[r * cols_ + c]; }

    double* data() { return d_.data(); }
    const double* data() const { return d_.data(); }
    double* row(std::size_t r) { return d_.data() + r * cols_; }
    const double* row(std::size_t r) const { return d_.data() + r * cols_; }

    std::vector<double>& raw() { return d_; }
    const std::vector<double>& raw() const { return d_; }

    void fill(double v) { d_.assign(d_.size(), v); }

    Vec row_vec(std::size_t r) const { return Vec(row(r), row(r) + cols_); }
    Vec col_vec(std::size_t c) const {
        Vec out(rows_);
        for (std::size_t r = 0; r < rows_; ++r) out[r] = d_[r * cols_ + c];
        return out;
    }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    std::string shape_str() const {
        return std::to_string(rows_) + "x" + std::to_string(cols_);
    }

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<double> d_;
};

inline void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
    if (!a.same_shape(b))
        throw shape_error(std::string(what) + ": shape mismatch " + a.shape_str() +
                          " vs " + b.shape_str());
}

// C = A * B. Summation runs over k in ascending order for every entry, so the
// result is bitwise identical to the naive triple loop.
inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows())
        throw shape_error("matmul: inner dimensions differ, " + a.shape_str() + " * " +
                          b.shape_str());
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* arow = a.row(i);
        double* crow = c.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = arow[k];
            const double* brow = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

// y = A * x
inline Vec matvec(const Matrix& a, const Vec& x) {
    if (a.cols() != x.size())
        throw shape_error("matvec: " + a.shape_str() + " * vector[" +
                          std::to_string(x.size()) + "]");
    Vec y(a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* arow = a.row(i);
        double acc = 0.0;
        for (std::size_t k = 0; k < a.cols(); ++k) acc += arow[k] * x[k];
        y[i] = acc;
    }
    return y;
}

// y += A^T * x  (accumulating form used on backward paths)
inline void mat_t_vec_add(const Matrix& a, const Vec& x, Vec& y) {
    if (a.rows() != x.size() || a.cols() != y.size())
        throw shape_error("mat_t_vec_add: " + a.shape_str() + "^T * vector[" +
                          std::to_string(x.size()) + "] -> vector[" +
                          std::to_string(y.size()) + "]");
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double xi = x[i];
        if (xi == 0.0) continue;
        const double* arow = a.row(i);
        for (std::size_t j = 0; j < a.cols(); ++j) y[j] += xi * arow[j];
    }
}

// A += u * v^T
inline void add_outer(Matrix& a, const Vec& u, const Vec& v) {
    if (a.rows() != u.size() || a.cols() != v.size())
        throw shape_error("add_outer: " + a.shape_str() + " += [" + std::to_string(u.size()) +
                          "] x [" + std::to_string(v.size()) + "]^T");
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double ui = u[i];
        if (ui == 0.0) continue;
        double* arow = a.row(i);
        for (std::size_t j = 0; j < a.cols(); ++j) arow[j] += ui * v[j];
    }
}

inline void axpy(double alpha, const Vec& x, Vec& y) {
    if (x.size() != y.size()) throw shape_error("axpy: size mismatch");
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline double dot(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) throw shape_error("dot: size mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

inline bool all_finite(const Matrix& m) {
    for (double v : m.raw())
        if (!std::isfinite(v)) return false;
    return true;
}

inline bool all_finite(const Vec& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace attnae
