// include/xmodal/matrix.hpp
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "xmodal/common.hpp"

namespace xmodal {

// Dense row-major matrix of doubles. Batches of samples are stored one
// sample per column, d rows, mirroring the D in R^{d x N} layout used
// throughout the library.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;  // row-major, rows * cols entries

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    const double& operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    bool empty() const { return rows == 0 || cols == 0; }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }

    // Throws NumericError if any entry is NaN/Inf. `what` names the producer.
    void assert_finite(const std::string& what) const {
        for (double v : data)
            if (!std::isfinite(v)) throw NumericError(what + ": non-finite matrix entry");
    }
};

inline void require_same_shape(const Matrix& a, const Matrix& b, const std::string& what) {
    if (a.rows != b.rows || a.cols != b.cols) throw ConfigError(what + ": shape mismatch");
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) throw ConfigError("matmul: inner dimension mismatch");
    Matrix c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        double* crow = &c.data[i * c.cols];
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = a.data[i * a.cols + k];
            if (aik == 0.0) continue;
            const double* brow = &b.data[k * b.cols];
            for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

// a^T * b, with a (m x r), b (m x c) -> (r x c)
inline Matrix matmul_at(const Matrix& a, const Matrix& b) {
    if (a.rows != b.rows) throw ConfigError("matmul_at: inner dimension mismatch");
    Matrix c(a.cols, b.cols);
    for (std::size_t k = 0; k < a.rows; ++k) {
        const double* arow = &a.data[k * a.cols];
        const double* brow = &b.data[k * b.cols];
        for (std::size_t i = 0; i < a.cols; ++i) {
            const double aki = arow[i];
            if (aki == 0.0) continue;
            double* crow = &c.data[i * c.cols];
            for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aki * brow[j];
        }
    }
    return c;
}

// a * b^T, with a (m x r), b (c x r) -> (m x c)
inline Matrix matmul_bt(const Matrix& a, const Matrix& b) {
    if (a.cols != b.cols) throw ConfigError("matmul_bt: inner dimension mismatch");
    Matrix c(a.rows, b.rows);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = &a.data[i * a.cols];
        for (std::size_t j = 0; j < b.rows; ++j) {
            const double* brow = &b.data[j * b.cols];
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols; ++k) s += arow[k] * brow[k];
            c(i, j) = s;
        }
    }
    return c;
}

inline Matrix transpose(const Matrix& a) {
    Matrix t(a.cols, a.rows);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
    return t;
}

inline void add_bias_cols(Matrix& m, std::span<const double> bias) {
    if (bias.size() != m.rows) throw ConfigError("add_bias_cols: bias length mismatch");
    for (std::size_t i = 0; i < m.rows; ++i) {
        double* row = &m.data[i * m.cols];
        for (std::size_t j = 0; j < m.cols; ++j) row[j] += bias[i];
    }
}

inline std::vector<double> row_sums(const Matrix& m) {
    std::vector<double> s(m.rows, 0.0);
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = 0; j < m.cols; ++j) s[i] += m(i, j);
    return s;
}

inline std::vector<double> get_col(const Matrix& m, std::size_t j) {
    std::vector<double> v(m.rows);
    for (std::size_t i = 0; i < m.rows; ++i) v[i] = m(i, j);
    return v;
}

inline void set_col(Matrix& m, std::size_t j, std::span<const double> v) {
    if (v.size() != m.rows) throw ConfigError("set_col: length mismatch");
    for (std::size_t i = 0; i < m.rows; ++i) m(i, j) = v[i];
}

inline void add_to_col(Matrix& m, std::size_t j, std::span<const double> v, double scale = 1.0) {
    if (v.size() != m.rows) throw ConfigError("add_to_col: length mismatch");
    for (std::size_t i = 0; i < m.rows; ++i) m(i, j) += scale * v[i];
}

inline Matrix gather_cols(const Matrix& m, std::span<const std::size_t> idx) {
    Matrix out(m.rows, idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) {
        if (idx[k] >= m.cols) throw ConfigError("gather_cols: index out of range");
        for (std::size_t i = 0; i < m.rows; ++i) out(i, k) = m(i, idx[k]);
    }
    return out;
}

// Vertical concatenation (same column count).
inline Matrix vstack(const Matrix& a, const Matrix& b, const Matrix& c) {
    if (a.cols != b.cols || a.cols != c.cols) throw ConfigError("vstack: column count mismatch");
    Matrix out(a.rows + b.rows + c.rows, a.cols);
    std::copy(a.data.begin(), a.data.end(), out.data.begin());
    std::copy(b.data.begin(), b.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(a.data.size()));
    std::copy(c.data.begin(), c.data.end(),
              out.data.begin() + static_cast<std::ptrdiff_t>(a.data.size() + b.data.size()));
    return out;
}

// Horizontal concatenation (same row count).
inline Matrix hstack(const Matrix& a, const Matrix& b) {
    if (a.empty()) return b;
    if (b.empty()) return a;
    if (a.rows != b.rows) throw ConfigError("hstack: row count mismatch");
    Matrix out(a.rows, a.cols + b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        std::copy(&a.data[i * a.cols], &a.data[i * a.cols] + a.cols, &out.data[i * out.cols]);
        std::copy(&b.data[i * b.cols], &b.data[i * b.cols] + b.cols, &out.data[i * out.cols] + a.cols);
    }
    return out;
}

inline Matrix take_cols(const Matrix& m, std::size_t c0, std::size_t c1) {
    if (c1 < c0 || c1 > m.cols) throw ConfigError("take_cols: bad column range");
    Matrix out(m.rows, c1 - c0);
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = c0; j < c1; ++j) out(i, j - c0) = m(i, j);
    return out;
}

inline Matrix take_rows(const Matrix& m, std::size_t r0, std::size_t r1) {
    if (r1 < r0 || r1 > m.rows) throw ConfigError("take_rows: bad row range");
    Matrix out(r1 - r0, m.cols);
    std::copy(m.data.begin() + static_cast<std::ptrdiff_t>(r0 * m.cols),
              m.data.begin() + static_cast<std::ptrdiff_t>(r1 * m.cols), out.data.begin());
    return out;
}

inline void add_scaled(Matrix& into, const Matrix& g, double scale) {
    require_same_shape(into, g, "add_scaled");
    for (std::size_t k = 0; k < into.data.size(); ++k) into.data[k] += scale * g.data[k];
}

inline double sq_dist_cols(const Matrix& a, std::size_t ja, const Matrix& b, std::size_t jb) {
    if (a.rows != b.rows) throw ConfigError("sq_dist_cols: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double d = a(i, ja) - b(i, jb);
        s += d * d;
    }
    return s;
}

inline double dot_cols(const Matrix& a, std::size_t ja, const Matrix& b, std::size_t jb) {
    if (a.rows != b.rows) throw ConfigError("dot_cols: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows; ++i) s += a(i, ja) * b(i, jb);
    return s;
}

}  // namespace xmodal
