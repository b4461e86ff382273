#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace datn {

// Dense row-major matrix of doubles. Carrier for Q, K, V, M, A, C, B.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0);

    double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
    double& operator()(std::size_t i, std::size_t j) { return at(i, j); }
    double operator()(std::size_t i, std::size_t j) const { return at(i, j); }

    const double* row(std::size_t i) const { return data.data() + i * cols; }
    double* row(std::size_t i) { return data.data() + i * cols; }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

    static Matrix identity(std::size_t n);
    static Matrix ones(std::size_t r, std::size_t c) { return Matrix(r, c, 1.0); }
};

bool operator==(const Matrix& a, const Matrix& b);

// Exact dense product, cubic time. Throws on inner-dimension mismatch.
Matrix matmul(const Matrix& lhs, const Matrix& rhs);

// B = A^T without forming an explicit transpose elsewhere.
Matrix transpose(const Matrix& m);

// Entry-wise exp. Throws if any output is non-finite (input > ~709.78 or NaN),
// naming the offending index.
Matrix exp_elementwise(const Matrix& m);

// out[i] = sum_j m(i,j)
std::vector<double> row_sums(const Matrix& m);

std::vector<double> col_sums(const Matrix& m);

// Relative-tolerance comparison helpers.
bool approx_equal(double a, double b, double rtol);
double max_rel_err(const Matrix& a, const Matrix& b);

// --- File formats ---
//
// Binary "DATN1": 5-byte magic, u64 LE rows, u64 LE cols, then rows*cols
// f64 LE row-major.  CSV: first line "rows,cols", then one row per line.

void write_datn1(const Matrix& m, const std::string& path);
Matrix read_datn1(const std::string& path);

void write_csv(const Matrix& m, const std::string& path);
Matrix read_csv(const std::string& path);

}  // namespace datn
