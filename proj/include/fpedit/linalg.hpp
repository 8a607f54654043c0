#ifndef FPEDIT_LINALG_HPP
#define FPEDIT_LINALG_HPP

#include <cstddef>
#include <string>
#include <vector>

namespace fpedit {

// Dense row-major double matrix. Small enough on purpose: the editing math
// tops out around a few hundred rows/columns.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix identity(std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return data_.empty(); }

    double& at(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double at(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    double* row(std::size_t i) { return data_.data() + i * cols_; }
    const double* row(std::size_t i) const { return data_.data() + i * cols_; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

struct EighResult {
    std::vector<double> values; // ascending
    Matrix vectors;             // eigenvectors as columns, matching order
};

namespace linalg {

// OpenMP kernels. Every parallel loop assigns each output element to exactly
// one thread and keeps the per-element accumulation order fixed, so results
// are bit-identical to the serial reference at any thread count.

Matrix multiply(const Matrix& a, const Matrix& b);       // A * B
Matrix multiply_abt(const Matrix& a, const Matrix& b);   // A * B^T
Matrix transpose(const Matrix& a);
Matrix add(const Matrix& a, const Matrix& b);
Matrix subtract(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double s);
void add_identity(Matrix& a, double s = 1.0);
double frobenius_norm(const Matrix& a);
double max_abs(const Matrix& a);

std::vector<double> multiply_vec(const Matrix& a, const std::vector<double>& x); // A * x

// Solves X * A = B for X given square A (n x n) and B (m x n), via LU with
// partial pivoting on A^T. Throws NumericError when A is numerically singular.
Matrix solve_right(const Matrix& a, const Matrix& b);

// Symmetric eigendecomposition by cyclic Jacobi rotations. Input must be
// symmetric within `symmetry_tol` (relative to the Frobenius norm) or
// NumericError is thrown. Eigenvalues ascend; ties keep input order.
EighResult eigh(const Matrix& a, double symmetry_tol = 1e-8);

namespace serial {
// Plain single-threaded mirrors of the kernels above, kept as the reference
// implementation for tests and the kernel benchmark.
Matrix multiply(const Matrix& a, const Matrix& b);
Matrix multiply_abt(const Matrix& a, const Matrix& b);
Matrix solve_right(const Matrix& a, const Matrix& b);
EighResult eigh(const Matrix& a, double symmetry_tol = 1e-8);
double frobenius_norm(const Matrix& a);
} // namespace serial

} // namespace linalg
} // namespace fpedit

#endif
