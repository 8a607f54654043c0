#include "fpedit/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fpedit/errors.hpp"

namespace fpedit {

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n, 0.0);
    for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
}

namespace linalg {

namespace {

void check_mul(const Matrix& a, const Matrix& b, bool b_transposed) {
    const std::size_t inner = b_transposed ? b.cols() : b.rows();
    if (a.cols() != inner) {
        throw InputError("matrix multiply: inner dimensions disagree (" +
                         std::to_string(a.cols()) + " vs " + std::to_string(inner) + ")");
    }
}

Matrix multiply_impl(const Matrix& a, const Matrix& b, bool parallel) {
    check_mul(a, b, false);
    Matrix c(a.rows(), b.cols(), 0.0);
    const std::size_t n = a.rows(), k_dim = a.cols(), m = b.cols();
#pragma omp parallel for schedule(static) if (parallel && n > 1)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        double* ci = c.row(i);
        const double* ai = a.row(i);
        for (std::size_t k = 0; k < k_dim; ++k) {
            const double aik = ai[k];
            if (aik == 0.0) continue;
            const double* bk = b.row(k);
            for (std::size_t j = 0; j < m; ++j) ci[j] += aik * bk[j];
        }
    }
    return c;
}

Matrix multiply_abt_impl(const Matrix& a, const Matrix& b, bool parallel) {
    check_mul(a, b, true);
    Matrix c(a.rows(), b.rows(), 0.0);
    const std::size_t n = a.rows(), k_dim = a.cols(), m = b.rows();
#pragma omp parallel for schedule(static) if (parallel && n > 1)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        const double* ai = a.row(i);
        double* ci = c.row(i);
        for (std::size_t j = 0; j < m; ++j) {
            const double* bj = b.row(j);
            double s = 0.0;
            for (std::size_t k = 0; k < k_dim; ++k) s += ai[k] * bj[k];
            ci[j] = s;
        }
    }
    return c;
}

// LU factorization with partial pivoting of A^T, reused for every row of B.
struct LuFactors {
    Matrix lu;                    // n x n, combined L\U of A^T
    std::vector<std::size_t> piv; // row swaps applied in order
};

LuFactors lu_factor_transposed(const Matrix& a, bool parallel) {
    const std::size_t n = a.rows();
    LuFactors f;
    f.lu = Matrix(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) f.lu.at(i, j) = a.at(j, i);
    f.piv.resize(n);

    double scale = max_abs(f.lu);
    if (scale == 0.0) throw NumericError("solve_right: zero system matrix");
    const double tiny = 1e-300 + 1e-16 * scale;

    for (std::size_t k = 0; k < n; ++k) {
        std::size_t p = k;
        double best = std::fabs(f.lu.at(k, k));
        for (std::size_t i = k + 1; i < n; ++i) {
            const double v = std::fabs(f.lu.at(i, k));
            if (v > best) {
                best = v;
                p = i;
            }
        }
        if (best < tiny) throw NumericError("solve_right: system matrix is numerically singular");
        f.piv[k] = p;
        if (p != k)
            for (std::size_t j = 0; j < n; ++j) std::swap(f.lu.at(k, j), f.lu.at(p, j));
        const double pivot = f.lu.at(k, k);
#pragma omp parallel for schedule(static) if (parallel && n - k > 64)
        for (std::ptrdiff_t ii = static_cast<std::ptrdiff_t>(k) + 1;
             ii < static_cast<std::ptrdiff_t>(n); ++ii) {
            const auto i = static_cast<std::size_t>(ii);
            const double l = f.lu.at(i, k) / pivot;
            f.lu.at(i, k) = l;
            if (l == 0.0) continue;
            const double* rk = f.lu.row(k);
            double* ri = f.lu.row(i);
            for (std::size_t j = k + 1; j < n; ++j) ri[j] -= l * rk[j];
        }
    }
    return f;
}

Matrix solve_right_impl(const Matrix& a, const Matrix& b, bool parallel) {
    if (a.rows() != a.cols()) throw InputError("solve_right: system matrix must be square");
    if (b.cols() != a.rows()) throw InputError("solve_right: rhs column count must match system size");
    const std::size_t n = a.rows();
    const LuFactors f = lu_factor_transposed(a, parallel);

    Matrix x(b.rows(), n);
    // Each row of X solves A^T y = b_row independently.
#pragma omp parallel for schedule(static) if (parallel && b.rows() > 1)
    for (std::ptrdiff_t rr = 0; rr < static_cast<std::ptrdiff_t>(b.rows()); ++rr) {
        const auto r = static_cast<std::size_t>(rr);
        std::vector<double> y(b.row(r), b.row(r) + n);
        for (std::size_t k = 0; k < n; ++k) {
            if (f.piv[k] != k) std::swap(y[k], y[f.piv[k]]);
            const double yk = y[k];
            if (yk == 0.0) continue;
            for (std::size_t i = k + 1; i < n; ++i) y[i] -= f.lu.at(i, k) * yk;
        }
        for (std::size_t k = n; k-- > 0;) {
            double s = y[k];
            for (std::size_t j = k + 1; j < n; ++j) s -= f.lu.at(k, j) * y[j];
            y[k] = s / f.lu.at(k, k);
        }
        std::copy(y.begin(), y.end(), x.row(r));
    }
    return x;
}

double off_diagonal_norm(const Matrix& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j)
            if (i != j) s += a.at(i, j) * a.at(i, j);
    return std::sqrt(s);
}

EighResult eigh_impl(const Matrix& input, double symmetry_tol, bool parallel) {
    if (input.rows() != input.cols()) throw InputError("eigh: matrix must be square");
    const std::size_t n = input.rows();
    const double fnorm = frobenius_norm(input);

    double asym = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double d = input.at(i, j) - input.at(j, i);
            asym += 2.0 * d * d;
        }
    if (std::sqrt(asym) > symmetry_tol * std::max(1.0, fnorm))
        throw NumericError("eigh: input is not symmetric within tolerance");

    Matrix a = input;
    // Symmetrize exactly so rotations stay consistent.
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double v = 0.5 * (a.at(i, j) + a.at(j, i));
            a.at(i, j) = v;
            a.at(j, i) = v;
        }

    Matrix v = Matrix::identity(n);
    const double stop = 1e-14 * std::max(fnorm, 1e-300);
    const int max_sweeps = 100;

    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        if (off_diagonal_norm(a) <= stop) break;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a.at(p, q);
                if (std::fabs(apq) <= 1e-300) continue;
                const double app = a.at(p, p), aqq = a.at(q, q);
                const double theta = (aqq - app) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::fabs(theta) + std::sqrt(1.0 + theta * theta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;

#pragma omp parallel for schedule(static) if (parallel && n > 128)
                for (std::ptrdiff_t kk = 0; kk < static_cast<std::ptrdiff_t>(n); ++kk) {
                    const auto k = static_cast<std::size_t>(kk);
                    if (k == p || k == q) continue;
                    const double akp = a.at(k, p), akq = a.at(k, q);
                    a.at(k, p) = c * akp - s * akq;
                    a.at(p, k) = a.at(k, p);
                    a.at(k, q) = s * akp + c * akq;
                    a.at(q, k) = a.at(k, q);
                }
                a.at(p, p) = app - t * apq;
                a.at(q, q) = aqq + t * apq;
                a.at(p, q) = 0.0;
                a.at(q, p) = 0.0;

#pragma omp parallel for schedule(static) if (parallel && n > 128)
                for (std::ptrdiff_t kk = 0; kk < static_cast<std::ptrdiff_t>(n); ++kk) {
                    const auto k = static_cast<std::size_t>(kk);
                    const double vkp = v.at(k, p), vkq = v.at(k, q);
                    v.at(k, p) = c * vkp - s * vkq;
                    v.at(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
    if (off_diagonal_norm(a) > 1e-10 * std::max(fnorm, 1e-300))
        throw NumericError("eigh: Jacobi iteration did not converge");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        return a.at(x, x) < a.at(y, y);
    });

    EighResult r;
    r.values.resize(n);
    r.vectors = Matrix(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        r.values[j] = a.at(order[j], order[j]);
        for (std::size_t i = 0; i < n; ++i) r.vectors.at(i, j) = v.at(i, order[j]);
    }
    return r;
}

} // namespace

Matrix multiply(const Matrix& a, const Matrix& b) { return multiply_impl(a, b, true); }
Matrix multiply_abt(const Matrix& a, const Matrix& b) { return multiply_abt_impl(a, b, true); }

Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t.at(j, i) = a.at(i, j);
    return t;
}

Matrix add(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) throw InputError("matrix add: shape mismatch");
    Matrix c = a;
    for (std::size_t i = 0; i < c.data().size(); ++i) c.data()[i] += b.data()[i];
    return c;
}

Matrix subtract(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) throw InputError("matrix subtract: shape mismatch");
    Matrix c = a;
    for (std::size_t i = 0; i < c.data().size(); ++i) c.data()[i] -= b.data()[i];
    return c;
}

Matrix scale(const Matrix& a, double s) {
    Matrix c = a;
    for (double& v : c.data()) v *= s;
    return c;
}

void add_identity(Matrix& a, double s) {
    if (a.rows() != a.cols()) throw InputError("add_identity: matrix must be square");
    for (std::size_t i = 0; i < a.rows(); ++i) a.at(i, i) += s;
}

double frobenius_norm(const Matrix& a) {
    // Row partials first, then a serial sum, so the result does not depend on
    // thread count.
    const std::size_t n = a.rows();
    std::vector<double> partial(n, 0.0);
#pragma omp parallel for schedule(static) if (n > 64)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        const double* r = a.row(i);
        double s = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) s += r[j] * r[j];
        partial[i] = s;
    }
    double total = 0.0;
    for (double p : partial) total += p;
    return std::sqrt(total);
}

double max_abs(const Matrix& a) {
    double m = 0.0;
    for (double v : a.data()) m = std::max(m, std::fabs(v));
    return m;
}

std::vector<double> multiply_vec(const Matrix& a, const std::vector<double>& x) {
    if (a.cols() != x.size()) throw InputError("multiply_vec: dimension mismatch");
    std::vector<double> y(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* r = a.row(i);
        double s = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) s += r[j] * x[j];
        y[i] = s;
    }
    return y;
}

Matrix solve_right(const Matrix& a, const Matrix& b) { return solve_right_impl(a, b, true); }

EighResult eigh(const Matrix& a, double symmetry_tol) { return eigh_impl(a, symmetry_tol, true); }

namespace serial {

Matrix multiply(const Matrix& a, const Matrix& b) { return multiply_impl(a, b, false); }
Matrix multiply_abt(const Matrix& a, const Matrix& b) { return multiply_abt_impl(a, b, false); }
Matrix solve_right(const Matrix& a, const Matrix& b) { return solve_right_impl(a, b, false); }
EighResult eigh(const Matrix& a, double symmetry_tol) { return eigh_impl(a, symmetry_tol, false); }

double frobenius_norm(const Matrix& a) {
    double s = 0.0;
    for (double v : a.data()) s += v * v;
    return std::sqrt(s);
}

} // namespace serial

} // namespace linalg
} // namespace fpedit
