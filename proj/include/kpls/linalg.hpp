#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"

namespace kpls {

using Vector = std::vector<double>;

/// Dense row-major matrix.
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill)
    {
        if (rows == 0 || cols == 0)
            throw invalid_input("DenseMatrix: dimensions must be positive");
    }
    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data))
    {
        if (rows == 0 || cols == 0 || data_.size() != rows * cols)
            throw invalid_input("DenseMatrix: entry count does not match dimensions");
    }

    static DenseMatrix identity(std::size_t n)
    {
        DenseMatrix I(n, n);
        for (std::size_t i = 0; i < n; ++i)
            I(i, i) = 1.0;
        return I;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

    Vector column(std::size_t j) const
    {
        Vector c(rows_);
        for (std::size_t i = 0; i < rows_; ++i)
            c[i] = (*this)(i, j);
        return c;
    }

    const std::vector<double>& data() const noexcept { return data_; }
    std::vector<double>& data() noexcept { return data_; }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Symmetric tridiagonal matrix; the off-diagonal is stored once.
struct SymTridiagonal {
    Vector diag;
    Vector offdiag;

    std::size_t order() const noexcept { return diag.size(); }

    void validate() const
    {
        if (diag.empty())
            throw invalid_input("SymTridiagonal: empty diagonal");
        if (offdiag.size() + 1 != diag.size())
            throw invalid_input("SymTridiagonal: off-diagonal must have length m-1");
        for (double v : diag)
            if (!std::isfinite(v))
                throw invalid_input("SymTridiagonal: non-finite diagonal entry");
        for (double v : offdiag)
            if (!std::isfinite(v))
                throw invalid_input("SymTridiagonal: non-finite off-diagonal entry");
    }

    DenseMatrix dense() const
    {
        std::size_t m = order();
        DenseMatrix A(m, m);
        for (std::size_t i = 0; i < m; ++i) {
            A(i, i) = diag[i];
            if (i + 1 < m)
                A(i, i + 1) = A(i + 1, i) = offdiag[i];
        }
        return A;
    }
};

/// Square upper triangular matrix; entries below the diagonal are always zero.
class UpperTriangular {
public:
    UpperTriangular() = default;
    explicit UpperTriangular(std::size_t order) : n_(order), data_(order * order, 0.0) {}

    std::size_t order() const noexcept { return n_; }

    double operator()(std::size_t i, std::size_t j) const { return data_[i * n_ + j]; }

    /// Writable access, restricted to the upper triangle.
    double& at(std::size_t i, std::size_t j)
    {
        if (i > j)
            throw invalid_input("UpperTriangular: write below the diagonal");
        return data_[i * n_ + j];
    }

    double max_abs_diagonal() const
    {
        double m = 0.0;
        for (std::size_t i = 0; i < n_; ++i)
            m = std::max(m, std::abs((*this)(i, i)));
        return m;
    }

    /// Diagonal entries at or below this magnitude make the matrix singular for solves.
    double singular_tolerance() const { return 1e-12 * max_abs_diagonal(); }

    DenseMatrix dense() const { return DenseMatrix(n_, n_, data_); }

private:
    std::size_t n_ = 0;
    std::vector<double> data_;
};

namespace detail {

inline double dot_unchecked(const double* a, const double* b, std::size_t n)
{
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    for (; i < n; ++i)
        s0 += a[i] * b[i];
    return (s0 + s1) + (s2 + s3);
}

} // namespace detail

inline double dot(std::span<const double> a, std::span<const double> b)
{
    if (a.size() != b.size())
        throw invalid_input("dot: length mismatch");
    return detail::dot_unchecked(a.data(), b.data(), a.size());
}

/// Euclidean norm with scaling against overflow and underflow.
inline double norm2(std::span<const double> x)
{
    double scale = 0.0;
    for (double v : x)
        scale = std::max(scale, std::abs(v));
    if (scale == 0.0 || !std::isfinite(scale))
        return scale;
    double s = 0.0;
    for (double v : x) {
        double r = v / scale;
        s += r * r;
    }
    return scale * std::sqrt(s);
}

/// y += a * x
inline void axpy(double a, std::span<const double> x, std::span<double> y)
{
    if (x.size() != y.size())
        throw invalid_input("axpy: length mismatch");
    for (std::size_t i = 0; i < x.size(); ++i)
        y[i] += a * x[i];
}

inline Vector matvec(const DenseMatrix& A, std::span<const double> x)
{
    if (A.cols() != x.size())
        throw invalid_input("matvec: dimension mismatch (" + std::to_string(A.rows()) + "x" +
                            std::to_string(A.cols()) + " times " + std::to_string(x.size()) + ")");
    Vector y(A.rows());
    for (std::size_t i = 0; i < A.rows(); ++i) {
        auto r = A.row(i);
        y[i] = detail::dot_unchecked(r.data(), x.data(), r.size());
    }
    return y;
}

/// Solves U x = b by back substitution.
inline Vector solve_upper(const UpperTriangular& U, std::span<const double> b)
{
    std::size_t n = U.order();
    if (b.size() != n)
        throw invalid_input("solve_upper: dimension mismatch");
    double tol = U.singular_tolerance();
    Vector x(b.begin(), b.end());
    for (std::size_t ii = n; ii-- > 0;) {
        double d = U(ii, ii);
        if (!(std::abs(d) > tol))
            throw singular_matrix("solve_upper: diagonal entry " + std::to_string(ii) + " is numerically zero", ii);
        double s = x[ii];
        for (std::size_t j = ii + 1; j < n; ++j)
            s -= U(ii, j) * x[j];
        x[ii] = s / d;
    }
    return x;
}

/// Solves Uᵀ x = b by forward substitution.
inline Vector solve_upper_transposed(const UpperTriangular& U, std::span<const double> b)
{
    std::size_t n = U.order();
    if (b.size() != n)
        throw invalid_input("solve_upper_transposed: dimension mismatch");
    double tol = U.singular_tolerance();
    Vector x(b.begin(), b.end());
    for (std::size_t i = 0; i < n; ++i) {
        double d = U(i, i);
        if (!(std::abs(d) > tol))
            throw singular_matrix("solve_upper_transposed: diagonal entry " + std::to_string(i) + " is numerically zero", i);
        double s = x[i];
        for (std::size_t k = 0; k < i; ++k)
            s -= U(k, i) * x[k];
        x[i] = s / d;
    }
    return x;
}

/// Σᵢ eigsᵢʲ, the trace of the j-th power of a matrix with spectrum eigs.
inline double trace_powers(std::span<const double> eigs, unsigned j)
{
    if (j == 0)
        throw invalid_input("trace_powers: power must be at least 1");
    double s = 0.0;
    for (double l : eigs) {
        double p = l;
        for (unsigned k = 1; k < j; ++k)
            p *= l;
        s += p;
    }
    return s;
}

namespace detail {

/// Implicit QL iteration on a symmetric tridiagonal matrix. On return d holds the
/// eigenvalues (unsorted). Every vector in rows is multiplied from the right by the
/// accumulated rotations, so a row holding xᵀ ends up as xᵀZ with Z the eigenvectors.
inline void tridiagonal_ql(Vector& d, Vector e, std::vector<Vector>& rows)
{
    std::size_t n = d.size();
    if (n == 0)
        return;
    e.resize(n, 0.0);
    e[n - 1] = 0.0;
    const double eps = std::numeric_limits<double>::epsilon();
    double f = 0.0, tst1 = 0.0;
    const std::size_t max_sweeps = 60 * n + 60;
    std::size_t sweeps = 0;
    for (std::size_t l = 0; l < n; ++l) {
        tst1 = std::max(tst1, std::abs(d[l]) + std::abs(e[l]));
        std::size_t m = l;
        while (m < n - 1 && std::abs(e[m]) > eps * tst1)
            ++m;
        if (m > l) {
            do {
                if (++sweeps > max_sweeps)
                    throw numerical_failure("tridiagonal eigensolver did not converge");
                double g = d[l];
                double p = (d[l + 1] - g) / (2.0 * e[l]);
                double r = std::hypot(p, 1.0);
                if (p < 0)
                    r = -r;
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                double dl1 = d[l + 1];
                double h = g - d[l];
                for (std::size_t i = l + 2; i < n; ++i)
                    d[i] -= h;
                f += h;
                p = d[m];
                double c = 1.0, c2 = c, c3 = c;
                double el1 = e[l + 1];
                double s = 0.0, s2 = 0.0;
                for (std::size_t i = m; i-- > l;) {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = std::hypot(p, e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for (auto& row : rows) {
                        double a = row[i + 1];
                        row[i + 1] = s * row[i] + c * a;
                        row[i] = c * row[i] - s * a;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
            } while (std::abs(e[l]) > eps * tst1);
        }
        d[l] += f;
        e[l] = 0.0;
    }
}

/// Sorts eigenvalues descending and permutes the row coordinates to match.
inline void sort_descending(Vector& values, std::vector<Vector>& rows)
{
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
    Vector sorted(values.size());
    for (std::size_t k = 0; k < order.size(); ++k)
        sorted[k] = values[order[k]];
    values = std::move(sorted);
    for (auto& row : rows) {
        Vector r(row.size());
        for (std::size_t k = 0; k < order.size(); ++k)
            r[k] = row[order[k]];
        row = std::move(r);
    }
}

} // namespace detail

/// All eigenvalues of a symmetric tridiagonal matrix, sorted descending. O(m²).
inline Vector symtri_eigenvalues(const SymTridiagonal& t)
{
    t.validate();
    Vector d = t.diag;
    std::vector<Vector> none;
    detail::tridiagonal_ql(d, t.offdiag, none);
    std::sort(d.begin(), d.end(), std::greater<>());
    return d;
}

/// Eigen-decomposition of a symmetric tridiagonal matrix.
struct TridiagonalEigen {
    Vector values;       ///< descending
    DenseMatrix vectors; ///< column k is the unit eigenvector of values[k]
};

inline TridiagonalEigen symtri_eigen(const SymTridiagonal& t)
{
    t.validate();
    std::size_t m = t.order();
    Vector d = t.diag;
    std::vector<Vector> rows(m, Vector(m, 0.0));
    for (std::size_t i = 0; i < m; ++i)
        rows[i][i] = 1.0;
    detail::tridiagonal_ql(d, t.offdiag, rows);
    detail::sort_descending(d, rows);
    DenseMatrix S(m, m);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t k = 0; k < m; ++k)
            S(i, k) = rows[i][k];
    return {std::move(d), std::move(S)};
}

/// Householder reduction A = Q Tri Qᵀ of a dense symmetric matrix.
struct HouseholderTridiagonal {
    SymTridiagonal tri;
    std::vector<Vector> reflectors; ///< reflector k acts on coordinates k+1..n-1
    Vector betas;

    /// x ← Qᵀ x
    void apply_qt(std::span<double> x) const
    {
        for (std::size_t k = 0; k < reflectors.size(); ++k) {
            const Vector& v = reflectors[k];
            if (betas[k] == 0.0)
                continue;
            double s = 0.0;
            for (std::size_t i = 0; i < v.size(); ++i)
                s += v[i] * x[k + 1 + i];
            s *= betas[k];
            for (std::size_t i = 0; i < v.size(); ++i)
                x[k + 1 + i] -= s * v[i];
        }
    }
};

inline HouseholderTridiagonal householder_tridiagonalize(DenseMatrix A)
{
    std::size_t n = A.rows();
    if (A.cols() != n)
        throw invalid_input("householder_tridiagonalize: matrix is not square");
    for (double v : A.data())
        if (!std::isfinite(v))
            throw invalid_input("householder_tridiagonalize: non-finite entry");
    HouseholderTridiagonal out;
    out.tri.diag.assign(n, 0.0);
    out.tri.offdiag.assign(n > 0 ? n - 1 : 0, 0.0);
    Vector p(n), w(n);
    for (std::size_t k = 0; k + 2 < n; ++k) {
        std::size_t len = n - k - 1;
        Vector v(len);
        for (std::size_t i = 0; i < len; ++i)
            v[i] = A(k, k + 1 + i);
        double xnorm = norm2(v);
        double alpha = v[0] > 0 ? -xnorm : xnorm;
        double beta = 0.0;
        if (xnorm != 0.0) {
            v[0] -= alpha;
            double vv = dot(v, v);
            beta = vv > 0.0 ? 2.0 / vv : 0.0;
        }
        out.tri.diag[k] = A(k, k);
        out.tri.offdiag[k] = beta == 0.0 ? A(k, k + 1) : alpha;
        if (beta != 0.0) {
            // Trailing block update A22 ← H A22 H with H = I − β v vᵀ.
            for (std::size_t i = 0; i < len; ++i) {
                auto r = A.row(k + 1 + i).subspan(k + 1);
                double s = 0.0;
                for (std::size_t j = 0; j < len; ++j)
                    s += r[j] * v[j];
                p[i] = beta * s;
            }
            double pv = 0.0;
            for (std::size_t i = 0; i < len; ++i)
                pv += p[i] * v[i];
            double half = 0.5 * beta * pv;
            for (std::size_t i = 0; i < len; ++i)
                w[i] = p[i] - half * v[i];
            for (std::size_t i = 0; i < len; ++i) {
                auto r = A.row(k + 1 + i).subspan(k + 1);
                double vi = v[i], wi = w[i];
                for (std::size_t j = 0; j < len; ++j)
                    r[j] -= vi * w[j] + wi * v[j];
            }
        }
        out.reflectors.push_back(std::move(v));
        out.betas.push_back(beta);
    }
    if (n >= 2) {
        out.tri.diag[n - 2] = A(n - 2, n - 2);
        out.tri.offdiag[n - 2] = A(n - 1, n - 2);
    }
    out.tri.diag[n - 1] = A(n - 1, n - 1);
    return out;
}

/// Eigenvalues of a dense symmetric matrix together with the coordinates of a set of
/// vectors in its eigenbasis: coords[j][i] = ⟨uᵢ, xⱼ⟩. The eigenvectors themselves are
/// never formed, so the cost is O(n³) for the reduction plus O(n²) per vector.
struct SpectralProjection {
    Vector values; ///< descending
    std::vector<Vector> coords;
};

inline SpectralProjection symmetric_eigen_project(const DenseMatrix& A, const std::vector<Vector>& xs)
{
    std::size_t n = A.rows();
    for (const auto& x : xs)
        if (x.size() != n)
            throw invalid_input("symmetric_eigen_project: vector length does not match matrix order");
    HouseholderTridiagonal h = householder_tridiagonalize(A);
    std::vector<Vector> rows = xs;
    for (auto& r : rows)
        h.apply_qt(r);
    Vector d = h.tri.diag;
    detail::tridiagonal_ql(d, h.tri.offdiag, rows);
    detail::sort_descending(d, rows);
    return {std::move(d), std::move(rows)};
}

inline Vector symmetric_eigenvalues(const DenseMatrix& A)
{
    return symmetric_eigen_project(A, {}).values;
}

} // namespace kpls
