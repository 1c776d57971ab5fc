#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"
#include "kernels.hpp"
#include "linalg.hpp"

namespace kpls {

struct Dataset {
    DenseMatrix X; ///< n×d inputs, one point per row
    Vector y;

    std::size_t n() const noexcept { return y.size(); }
    std::size_t dim() const noexcept { return X.cols(); }

    void validate() const
    {
        if (y.size() < 2)
            throw invalid_input("dataset needs at least two observations");
        if (X.rows() != y.size())
            throw invalid_input("dataset: X rows and y length differ");
        for (double v : X.data())
            if (!std::isfinite(v))
                throw invalid_input("dataset: non-finite input value");
        for (double v : y)
            if (!std::isfinite(v))
                throw invalid_input("dataset: non-finite target value");
    }
};

struct FitOptions {
    /// Project every new component against all previous ones (twice). When off, the
    /// kernel matrix is deflated explicitly in a working copy instead.
    bool reorthogonalize = true;
};

/// Fitted kernel PLS state. Column j of T, R, yhat and alpha belongs to component j+1.
struct KplsModel {
    std::size_t n = 0;
    std::size_t m_max = 0;    ///< requested number of components
    std::size_t actual_m = 0; ///< components extracted before breakdown
    bool breakdown = false;
    bool centered = false;
    double y_mean = 0.0;
    Vector targets; ///< y as used by the fit (centered when the kernel is)

    std::vector<Vector> T;     ///< orthonormal latent components
    std::vector<Vector> R;     ///< residuals normalized to unit K-norm
    UpperTriangular L;         ///< actual_m × actual_m, upper bidiagonal
    Vector knorms;             ///< ‖Kᵢ rᵢ‖ with the deflated kernel
    Vector resnorms;           ///< √(vᵀKv) of y − ŷᵢ₋₁ for i = 1..actual_m+1
    std::vector<Vector> yhat;  ///< fitted values after m components
    std::vector<Vector> alpha; ///< kernel coefficients after m components

    void require_components(std::size_t m) const
    {
        if (m < 1 || m > actual_m)
            throw invalid_input("component count " + std::to_string(m) + " outside 1.." + std::to_string(actual_m));
    }
};

namespace detail {

inline double knorm_squared(const KernelMatrix& K, std::span<const double> v)
{
    Vector Kv = matvec(K.entries, v);
    return dot(v, Kv);
}

inline void require_finite(std::span<const double> v, const char* what)
{
    for (double x : v)
        if (!std::isfinite(x))
            throw numerical_failure(std::string("fit: non-finite ") + what);
}

} // namespace detail

/// Kernel NIPALS. Cost O(m_max·n²). Stops early when the residual K-norm falls below
/// 1e−10·(trace K/n)·‖y‖.
inline KplsModel fit(const KernelMatrix& K, std::span<const double> y, std::size_t m_max, FitOptions opts = {})
{
    std::size_t n = K.n();
    if (y.size() != n)
        throw invalid_input("fit: target length does not match kernel matrix order");
    if (m_max < 1 || m_max > n)
        throw invalid_input("fit: m_max must lie in 1..n");
    detail::require_finite(y, "target");

    KplsModel M;
    M.n = n;
    M.m_max = m_max;
    M.centered = K.centered;
    if (K.centered) {
        CenteredTargets ct = center_targets(y);
        M.targets = std::move(ct.y);
        M.y_mean = ct.mean;
    } else {
        M.targets.assign(y.begin(), y.end());
    }
    const Vector& yc = M.targets;

    const double tol = 1e-10 * (K.trace() / static_cast<double>(n)) * norm2(yc);
    DenseMatrix work;
    if (!opts.reorthogonalize)
        work = K.entries;

    Vector yh(n, 0.0);
    std::vector<double> ldiag, lsup; // l_jj and l_{j−1,j}
    for (std::size_t i = 0; i < m_max; ++i) {
        Vector v(n);
        for (std::size_t k = 0; k < n; ++k)
            v[k] = yc[k] - yh[k];
        if (opts.reorthogonalize)
            for (int pass = 0; pass < 2; ++pass)
                for (const Vector& t : M.T)
                    axpy(-dot(t, v), t, v);
        Vector Kv = matvec(K.entries, v);
        double s = std::sqrt(std::max(0.0, dot(v, Kv)));
        if (!(s > tol)) {
            M.resnorms.push_back(s);
            M.breakdown = true;
            break;
        }
        Vector r(n);
        for (std::size_t k = 0; k < n; ++k)
            r[k] = v[k] / s;
        Vector Kr(n);
        for (std::size_t k = 0; k < n; ++k)
            Kr[k] = Kv[k] / s;
        Vector u;
        if (opts.reorthogonalize) {
            u = Kr;
            for (int pass = 0; pass < 2; ++pass)
                for (const Vector& t : M.T)
                    axpy(-dot(t, u), t, u);
        } else {
            u = matvec(work, r);
        }
        double nu = norm2(u);
        if (!(nu > 1e-12 * norm2(Kr))) {
            M.resnorms.push_back(s);
            M.breakdown = true;
            break;
        }
        Vector t(n);
        for (std::size_t k = 0; k < n; ++k)
            t[k] = u[k] / nu;
        detail::require_finite(t, "latent component");

        ldiag.push_back(dot(t, Kr));
        lsup.push_back(i > 0 ? dot(M.T.back(), Kr) : 0.0);

        if (!opts.reorthogonalize) {
            // K ← (I − ttᵀ) K (I − ttᵀ)
            Vector Kt = matvec(work, t);
            double tKt = dot(t, Kt);
            for (std::size_t a = 0; a < n; ++a) {
                auto row = work.row(a);
                for (std::size_t b = 0; b < n; ++b)
                    row[b] += -t[a] * Kt[b] - Kt[a] * t[b] + tKt * t[a] * t[b];
            }
        }

        double cy = dot(t, yc);
        axpy(cy, t, yh);
        M.T.push_back(std::move(t));
        M.R.push_back(std::move(r));
        M.knorms.push_back(nu);
        M.resnorms.push_back(s);
        M.yhat.push_back(yh);
    }
    M.actual_m = M.T.size();
    if (M.actual_m == 0)
        throw numerical_failure("fit: breakdown before the first component (y has zero K-norm)");
    if (!M.breakdown) {
        Vector v(n);
        for (std::size_t k = 0; k < n; ++k)
            v[k] = yc[k] - yh[k];
        M.resnorms.push_back(std::sqrt(std::max(0.0, detail::knorm_squared(K, v))));
    }

    std::size_t m = M.actual_m;
    M.L = UpperTriangular(m);
    for (std::size_t j = 0; j < m; ++j) {
        M.L.at(j, j) = ldiag[j];
        if (j > 0)
            M.L.at(j - 1, j) = lsup[j];
    }

    // αₘ = Rₘ Lₘ⁻¹ Tₘᵀ y; Lₘ is the leading block of L, so solve by bidiagonal back substitution.
    Vector ty(m);
    for (std::size_t j = 0; j < m; ++j)
        ty[j] = dot(M.T[j], yc);
    for (std::size_t mm = 1; mm <= m; ++mm) {
        Vector z(mm);
        for (std::size_t j = mm; j-- > 0;) {
            double rhs = ty[j] - (j + 1 < mm ? M.L(j, j + 1) * z[j + 1] : 0.0);
            if (M.L(j, j) == 0.0)
                throw numerical_failure("fit: zero diagonal in L");
            z[j] = rhs / M.L(j, j);
        }
        Vector a(n, 0.0);
        for (std::size_t j = 0; j < mm; ++j)
            axpy(z[j], M.R[j], a);
        detail::require_finite(a, "kernel coefficient");
        M.alpha.push_back(std::move(a));
    }
    return M;
}

/// ⟨αₘ, kx⟩ + y_mean, with kx centered like the training kernel.
inline double predict(const KplsModel& model, std::span<const double> kx, std::size_t m)
{
    model.require_components(m);
    if (kx.size() != model.n)
        throw invalid_input("predict: kernel column length does not match training size");
    return dot(model.alpha[m - 1], kx) + model.y_mean;
}

/// D = LᵀL over the leading m components (default: all), tridiagonal by construction.
inline SymTridiagonal tridiagonal_D(const KplsModel& model, std::size_t m = 0)
{
    if (m == 0)
        m = model.actual_m;
    model.require_components(m);
    SymTridiagonal D;
    D.diag.resize(m);
    D.offdiag.resize(m - 1);
    for (std::size_t j = 0; j < m; ++j) {
        double a = model.L(j, j);
        double b = j > 0 ? model.L(j - 1, j) : 0.0;
        D.diag[j] = a * a + b * b;
        if (j + 1 < m)
            D.offdiag[j] = a * model.L(j, j + 1);
    }
    return D;
}

} // namespace kpls
