#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"
#include "kernels.hpp"
#include "kpls.hpp"
#include "linalg.hpp"
#include "parallel.hpp"
#include "sensitivity.hpp"

namespace kpls {

/// Query-independent pieces of Hₘᵀk(x), the transposed Jacobian of αₘ applied to k(x).
///
/// Hₘᵀk = Σⱼ cⱼ Kʲ⁻¹ (k − K T Lₘ⁻ᵀ Rᵀ k) + Σⱼ Kʲ(y − ŷₘ) uⱼᵀk + T Lₘ⁻ᵀ Rᵀ k
///
/// with U = R Lₘ⁻¹ B⁻ᵀ. The inverse bidiagonal Lₘ⁻¹ takes the place of a diagonal
/// normalization; only this form matches the finite-difference Jacobian of αₘ.
struct SensitivityCache {
    std::size_t m = 0;
    KrylovMoments moments;
    UpperTriangular Lm;                  ///< leading m×m block of L
    std::vector<Vector> U;               ///< columns of R Lₘ⁻¹ B⁻ᵀ
    Vector residual;                     ///< y − ŷₘ
    std::vector<Vector> residual_powers; ///< Kʲ(y − ŷₘ), j = 1..m
};

inline SensitivityCache make_sensitivity_cache(const KernelMatrix& K, const KplsModel& model, std::size_t m)
{
    model.require_components(m);
    SensitivityCache cache;
    cache.m = m;
    cache.moments = krylov_moments(K, model, m);
    cache.Lm = UpperTriangular(m);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i; j < m; ++j)
            cache.Lm.at(i, j) = model.L(i, j);
    cache.U.assign(m, Vector(model.n, 0.0));
    for (std::size_t j = 0; j < m; ++j) {
        Vector e(m, 0.0);
        e[j] = 1.0;
        Vector w = solve_upper(cache.Lm, solve_upper_transposed(cache.moments.B, e));
        for (std::size_t i = 0; i < m; ++i)
            axpy(w[i], model.R[i], cache.U[j]);
    }
    cache.residual.resize(model.n);
    for (std::size_t i = 0; i < model.n; ++i)
        cache.residual[i] = model.targets[i] - model.yhat[m - 1][i];
    Vector p = cache.residual;
    for (std::size_t j = 0; j < m; ++j) {
        p = matvec(K.entries, p);
        cache.residual_powers.push_back(p);
    }
    return cache;
}

/// Hₘᵀk(x) in O(m·n²): m matrix-vector products with K and O(m·n) extra work.
inline Vector h_transpose_k(const SensitivityCache& cache, const KplsModel& model, const KernelMatrix& K,
                            std::span<const double> kx)
{
    std::size_t n = model.n, m = cache.m;
    if (kx.size() != n || K.n() != n)
        throw invalid_input("h_transpose_k: dimension mismatch");
    Vector rk(m);
    for (std::size_t i = 0; i < m; ++i)
        rk[i] = dot(model.R[i], kx);
    Vector a = solve_upper_transposed(cache.Lm, rk);
    Vector Ta(n, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        axpy(a[i], model.T[i], Ta);
    Vector base = matvec(K.entries, Ta);
    for (std::size_t i = 0; i < n; ++i)
        base[i] = kx[i] - base[i];
    const Vector& c = cache.moments.c;
    Vector h(n);
    for (std::size_t i = 0; i < n; ++i)
        h[i] = c[m - 1] * base[i];
    for (std::size_t j = m - 1; j-- > 0;) {
        h = matvec(K.entries, h);
        axpy(c[j], base, h);
    }
    for (std::size_t j = 0; j < m; ++j)
        axpy(dot(cache.U[j], kx), cache.residual_powers[j], h);
    axpy(1.0, Ta, h);
    return h;
}

inline double predictive_stderr(const SensitivityCache& cache, const KplsModel& model, const KernelMatrix& K,
                                std::span<const double> kx, double sigma)
{
    if (!(sigma > 0.0))
        throw invalid_input("predictive_stderr: sigma must be positive");
    return sigma * norm2(h_transpose_k(cache, model, K, kx));
}

/// Φ⁻¹(p): rational approximation followed by one Halley step on erfc.
inline double normal_quantile(double p)
{
    if (!(p > 0.0 && p < 1.0))
        throw invalid_input("normal_quantile: probability must lie in (0, 1)");
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                               1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                               6.680131188771972e+01, -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                               -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                               3.754408661907416e+00};
    const double plow = 0.02425;
    double x;
    if (p < plow) {
        double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - plow) {
        double q = p - 0.5, r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    const double pi = 3.14159265358979323846;
    double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
    double u = e * std::sqrt(2.0 * pi) * std::exp(x * x / 2.0);
    return x - u / (1.0 + x * u / 2.0);
}

struct ConfidenceBand {
    DenseMatrix points; ///< one query point per row
    Vector prediction;
    Vector stderr_;
    Vector lower;
    Vector upper;
    double level = 0.0;
    double z = 0.0;
    double sigma = 0.0;
    bool sigma_estimated = false;
    std::size_t m = 0;
};

struct BandOptions {
    std::optional<double> sigma; ///< noise SD; estimated from the residuals when absent
    bool exact_dof_for_sigma = false;
};

/// σ̂² = ‖y − ŷₘ‖² / (n − DoF(m)).
inline double estimate_sigma(const KernelMatrix& K, const KplsModel& model, std::size_t m, bool exact_dof = false)
{
    model.require_components(m);
    double dof = exact_dof ? *dof_exact(K, model, m).dof_exact : *dof_approx(K, model, m, model.actual_m).dof_approx;
    double n = static_cast<double>(model.n);
    if (!(dof < n))
        throw numerical_failure("cannot estimate sigma: DoF " + std::to_string(dof) +
                                " leaves no residual degrees of freedom; pass sigma explicitly");
    double rss = 0.0;
    for (std::size_t i = 0; i < model.n; ++i) {
        double r = model.targets[i] - model.yhat[m - 1][i];
        rss += r * r;
    }
    return std::sqrt(rss / std::max(n - dof, 1.0));
}

/// Pointwise band prediction ± z·stderr at two-sided level over the rows of grid.
inline ConfidenceBand confidence_band(const KplsModel& model, const KernelMatrix& K, const Dataset& data,
                                      const DenseMatrix& grid, std::size_t m, double level, BandOptions opts = {})
{
    if (!(level > 0.0 && level < 1.0))
        throw invalid_input("confidence_band: level must lie in (0, 1)");
    if (grid.cols() != data.dim())
        throw invalid_input("confidence_band: grid dimension does not match training inputs");
    if (data.n() != model.n)
        throw invalid_input("confidence_band: dataset does not match model");
    model.require_components(m);
    ConfidenceBand band;
    band.points = grid;
    band.level = level;
    band.m = m;
    band.z = normal_quantile(0.5 + level / 2.0);
    if (opts.sigma) {
        if (!(*opts.sigma > 0.0))
            throw invalid_input("confidence_band: sigma must be positive");
        band.sigma = *opts.sigma;
    } else {
        band.sigma = estimate_sigma(K, model, m, opts.exact_dof_for_sigma);
        band.sigma_estimated = true;
    }
    SensitivityCache cache = make_sensitivity_cache(K, model, m);
    std::size_t g = grid.rows();
    band.prediction.resize(g);
    band.stderr_.resize(g);
    band.lower.resize(g);
    band.upper.resize(g);
    parallel_for(g, [&](std::size_t i) {
        Vector kx = center_column(K, kernel_column(K.spec, data.X, grid.row(i)));
        band.prediction[i] = predict(model, kx, m);
        band.stderr_[i] = predictive_stderr(cache, model, K, kx, band.sigma);
        band.lower[i] = band.prediction[i] - band.z * band.stderr_[i];
        band.upper[i] = band.prediction[i] + band.z * band.stderr_[i];
    });
    return band;
}

} // namespace kpls
