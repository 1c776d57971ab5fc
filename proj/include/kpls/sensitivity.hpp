#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "kernels.hpp"
#include "kpls.hpp"
#include "linalg.hpp"
#include "parallel.hpp"

namespace kpls {

/// B with bᵢⱼ = ⟨tᵢ, Kʲy⟩, c = B⁻¹Tᵀy and V = T B⁻ᵀ for the first m components.
struct KrylovMoments {
    UpperTriangular B;
    Vector c;
    std::vector<Vector> V;      ///< n-vectors, one per component
    double lower_max_abs = 0.0; ///< largest |⟨tᵢ, Kʲy⟩|, i > j, before it was zeroed
};

/// Fills B and lower_max_abs only; no solve, so it also works when B is ill-conditioned.
inline KrylovMoments krylov_moment_matrix(const KernelMatrix& K, const KplsModel& model, std::size_t m)
{
    model.require_components(m);
    if (K.n() != model.n)
        throw invalid_input("krylov_moments: kernel matrix does not match model");
    KrylovMoments km;
    km.B = UpperTriangular(m);
    Vector q = model.targets;
    for (std::size_t j = 0; j < m; ++j) {
        q = matvec(K.entries, q);
        for (std::size_t i = 0; i < m; ++i) {
            double b = dot(model.T[i], q);
            if (i <= j)
                km.B.at(i, j) = b;
            else
                km.lower_max_abs = std::max(km.lower_max_abs, std::abs(b));
        }
    }
    return km;
}

inline KrylovMoments krylov_moments(const KernelMatrix& K, const KplsModel& model, std::size_t m)
{
    KrylovMoments km = krylov_moment_matrix(K, model, m);
    Vector ty(m);
    for (std::size_t i = 0; i < m; ++i)
        ty[i] = dot(model.T[i], model.targets);
    try {
        km.c = solve_upper(km.B, ty);
        km.V.assign(m, Vector(model.n, 0.0));
        for (std::size_t j = 0; j < m; ++j) {
            Vector e(m, 0.0);
            e[j] = 1.0;
            Vector col = solve_upper_transposed(km.B, e); // column j of B⁻ᵀ
            for (std::size_t i = 0; i < m; ++i)
                if (col[i] != 0.0)
                    axpy(col[i], model.T[i], km.V[j]);
        }
    } catch (const singular_matrix& e) {
        throw near_breakdown("krylov_moments: B is numerically singular at index " + std::to_string(e.index()) +
                             "; the Krylov vectors are collinear, use fewer components");
    }
    return km;
}

/// How the DoF terms are evaluated.
///  spectral: through the fit polynomial q with ŷₘ = q(K)y, using the eigenbasis of K
///            (exact) or of D (approximate); stable for any m.
///  moments:  through B, c, V and explicit Kʲ powers; loses accuracy quickly beyond
///            m ≈ 6 because the monomial basis Kʲy is nearly collinear.
enum class DofMethod { spectral, moments };

/// Degrees of freedom: dof = term_trace − term_latent + term_residual + plus_m.
struct DofReport {
    std::size_t m = 0;
    std::optional<double> dof_exact;
    std::optional<double> dof_approx;
    std::size_t m_max_used = 0;
    double term_trace = 0.0;    ///< Σⱼ cⱼ trace(Kʲ), or Σⱼ cⱼ trace(Dʲ)
    double term_latent = 0.0;   ///< Σⱼ cⱼ Σₗ tₗᵀKʲtₗ
    double term_residual = 0.0; ///< (y − ŷₘ)ᵀ Σⱼ Kʲvⱼ
    std::size_t plus_m = 0;
    DofMethod method = DofMethod::spectral;
    std::vector<std::string> warnings;

    double value() const { return term_trace - term_latent + term_residual + static_cast<double>(plus_m); }
};

namespace detail {

/// q(λ) = 1 − Πₖ (1 − λ/μₖ), the fit polynomial written through its Ritz roots.
inline double fit_polynomial_from_roots(double lambda, const Vector& ritz)
{
    double p = 1.0;
    for (double mu : ritz)
        p *= 1.0 - lambda / mu;
    return 1.0 - p;
}

inline Vector ritz_values(const KplsModel& model, std::size_t m)
{
    return symtri_eigenvalues(tridiagonal_D(model, m));
}

constexpr double kRatioCutoff = 1e-8;

} // namespace detail

/// Eigenvalues of K and the eigen-coordinates of y, ŷ₁..ŷ_k and t₁..t_k. One O(n³)
/// reduction shared by all exact DoF evaluations with m ≤ k.
struct ExactSpectrum {
    Vector lambda;
    Vector y_coords;
    std::vector<Vector> yhat_coords;
    std::vector<Vector> t_coords;
    double y_norm = 0.0;

    std::size_t components() const noexcept { return t_coords.size(); }
};

inline ExactSpectrum exact_spectrum(const KernelMatrix& K, const KplsModel& model, std::size_t up_to = 0)
{
    if (K.n() != model.n)
        throw invalid_input("exact_spectrum: kernel matrix does not match model");
    if (up_to == 0)
        up_to = model.actual_m;
    model.require_components(up_to);
    std::vector<Vector> xs;
    xs.reserve(2 * up_to + 1);
    xs.push_back(model.targets);
    for (std::size_t j = 0; j < up_to; ++j)
        xs.push_back(model.yhat[j]);
    for (std::size_t j = 0; j < up_to; ++j)
        xs.push_back(model.T[j]);
    SpectralProjection p = symmetric_eigen_project(K.entries, xs);
    ExactSpectrum s;
    s.lambda = std::move(p.values);
    s.y_coords = std::move(p.coords[0]);
    for (std::size_t j = 0; j < up_to; ++j) {
        s.yhat_coords.push_back(std::move(p.coords[1 + j]));
        s.t_coords.push_back(std::move(p.coords[1 + up_to + j]));
    }
    s.y_norm = norm2(model.targets);
    return s;
}

namespace detail {

inline DofReport assemble(std::size_t m, const Vector& q, const Vector& q_lat, const Vector& rho)
{
    DofReport r;
    r.m = m;
    r.plus_m = m;
    for (double v : q)
        r.term_trace += v;
    for (std::size_t i = 0; i < rho.size(); ++i) {
        r.term_latent += q_lat[i] * rho[i];
        r.term_residual += (1.0 - q_lat[i]) * rho[i];
    }
    return r;
}

} // namespace detail

/// Exact DoF from a precomputed spectrum of K.
inline DofReport dof_exact(const ExactSpectrum& spec, const KplsModel& model, std::size_t m)
{
    model.require_components(m);
    if (m > spec.components())
        throw invalid_input("dof_exact: spectrum was prepared for fewer components");
    std::size_t n = spec.lambda.size();
    Vector ritz = detail::ritz_values(model, m);
    Vector q(n), rho(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double z = spec.y_coords[i];
        if (std::abs(z) > detail::kRatioCutoff * spec.y_norm)
            q[i] = spec.yhat_coords[m - 1][i] / z;
        else
            q[i] = detail::fit_polynomial_from_roots(spec.lambda[i], ritz);
        for (std::size_t l = 0; l < m; ++l)
            rho[i] += spec.t_coords[l][i] * spec.t_coords[l][i];
    }
    DofReport r = detail::assemble(m, q, q, rho);
    r.m_max_used = model.actual_m;
    r.dof_exact = r.value();
    return r;
}

namespace detail {

inline DofReport dof_moments(const KernelMatrix& K, const KplsModel& model, std::size_t m, double trace_term)
{
    KrylovMoments km = krylov_moments(K, model, m);
    DofReport r;
    r.m = m;
    r.plus_m = m;
    r.method = DofMethod::moments;
    r.term_trace = trace_term;
    for (std::size_t l = 0; l < m; ++l) {
        Vector z = model.T[l];
        for (std::size_t j = 0; j < m; ++j) {
            z = matvec(K.entries, z);
            r.term_latent += km.c[j] * dot(model.T[l], z);
        }
    }
    Vector z(model.n);
    for (std::size_t i = 0; i < model.n; ++i)
        z[i] = model.targets[i] - model.yhat[m - 1][i];
    for (std::size_t j = 0; j < m; ++j) {
        z = matvec(K.entries, z);
        r.term_residual += dot(z, km.V[j]);
    }
    return r;
}

inline double moments_trace(const Vector& c, const Vector& eigs)
{
    double t = 0.0;
    for (std::size_t j = 0; j < c.size(); ++j)
        t += c[j] * trace_powers(eigs, static_cast<unsigned>(j + 1));
    return t;
}

} // namespace detail

/// Exact (cubic-time) degrees of freedom of the m-component fit.
inline DofReport dof_exact(const KernelMatrix& K, const KplsModel& model, std::size_t m,
                           DofMethod method = DofMethod::spectral)
{
    model.require_components(m);
    if (method == DofMethod::spectral)
        return dof_exact(exact_spectrum(K, model, m), model, m);
    Vector eigs = symmetric_eigenvalues(K.entries);
    KrylovMoments km = krylov_moments(K, model, m);
    DofReport r = detail::dof_moments(K, model, m, detail::moments_trace(km.c, eigs));
    r.m_max_used = model.actual_m;
    r.dof_exact = r.value();
    return r;
}

namespace detail {

/// Fit polynomial and latent weights evaluated at the Ritz pairs of D_M.
struct RitzEvaluation {
    Vector q;
    Vector rho;
};

inline RitzEvaluation ritz_evaluation(const KplsModel& model, std::size_t m, std::size_t M)
{
    TridiagonalEigen eig = symtri_eigen(tridiagonal_D(model, M));
    Vector ritz_m = ritz_values(model, m);
    RitzEvaluation out{Vector(M), Vector(M, 0.0)};
    double s1 = model.resnorms[0];
    double s_next = m < M ? model.resnorms[m] : 0.0;
    for (std::size_t i = 0; i < M; ++i) {
        double mu = eig.values[i];
        double head = eig.vectors(0, i);
        if (m == M)
            out.q[i] = 1.0;
        else if (std::abs(head) > kRatioCutoff)
            out.q[i] = 1.0 - s_next * eig.vectors(m, i) / (s1 * head);
        else
            out.q[i] = fit_polynomial_from_roots(mu, ritz_m);
        // ρᵢ = ‖(L sᵢ)₁..ₘ‖² / μᵢ with L sᵢ banded.
        double acc = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
            double v = model.L(k, k) * eig.vectors(k, i) + (k + 1 < M ? model.L(k, k + 1) * eig.vectors(k + 1, i) : 0.0);
            acc += v * v;
        }
        out.rho[i] = mu > 0.0 ? std::clamp(acc / mu, 0.0, 1.0) : 0.0;
    }
    return out;
}

} // namespace detail

/// Approximate (quadratic-time) degrees of freedom: trace(Kʲ) is replaced by trace(Dʲ)
/// with D = LᵀL over m_max components. The latent and residual terms are exact: they are
/// evaluated on D over max(m_max, ⌈3m/2⌉) components when the model has them.
inline DofReport dof_approx(const KernelMatrix& K, const KplsModel& model, std::size_t m, std::size_t m_max,
                            DofMethod method = DofMethod::spectral)
{
    model.require_components(m);
    if (m_max < m)
        throw invalid_input("dof_approx: m_max must be at least m");
    std::vector<std::string> warnings;
    std::size_t M = m_max;
    if (M > model.actual_m) {
        warnings.push_back("m_max " + std::to_string(m_max) + " truncated to " + std::to_string(model.actual_m) +
                           " components (Krylov space exhausted or fewer components fitted)");
        M = model.actual_m;
    }
    DofReport r;
    if (method == DofMethod::moments) {
        KrylovMoments km = krylov_moments(K, model, m);
        Vector ritz = detail::ritz_values(model, M);
        r = detail::dof_moments(K, model, m, detail::moments_trace(km.c, ritz));
    } else {
        detail::RitzEvaluation trace_eval = detail::ritz_evaluation(model, m, M);
        std::size_t want = (3 * m + 1) / 2;
        std::size_t M_lat = std::min(model.actual_m, std::max(M, want));
        if (M_lat < want && !model.breakdown)
            warnings.push_back("latent term evaluated with " + std::to_string(M_lat) + " < " + std::to_string(want) +
                               " components; it is approximate");
        detail::RitzEvaluation lat_eval = M_lat == M ? trace_eval : detail::ritz_evaluation(model, m, M_lat);
        r = detail::assemble(m, trace_eval.q, lat_eval.q, lat_eval.rho);
    }
    r.m_max_used = M;
    r.warnings = std::move(warnings);
    r.dof_approx = r.value();
    return r;
}

/// Chebyshev polynomial of the first kind by the three-term recurrence.
inline double chebyshev(unsigned order, double x)
{
    if (order == 0)
        return 1.0;
    double prev = 1.0, cur = x;
    for (unsigned l = 1; l < order; ++l) {
        double next = 2.0 * x * cur - prev;
        prev = cur;
        cur = next;
    }
    return cur;
}

struct SaadBoundEntry {
    double lambda = 0.0;
    double mu = 0.0;
    double gap = 0.0;
    double theta = 0.0;
    double kappa = 0.0;
    double gamma = 0.0;
    double bound = 0.0;
};

/// Per-index comparison of Ritz values with eigenvalues of K and the right-hand side of
/// Saad's bound. γᵢ follows the formula (λᵢ − λᵢ₋₁)/(λᵢ₊₁ − λₙ) with λ₀ := λ₁.
struct SaadBoundReport {
    std::vector<SaadBoundEntry> entries;
    bool gamma_as_printed = true;
};

/// spectrum: eigenvalues of K (descending) with coords[0] = Uᵀy for the fitted targets.
inline SaadBoundReport saad_bound(const SpectralProjection& spectrum, const KplsModel& model, std::size_t m)
{
    model.require_components(m);
    if (spectrum.coords.empty() || spectrum.coords[0].size() != spectrum.values.size())
        throw invalid_input("saad_bound: spectrum must carry the eigen-coordinates of y");
    const Vector& lam = spectrum.values;
    const Vector& z = spectrum.coords[0];
    std::size_t n = lam.size();
    if (m > n)
        throw invalid_input("saad_bound: m exceeds the matrix order");
    double ynorm2 = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        ynorm2 += std::max(0.0, lam[i]) * z[i] * z[i];
    if (!(ynorm2 > 0.0))
        throw invalid_input("saad_bound: y has zero K-norm");
    double ynorm = std::sqrt(ynorm2);
    Vector mu = detail::ritz_values(model, m);
    double lam_n = lam[n - 1];
    SaadBoundReport rep;
    for (std::size_t i = 0; i < m; ++i) {
        SaadBoundEntry e;
        e.lambda = lam[i];
        e.mu = mu[i];
        e.gap = lam[i] - mu[i];
        double cosv = std::min(1.0, std::sqrt(std::max(0.0, lam[i])) * std::abs(z[i]) / ynorm);
        e.theta = std::acos(cosv);
        e.kappa = 1.0;
        for (std::size_t j = 0; j < i; ++j)
            e.kappa *= (mu[j] - lam_n) / (mu[j] - lam[i]);
        double prev = i > 0 ? lam[i - 1] : lam[0];
        double next = i + 1 < n ? lam[i + 1] : lam_n;
        double denom = next - lam_n;
        e.gamma = denom != 0.0 ? (lam[i] - prev) / denom : std::numeric_limits<double>::infinity();
        double cheb = chebyshev(static_cast<unsigned>(m - 1 - i), 1.0 + 2.0 * e.gamma);
        double ratio = e.kappa * std::tan(e.theta) / cheb;
        e.bound = (lam[0] - lam_n) * ratio * ratio;
        rep.entries.push_back(e);
    }
    return rep;
}

/// Central-difference Jacobian of ŷₘ with respect to y, refitting per perturbation.
/// Column j = (ŷₘ(y + h eⱼ) − ŷₘ(y − h eⱼ)) / 2h with h = step·‖y‖.
inline DenseMatrix jacobian_fd(const KernelMatrix& K, std::span<const double> y, std::size_t m, double step = 1e-5,
                               FitOptions opts = {})
{
    if (!(step > 0.0))
        throw invalid_input("jacobian_fd: step must be positive");
    std::size_t n = K.n();
    if (y.size() != n)
        throw invalid_input("jacobian_fd: target length does not match kernel matrix order");
    double h = step * norm2(y);
    if (!(h > 0.0))
        throw invalid_input("jacobian_fd: zero target vector");
    DenseMatrix J(n, n);
    parallel_for(n, [&](std::size_t j) {
        Vector yp(y.begin(), y.end()), ym(y.begin(), y.end());
        yp[j] += h;
        ym[j] -= h;
        KplsModel a = fit(K, yp, m, opts);
        KplsModel b = fit(K, ym, m, opts);
        if (a.actual_m < m || b.actual_m < m)
            throw oracle_inconclusive("jacobian_fd: a perturbed fit broke down before " + std::to_string(m) +
                                      " components");
        for (std::size_t i = 0; i < n; ++i)
            J(i, j) = (a.yhat[m - 1][i] - b.yhat[m - 1][i]) / (2.0 * h);
    });
    return J;
}

} // namespace kpls
