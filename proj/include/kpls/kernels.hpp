#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>

#include "errors.hpp"
#include "linalg.hpp"
#include "parallel.hpp"

namespace kpls {

enum class KernelKind { rbf, linear };

struct KernelSpec {
    KernelKind kind = KernelKind::rbf;
    double width = 1.0; ///< rbf length scale

    void validate() const
    {
        if (kind == KernelKind::rbf && !(width > 0.0 && std::isfinite(width)))
            throw invalid_input("rbf kernel width must be positive and finite");
    }
};

inline std::string to_string(KernelKind k) { return k == KernelKind::rbf ? "rbf" : "linear"; }

inline KernelKind parse_kernel_kind(const std::string& s)
{
    if (s == "rbf")
        return KernelKind::rbf;
    if (s == "linear")
        return KernelKind::linear;
    throw invalid_input("unknown kernel '" + s + "' (expected rbf or linear)");
}

/// rbf: exp(−‖x−z‖²/(2 width²)); linear: ⟨x, z⟩.
inline double kernel_eval(const KernelSpec& spec, std::span<const double> x, std::span<const double> z)
{
    if (x.size() != z.size())
        throw invalid_input("kernel_eval: dimension mismatch");
    if (spec.kind == KernelKind::linear)
        return dot(x, z);
    double d2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double d = x[i] - z[i];
        d2 += d * d;
    }
    return std::exp(-d2 / (2.0 * spec.width * spec.width));
}

/// Symmetric Gram matrix with the statistics needed to center new kernel columns.
struct KernelMatrix {
    DenseMatrix entries;
    KernelSpec spec;
    bool centered = false;
    Vector row_means;        ///< row means of the uncentered matrix (set by center)
    double grand_mean = 0.0; ///< mean of all uncentered entries (set by center)

    std::size_t n() const noexcept { return entries.rows(); }
    double operator()(std::size_t i, std::size_t j) const { return entries(i, j); }

    double trace() const
    {
        double t = 0.0;
        for (std::size_t i = 0; i < n(); ++i)
            t += entries(i, i);
        return t;
    }
};

/// Gram matrix over the rows of points. Rows are assembled in parallel; every entry is
/// computed independently, so the result does not depend on the thread count.
inline KernelMatrix gram(const KernelSpec& spec, const DenseMatrix& points)
{
    spec.validate();
    std::size_t n = points.rows();
    if (n == 0)
        throw invalid_input("gram: no points");
    KernelMatrix K{DenseMatrix(n, n), spec, false, {}, 0.0};
    parallel_for(n, [&](std::size_t i) {
        for (std::size_t j = 0; j <= i; ++j)
            K.entries(i, j) = kernel_eval(spec, points.row(i), points.row(j));
    });
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j)
            K.entries(j, i) = K.entries(i, j);
    return K;
}

/// Kernel column k(x) = (k(x, x₁), …, k(x, xₙ)) of a query point.
inline Vector kernel_column(const KernelSpec& spec, const DenseMatrix& points, std::span<const double> x)
{
    if (x.size() != points.cols())
        throw invalid_input("kernel_column: query dimension does not match training points");
    Vector k(points.rows());
    for (std::size_t i = 0; i < points.rows(); ++i)
        k[i] = kernel_eval(spec, points.row(i), x);
    return k;
}

/// Double centering (I − 𝟙𝟙ᵀ/n) K (I − 𝟙𝟙ᵀ/n) in O(n²).
inline KernelMatrix center(const KernelMatrix& K)
{
    if (K.centered)
        throw invalid_state("center: kernel matrix is already centered");
    std::size_t n = K.n();
    KernelMatrix C{K.entries, K.spec, true, Vector(n, 0.0), 0.0};
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (double v : K.entries.row(i))
            s += v;
        C.row_means[i] = s / static_cast<double>(n);
    }
    double g = 0.0;
    for (double v : C.row_means)
        g += v;
    C.grand_mean = g / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            C.entries(i, j) = K.entries(i, j) - C.row_means[i] - C.row_means[j] + C.grand_mean;
    return C;
}

struct CenteredTargets {
    Vector y;
    double mean = 0.0;
};

inline CenteredTargets center_targets(std::span<const double> y)
{
    if (y.empty())
        throw invalid_input("center_targets: empty target vector");
    double s = 0.0;
    for (double v : y)
        s += v;
    CenteredTargets out{Vector(y.begin(), y.end()), s / static_cast<double>(y.size())};
    for (double& v : out.y)
        v -= out.mean;
    return out;
}

/// Applies the training centering to a query column: (I − 𝟙𝟙ᵀ/n)(k − K𝟙/n).
/// Returns k unchanged when K is uncentered.
inline Vector center_column(const KernelMatrix& K, std::span<const double> k)
{
    if (k.size() != K.n())
        throw invalid_input("center_column: length does not match kernel matrix order");
    Vector out(k.begin(), k.end());
    if (!K.centered)
        return out;
    double mk = 0.0;
    for (double v : k)
        mk += v;
    mk /= static_cast<double>(k.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = k[i] - K.row_means[i] - mk + K.grand_mean;
    return out;
}

} // namespace kpls
