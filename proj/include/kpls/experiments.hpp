#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "data.hpp"
#include "errors.hpp"
#include "intervals.hpp"
#include "kernels.hpp"
#include "kpls.hpp"
#include "modelsel.hpp"
#include "parallel.hpp"
#include "sensitivity.hpp"

namespace kpls {

struct ExperimentConfig {
    std::uint64_t seed = 1;
    std::size_t n = 100;
    double sigma = 0.1;
    std::vector<double> widths{0.01, 0.1, 1.0};
    std::size_t m = 10;
    std::size_t m_star = 15;
    std::size_t m_max = 30;
    std::vector<std::size_t> m_max_values{5, 10, 15, 20, 25, 30};
    std::vector<std::size_t> ladder{200, 400, 800, 1600};
    double level = 0.98;
    std::string dataset = "sinc"; ///< sinc | polymix | kinlike | csv:<path>
    KernelKind kernel = KernelKind::rbf;
    bool force = false;

    void validate() const
    {
        if (n < 1 || m < 1 || m_star < 1 || m_max < 1)
            throw invalid_input("counts must be at least 1");
        if (!(sigma >= 0.0))
            throw invalid_input("sigma must be non-negative");
        if (!(level > 0.0 && level < 1.0))
            throw invalid_input("level must lie in (0, 1)");
        for (double w : widths)
            if (!(w > 0.0))
                throw invalid_input("widths must be positive");
    }
};

inline Dataset make_dataset(const ExperimentConfig& cfg)
{
    const std::string& src = cfg.dataset;
    if (src == "sinc")
        return synth_sinc(cfg.n, cfg.sigma, cfg.seed);
    if (src == "polymix")
        return synth_polymix(cfg.n, cfg.seed);
    if (src == "kinlike")
        return synth_kinlike(cfg.n, cfg.seed);
    if (src.rfind("csv:", 0) == 0)
        return load_csv(src.substr(4));
    throw invalid_input("unknown dataset '" + src + "' (expected sinc, polymix, kinlike or csv:<path>)");
}

constexpr std::size_t kExactOracleLimit = 500;

struct DofRow {
    double width = 0.0;
    std::size_t m_max = 0;
    std::size_t m = 0;
    double dof_exact = 0.0;
    double dof_approx = 0.0;
    std::optional<double> gmdl_exact;
    std::optional<double> gmdl_approx;
};

/// Exact versus approximate DoF over widths × m_max values × m = 1..m_star. For m above
/// an m_max value the approximation uses m components.
inline std::vector<DofRow> run_dof_experiment(const ExperimentConfig& cfg)
{
    cfg.validate();
    Dataset data = make_dataset(cfg);
    data.validate();
    std::size_t n = data.n();
    if (n > kExactOracleLimit && !cfg.force)
        throw invalid_input("dof experiment needs the cubic exact DoF; n = " + std::to_string(n) + " exceeds " +
                            std::to_string(kExactOracleLimit) + " (pass --force to run anyway)");
    std::size_t top = cfg.m_star;
    for (std::size_t v : cfg.m_max_values)
        top = std::max(top, v);
    top = std::min(n, std::max(top, (3 * cfg.m_star + 1) / 2));
    std::vector<DofRow> rows;
    for (double width : cfg.widths) {
        KernelMatrix K = center(gram(KernelSpec{cfg.kernel, width}, data.X));
        KplsModel model = fit(K, data.y, top);
        std::size_t ms = std::min(cfg.m_star, model.actual_m);
        ExactSpectrum spec = exact_spectrum(K, model, ms);
        double yty = dot(model.targets, model.targets);
        std::vector<double> exact(ms + 1), rss(ms + 1);
        for (std::size_t m = 1; m <= ms; ++m) {
            exact[m] = *dof_exact(spec, model, m).dof_exact;
            for (std::size_t i = 0; i < n; ++i) {
                double r = model.targets[i] - model.yhat[m - 1][i];
                rss[m] += r * r;
            }
        }
        auto criterion = [&](double dof, std::size_t m) -> std::optional<double> {
            if (!(dof > 0.0 && dof < static_cast<double>(n)))
                return std::nullopt;
            return gmdl(rss[m], dof, n, yty);
        };
        for (std::size_t mmax : cfg.m_max_values) {
            for (std::size_t m = 1; m <= cfg.m_star; ++m) {
                DofRow row{width, mmax, m, std::numeric_limits<double>::quiet_NaN(),
                           std::numeric_limits<double>::quiet_NaN(), std::nullopt, std::nullopt};
                if (m <= ms) {
                    row.dof_exact = exact[m];
                    row.dof_approx = *dof_approx(K, model, m, std::max(m, mmax)).dof_approx;
                    row.gmdl_exact = criterion(row.dof_exact, m);
                    row.gmdl_approx = criterion(row.dof_approx, m);
                }
                rows.push_back(row);
            }
        }
    }
    return rows;
}

struct RuntimeRecord {
    std::size_t n = 0;
    std::string variant; ///< exact | approx
    double seconds = 0.0;
    std::size_t components = 0;
};

/// Slopes are least-squares fits of log time on log n over every rung but the
/// smallest (all rungs when there are only two).
struct RuntimeBenchmark {
    std::vector<RuntimeRecord> records;
    double slope_exact = 0.0;
    double slope_approx = 0.0;
};

namespace detail {

/// Wall time of fn; repeats internally when a single call is below timer resolution.
template <typename Fn>
double time_call(Fn&& fn)
{
    using clock = std::chrono::steady_clock;
    std::size_t reps = 1;
    while (true) {
        auto t0 = clock::now();
        for (std::size_t r = 0; r < reps; ++r)
            fn();
        double s = std::chrono::duration<double>(clock::now() - t0).count();
        if (s >= 0.01 || reps >= (1u << 20))
            return s / static_cast<double>(reps);
        reps *= 10;
    }
}

/// Fastest of five timed runs after one discarded warm-up run.
template <typename Fn>
double best_time(Fn&& fn)
{
    fn();
    double best = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 5; ++k)
        best = std::min(best, time_call(fn));
    return best;
}

inline double loglog_slope(const std::vector<double>& ns, const std::vector<double>& ts)
{
    std::size_t k = ns.size();
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < k; ++i) {
        mx += std::log(ns[i]);
        my += std::log(ts[i]);
    }
    mx /= static_cast<double>(k);
    my /= static_cast<double>(k);
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < k; ++i) {
        double dx = std::log(ns[i]) - mx;
        sxy += dx * (std::log(ts[i]) - my);
        sxx += dx * dx;
    }
    return sxx > 0 ? sxy / sxx : std::numeric_limits<double>::quiet_NaN();
}

} // namespace detail

/// Runtime of fit + exact DoF (m components) against fit with m_max components +
/// approximate DoF, on nested sub-samples. The kernel matrix is built outside the timer.
/// Runs single-threaded.
inline RuntimeBenchmark run_runtime_benchmark(const ExperimentConfig& cfg)
{
    cfg.validate();
    std::vector<std::size_t> ladder = cfg.ladder;
    if (ladder.empty() || !std::is_sorted(ladder.begin(), ladder.end()) ||
        std::adjacent_find(ladder.begin(), ladder.end()) != ladder.end())
        throw invalid_input("benchmark ladder must be strictly ascending");
    ExperimentConfig big = cfg;
    big.n = ladder.back();
    Dataset all = make_dataset(big);
    if (all.n() < ladder.back())
        throw invalid_input("dataset has fewer rows than the largest sub-sample size");
    ScopedThreadLimit single(1);
    double width = cfg.widths.empty() ? 1.0 : cfg.widths.back();
    RuntimeBenchmark out;
    std::vector<double> ns, te, ta;
    for (std::size_t n : ladder) {
        Dataset d = head(all, n);
        KernelMatrix K = center(gram(KernelSpec{cfg.kernel, width}, d.X));
        std::size_t m = std::min(cfg.m, n);
        std::size_t mmax = std::min(std::max(cfg.m_max, m), n);
        std::size_t fitted_exact = 0, fitted_approx = 0;
        double t_exact = detail::best_time([&] {
            KplsModel model = fit(K, d.y, m);
            fitted_exact = model.actual_m;
            (void)dof_exact(K, model, std::min(m, model.actual_m));
        });
        double t_approx = detail::best_time([&] {
            KplsModel model = fit(K, d.y, mmax);
            fitted_approx = model.actual_m;
            (void)dof_approx(K, model, std::min(m, model.actual_m), mmax);
        });
        out.records.push_back({n, "exact", t_exact, fitted_exact});
        out.records.push_back({n, "approx", t_approx, fitted_approx});
        ns.push_back(static_cast<double>(n));
        te.push_back(t_exact);
        ta.push_back(t_approx);
    }
    if (ns.size() >= 2) {
        std::size_t from = ns.size() > 2 ? 1 : 0;
        std::vector<double> un(ns.begin() + static_cast<std::ptrdiff_t>(from), ns.end());
        out.slope_exact = detail::loglog_slope(un, {te.begin() + static_cast<std::ptrdiff_t>(from), te.end()});
        out.slope_approx = detail::loglog_slope(un, {ta.begin() + static_cast<std::ptrdiff_t>(from), ta.end()});
    } else {
        out.slope_exact = out.slope_approx = std::numeric_limits<double>::quiet_NaN();
    }
    return out;
}

struct BandModel {
    std::string label;
    double width = 0.0;
    std::size_t m = 0;
    ConfidenceBand band;
};

struct CiDemo {
    Dataset data;
    std::vector<BandModel> models;
};

/// Evenly spaced 1-D grid with the given number of points.
inline DenseMatrix line_grid(double lo, double hi, std::size_t points)
{
    if (points < 2)
        throw invalid_input("line_grid needs at least two points");
    DenseMatrix g(points, 1);
    for (std::size_t i = 0; i < points; ++i)
        g(i, 0) = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
    return g;
}

/// Bands of the models (15 components, width 0.1) and (9 components, width 1) on the
/// mixture data, using the generating noise level unless sigma is given.
inline CiDemo run_ci_demo(std::uint64_t seed, double level = 0.98, std::optional<double> sigma = 1.0,
                          std::size_t n = 40, const DenseMatrix& grid = line_grid(-6.0, 7.0, 261))
{
    CiDemo demo{synth_polymix(n, seed), {}};
    struct Setting {
        const char* label;
        double width;
        std::size_t m;
    };
    for (Setting s : {Setting{"m15_w0.1", 0.1, 15}, Setting{"m9_w1", 1.0, 9}}) {
        KernelMatrix K = center(gram(KernelSpec{KernelKind::rbf, s.width}, demo.data.X));
        KplsModel model = fit(K, demo.data.y, s.m);
        std::size_t m = std::min(s.m, model.actual_m);
        BandOptions opts;
        opts.sigma = sigma;
        demo.models.push_back({s.label, s.width, m, confidence_band(model, K, demo.data, grid, m, level, opts)});
    }
    return demo;
}

struct BandDensity {
    std::size_t near_points = 0;
    std::size_t far_points = 0;
    double near_median = std::numeric_limits<double>::quiet_NaN();
    double far_median = std::numeric_limits<double>::quiet_NaN();

    /// far/near median stderr; NaN when either region is empty.
    double ratio() const { return far_median / near_median; }
};

namespace detail {

inline double median(std::vector<double> v)
{
    if (v.empty())
        return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    std::size_t h = v.size() / 2;
    return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

} // namespace detail

/// Median stderr of 1-D grid points within near_radius of a cluster center against points
/// whose distance to every training input lies in [lo, hi] width units.
inline BandDensity band_density(const Dataset& data, const BandModel& bm, const std::vector<double>& centers,
                                double near_radius = 0.5, double lo = 1.5, double hi = 3.0)
{
    if (data.dim() != 1 || bm.band.points.cols() != 1)
        throw invalid_input("band_density expects 1-D inputs");
    std::vector<double> near, far;
    for (std::size_t g = 0; g < bm.band.points.rows(); ++g) {
        double x = bm.band.points(g, 0);
        double nearest = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < data.n(); ++i)
            nearest = std::min(nearest, std::abs(x - data.X(i, 0)));
        double u = nearest / bm.width;
        bool near_center = false;
        for (double c : centers)
            near_center = near_center || std::abs(x - c) <= near_radius;
        if (near_center)
            near.push_back(bm.band.stderr_[g]);
        if (u >= lo && u <= hi)
            far.push_back(bm.band.stderr_[g]);
    }
    return {near.size(), far.size(), detail::median(near), detail::median(far)};
}

} // namespace kpls
