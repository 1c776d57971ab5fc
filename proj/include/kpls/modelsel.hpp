#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "kernels.hpp"
#include "kpls.hpp"
#include "parallel.hpp"
#include "sensitivity.hpp"

namespace kpls {

/// gMDL with S = rss/(n − dof) and F = (yty − rss)/(dof·S).
inline double gmdl(double rss, double dof, std::size_t n, double yty)
{
    double nn = static_cast<double>(n);
    if (!(dof < nn))
        throw invalid_input("gmdl: dof must be below n (no residual degrees of freedom)");
    if (!(dof > 0.0))
        throw invalid_input("gmdl: dof must be positive");
    if (!(rss >= 0.0))
        throw invalid_input("gmdl: rss must be non-negative");
    if (yty < rss - 1e-9)
        throw invalid_input("gmdl: yty must not be smaller than rss");
    double S = rss / (nn - dof);
    if (S == 0.0)
        return -std::numeric_limits<double>::infinity();
    double F = (yty - rss) / (dof * S);
    if (F > 1.0)
        return 0.5 * nn * std::log(S) + 0.5 * dof * std::log(F) + std::log(nn);
    return 0.5 * nn * std::log(yty / nn) + 0.5 * std::log(nn);
}

struct SelectionGrid {
    std::vector<double> widths;
    std::size_t m_star = 1;
    std::size_t m_max = 1; ///< components used for the D approximation
    KernelKind kind = KernelKind::rbf;
    /// Approximate DoF must change by at most this fraction of max(1, dof) between
    /// ⌈2·m_max/3⌉ and m_max components; other configurations are skipped. nullopt
    /// keeps every configuration.
    std::optional<double> convergence_tol = 0.01;

    void validate(std::size_t n) const
    {
        if (widths.empty())
            throw invalid_input("selection grid has no widths");
        if (m_star < 1 || m_star > m_max || m_max > n)
            throw invalid_input("selection grid needs 1 <= m_star <= m_max <= n");
        if (convergence_tol && !(*convergence_tol >= 0.0))
            throw invalid_input("selection grid convergence tolerance must be non-negative");
    }
};

struct SelectionEntry {
    double width = 0.0;
    std::size_t m = 0;
    double rss = 0.0;
    double dof = 0.0;
    double gmdl = 0.0;
};

struct SelectionReport {
    std::vector<SelectionEntry> entries;
    std::size_t chosen = 0;         ///< index into entries
    std::size_t tied = 0;           ///< other entries within the tie tolerance of the minimum
    std::vector<std::string> notes; ///< skipped configurations and warnings

    const SelectionEntry& best() const { return entries.at(chosen); }
};

/// Values closer than this are ties, resolved by smaller m, then smaller width.
constexpr double kGmdlTieTolerance = 2e-12;

inline bool preferred(const SelectionEntry& a, const SelectionEntry& b)
{
    if (std::abs(a.gmdl - b.gmdl) > kGmdlTieTolerance)
        return a.gmdl < b.gmdl;
    if (a.m != b.m)
        return a.m < b.m;
    return a.width < b.width;
}

/// Grid search over widths × 1..m_star minimizing gMDL. One centered fit per width.
/// With approximate DoF, configurations failing the convergence check are skipped.
inline SelectionReport select(const Dataset& data, const SelectionGrid& grid, bool use_approx_dof = true)
{
    data.validate();
    grid.validate(data.n());
    std::size_t n = data.n();
    std::vector<std::vector<SelectionEntry>> per_width(grid.widths.size());
    std::vector<std::vector<std::string>> per_notes(grid.widths.size());
    parallel_for(grid.widths.size(), [&](std::size_t w) {
        double width = grid.widths[w];
        std::ostringstream os;
        os << width;
        const std::string label = os.str();
        try {
            KernelMatrix K = center(gram(KernelSpec{grid.kind, width}, data.X));
            KplsModel model = fit(K, data.y, grid.m_max);
            double yty = dot(model.targets, model.targets);
            std::optional<ExactSpectrum> spec;
            std::size_t top = std::min(grid.m_star, model.actual_m);
            if (!use_approx_dof)
                spec = exact_spectrum(K, model, top);
            if (model.actual_m < grid.m_star)
                per_notes[w].push_back("width " + label + ": breakdown after " +
                                       std::to_string(model.actual_m) + " components");
            std::size_t coarse = (2 * grid.m_max + 2) / 3;
            std::size_t unconverged = 0;
            double worst_change = 0.0;
            for (std::size_t m = 1; m <= top; ++m) {
                double dof = use_approx_dof ? *dof_approx(K, model, m, grid.m_max).dof_approx
                                            : *dof_exact(*spec, model, m).dof_exact;
                if (use_approx_dof && grid.convergence_tol) {
                    double prev = *dof_approx(K, model, m, std::max(m, coarse)).dof_approx;
                    double change = std::abs(dof - prev) / std::max(1.0, std::abs(dof));
                    if (change > *grid.convergence_tol) {
                        ++unconverged;
                        worst_change = std::max(worst_change, change);
                        continue;
                    }
                }
                double rss = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    double r = model.targets[i] - model.yhat[m - 1][i];
                    rss += r * r;
                }
                if (!(dof > 0.0 && dof < static_cast<double>(n))) {
                    per_notes[w].push_back("width " + label + ", m " + std::to_string(m) +
                                           ": dof " + std::to_string(dof) + " outside (0, n), skipped");
                    continue;
                }
                per_width[w].push_back({width, m, rss, dof, gmdl(rss, dof, n, yty)});
            }
            if (unconverged > 0) {
                std::ostringstream note;
                note << "width " << label << ": approximate DoF not converged at m_max " << grid.m_max << " for "
                     << unconverged << " of " << top << " component counts (relative change up to " << worst_change
                     << "), skipped; raise m_max";
                per_notes[w].push_back(note.str());
            }
        } catch (const error& e) {
            per_notes[w].push_back("width " + label + ": " + e.what());
        }
    });
    SelectionReport rep;
    for (std::size_t w = 0; w < grid.widths.size(); ++w) {
        rep.entries.insert(rep.entries.end(), per_width[w].begin(), per_width[w].end());
        rep.notes.insert(rep.notes.end(), per_notes[w].begin(), per_notes[w].end());
    }
    if (rep.entries.empty()) {
        std::string msg = "selection failed: no usable configuration";
        for (const auto& s : rep.notes)
            msg += "; " + s;
        throw selection_failed(msg);
    }
    for (std::size_t i = 1; i < rep.entries.size(); ++i)
        if (preferred(rep.entries[i], rep.entries[rep.chosen]))
            rep.chosen = i;
    for (std::size_t i = 0; i < rep.entries.size(); ++i)
        if (i != rep.chosen && std::abs(rep.entries[i].gmdl - rep.best().gmdl) <= kGmdlTieTolerance)
            ++rep.tied;
    return rep;
}

} // namespace kpls
