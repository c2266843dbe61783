#pragma once

#include "singfbsde/model/levy.hpp"

namespace singfbsde::forward {

using model::levy_quadrature;
using model::LevyMeasureSpec;
using model::MarkRule;

enum class SmallJumpMode { drop, gaussian_surrogate };

/// Finite-activity approximation of lambda: jumps with |e| > delta_cut are a
/// compound Poisson process of rate total_rate, the rest is dropped or
/// replaced by a matched Gaussian.
struct CompoundPoissonApprox {
    double delta_cut = 0.0;
    double total_rate = 0.0;
    double small_jump_variance = 0.0;  ///< int_{|e| <= cut} |e|^2 lambda(de)
    SmallJumpMode small_jump_mode = SmallJumpMode::drop;
    bool empty_support_warning = false;

    MarkRule large;  ///< quadrature of lambda on |e| > cut (compensators, FD stencil)
    MarkRule small;  ///< quadrature of lambda on |e| <= cut (Gaussian surrogate)

    // Sampling table: cumulative masses over cells [cell_lo, cell_hi]; atoms have lo == hi.
    std::vector<double> cdf;
    std::vector<double> cell_lo;
    std::vector<double> cell_hi;

    template <class Rng>
    double sample_mark(Rng& rng) const {
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        const double u = unif(rng) * cdf.back();
        const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
        if (cell_lo[k] == cell_hi[k]) return cell_lo[k];
        return cell_lo[k] + unif(rng) * (cell_hi[k] - cell_lo[k]);
    }
};

inline CompoundPoissonApprox build_jump_sampler(const LevyMeasureSpec& levy, double delta_cut,
                                                SmallJumpMode mode = SmallJumpMode::drop, int mark_cells = 16) {
    require(delta_cut > 0.0, "build_jump_sampler: delta_cut must be > 0");
    CompoundPoissonApprox out;
    out.delta_cut = delta_cut;
    out.small_jump_mode = mode;
    out.total_rate = levy_quadrature(levy, [](double) { return 1.0; }, delta_cut);
    out.large = model::mark_rule(levy, delta_cut, false, mark_cells);
    out.small = model::mark_rule(levy, delta_cut, true, mark_cells);
    out.small_jump_variance = levy.is_zero() ? 0.0 : out.small.integrate([](double e) { return e * e; });
    if (levy.has_density()) {
        // Exact dropped variance; the dyadic rule omits a vanishing neighbourhood of 0.
        const auto& d = levy.density_spec();
        double v = 0.0;
        for (auto [a, b] : model::detail::pieces(d.lo, d.hi, delta_cut, true))
            v += model::detail::integrate_interval([&](double e) { return e * e * d.density(e); }, a, b);
        out.small_jump_variance = v;
    }
    if (!levy.is_zero() && out.total_rate == 0.0 && levy.support_radius() <= delta_cut)
        out.empty_support_warning = true;

    if (levy.has_atoms()) {
        double acc = 0.0;
        for (const auto& a : levy.atom_list()) {
            if (a.mass > 0.0 && std::abs(a.mark) > delta_cut) {
                acc += a.mass;
                out.cdf.push_back(acc);
                out.cell_lo.push_back(a.mark);
                out.cell_hi.push_back(a.mark);
            }
        }
    } else if (levy.has_density() && out.total_rate > 0.0) {
        const auto& d = levy.density_spec();
        constexpr int kCells = 1024;
        double total_width = 0.0;
        const auto parts = model::detail::pieces(d.lo, d.hi, delta_cut, false);
        for (auto [a, b] : parts) total_width += b - a;
        double acc = 0.0;
        for (auto [a, b] : parts) {
            const int n = std::max(1, static_cast<int>(std::round(kCells * (b - a) / total_width)));
            const double w = (b - a) / n;
            for (int c = 0; c < n; ++c) {
                const double lo = a + c * w, hi = c + 1 == n ? b : a + (c + 1) * w;
                // 2-point Gauss-Legendre cell mass.
                const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo), off = half / std::sqrt(3.0);
                acc += half * (d.density(mid - off) + d.density(mid + off));
                out.cdf.push_back(acc);
                out.cell_lo.push_back(lo);
                out.cell_hi.push_back(hi);
            }
        }
    }
    return out;
}

}  // namespace singfbsde::forward
