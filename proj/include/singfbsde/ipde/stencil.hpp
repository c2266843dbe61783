#pragma once

#include "singfbsde/forward/jump_sampler.hpp"
#include "singfbsde/ipde/grid.hpp"
#include "singfbsde/model/problem.hpp"

namespace singfbsde::ipde {

/// One jump target x_j + beta(x_j, e_k) spread over grid nodes. Off-grid
/// targets sit on the nearest boundary node and keep their position in `target`.
struct StencilEntry {
    std::size_t col = 0;
    double weight = 0.0;
    double target = std::numeric_limits<double>::quiet_NaN();

    bool outside() const { return !std::isnan(target); }
};

/// Cap on out-of-grid values, K (T-t)^(-1/q) (1 + |x|^delta); off when k is infinite.
struct EnvelopeCap {
    double k = kInf;
    double q = 1.0;
    double growth_delta = 0.0;
    double horizon = 1.0;

    bool active() const { return std::isfinite(k); }
    double operator()(double t, double x) const {
        if (!active() || t >= horizon) return kInf;
        return k * std::pow(horizon - t, -1.0 / q) * (1.0 + std::pow(std::abs(x), growth_delta));
    }
};

struct StencilOptions {
    double delta_cut = 1e-3;
    forward::SmallJumpMode small_jump_mode = forward::SmallJumpMode::drop;
    int mark_cells = 16;
    double max_extrapolation = 0.25;  ///< share of jump mass allowed to leave the grid
};

/// Rows of the nonlocal operators split at delta: jumps beyond delta enter in
/// difference form with their compensator moved into the drift, jumps below
/// delta either become extra diffusion or are dropped with their size logged.
struct NonlocalStencil {
    double delta = 0.0;
    forward::SmallJumpMode small_jump_mode = forward::SmallJumpMode::drop;
    std::vector<std::vector<StencilEntry>> i_rows;
    std::vector<std::vector<StencilEntry>> b_rows;
    std::vector<double> jump_mass;         ///< Lambda_j, mass beyond delta
    std::vector<double> gamma_mass;        ///< Gamma_j = sum of B-row weights
    std::vector<double> compensator;       ///< int_{|e|>delta} beta(x_j, e) lambda(de)
    std::vector<double> small_diffusion;   ///< 1/2 int_{|e|<=delta} beta^2 lambda, used by the surrogate
    double dropped_small_jump = 0.0;       ///< max_j of the same quantity when dropped
    double extrapolated_fraction = 0.0;
    double h = 0.0;

    std::size_t size() const { return i_rows.size(); }

    static double row_sum(const std::vector<StencilEntry>& row, std::span<const double> u, std::size_t j,
                          double t = 0.0, const EnvelopeCap& cap = {}) {
        double s = 0.0;
        for (const auto& e : row) {
            double v = u[e.col];
            if (e.outside() && cap.active()) v = std::min(v, cap(t, e.target));
            s += e.weight * (v - u[j]);
        }
        return s;
    }

    /// int_{|e|>delta} [u(x_j + beta) - u(x_j)] lambda(de).
    double jump_difference(std::span<const double> u, std::size_t j, double t = 0.0, const EnvelopeCap& cap = {}) const {
        return row_sum(i_rows[j], u, j, t, cap);
    }

    /// Full I(x_j, u): jump difference, the compensator against the central
    /// gradient, and the small-jump surrogate when enabled.
    double apply_I(std::span<const double> u, std::size_t j) const {
        const std::size_t n = size();
        double grad = 0.0, lap = 0.0;
        if (j > 0 && j + 1 < n) {
            grad = (u[j + 1] - u[j - 1]) / (2.0 * h);
            lap = ((u[j + 1] - u[j]) - (u[j] - u[j - 1])) / (h * h);
        } else if (j + 1 < n) {
            grad = (u[j + 1] - u[j]) / h;
        } else if (j > 0) {
            grad = (u[j] - u[j - 1]) / h;
        }
        return jump_difference(u, j) - compensator[j] * grad + small_diffusion[j] * lap;
    }

    /// B(x_j, u) = int [u(x_j + beta) - u(x_j)] gamma(x_j, e) lambda(de) over |e| > delta.
    double apply_B(std::span<const double> u, std::size_t j, double t = 0.0, const EnvelopeCap& cap = {}) const {
        return row_sum(b_rows[j], u, j, t, cap);
    }
};

namespace detail {

inline void spread(const SpaceGrid& grid, double target, double w, std::vector<StencilEntry>& row, double& outside) {
    if (w == 0.0) return;
    if (target < grid.x_min || target > grid.x_max) {
        row.push_back({target < grid.x_min ? 0 : grid.nx - 1, w, target});
        outside += w;
        return;
    }
    const double pos = (target - grid.x_min) / grid.h;
    auto i = static_cast<std::size_t>(std::floor(pos));
    double frac = pos - static_cast<double>(i);
    // snap targets that sit on a node up to rounding
    if (frac < 1e-9) frac = 0.0;
    if (frac > 1.0 - 1e-9) {
        frac = 0.0;
        ++i;
    }
    if (i >= grid.nx - 1) {
        i = grid.nx - 1;
        frac = 0.0;
    }
    if (frac == 0.0) {
        row.push_back({i, w});
    } else {
        row.push_back({i, w * (1.0 - frac)});
        row.push_back({i + 1, w * frac});
    }
}

}  // namespace detail

template <class Gen>
NonlocalStencil build_nonlocal_stencil(const model::ForwardModel<1>& m, const Gen& gen, const SpaceGrid& grid,
                                       const StencilOptions& opt = {}) {
    require(opt.delta_cut > 0.0, "build_nonlocal_stencil: delta must be > 0");
    require(opt.max_extrapolation >= 0.0 && opt.max_extrapolation <= 1.0,
            "build_nonlocal_stencil: extrapolation cap must lie in [0, 1]");
    const auto large = model::mark_rule(m.levy, opt.delta_cut, false, opt.mark_cells);
    const auto small = model::mark_rule(m.levy, opt.delta_cut, true, opt.mark_cells);
    const std::size_t n = grid.nx;

    NonlocalStencil s;
    s.delta = opt.delta_cut;
    s.small_jump_mode = opt.small_jump_mode;
    s.h = grid.h;
    s.i_rows.resize(n);
    s.b_rows.resize(n);
    s.jump_mass.assign(n, 0.0);
    s.gamma_mass.assign(n, 0.0);
    s.compensator.assign(n, 0.0);
    s.small_diffusion.assign(n, 0.0);

    double total = 0.0, outside = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const Point<1> x{grid.nodes[j]};
        double row_out = 0.0, dummy = 0.0;
        for (std::size_t k = 0; k < large.marks.size(); ++k) {
            const double e = large.marks[k], w = large.weights[k];
            const double beta = m.jump(x, e)[0];
            if (!std::isfinite(beta)) throw NumericalError("nonlocal stencil: non-finite jump at x=" + std::to_string(x[0]));
            const double gamma = gen.gamma(x, e);
            if (!(gamma >= 0.0))
                throw ConfigError("nonlocal stencil: gamma must be >= 0 for a monotone B-row (x=" + std::to_string(x[0]) +
                                  ", e=" + std::to_string(e) + ")");
            s.jump_mass[j] += w;
            s.compensator[j] += w * beta;
            if (beta == 0.0) continue;
            const double target = x[0] + beta;
            detail::spread(grid, target, w, s.i_rows[j], row_out);
            if (gamma > 0.0) {
                s.gamma_mass[j] += w * gamma;
                detail::spread(grid, target, w * gamma, s.b_rows[j], dummy);
            }
        }
        double second = 0.0;
        for (std::size_t k = 0; k < small.marks.size(); ++k) {
            const double beta = m.jump(x, small.marks[k])[0];
            second += small.weights[k] * beta * beta;
        }
        if (opt.small_jump_mode == forward::SmallJumpMode::gaussian_surrogate) s.small_diffusion[j] = 0.5 * second;
        else s.dropped_small_jump = std::max(s.dropped_small_jump, 0.5 * second);
        total += s.jump_mass[j];
        outside += row_out;
    }
    s.extrapolated_fraction = total > 0.0 ? outside / total : 0.0;
    if (s.extrapolated_fraction > opt.max_extrapolation)
        throw ConfigError("nonlocal stencil: " + std::to_string(100.0 * s.extrapolated_fraction) +
                          "% of the jump mass lands outside [" + std::to_string(grid.x_min) + ", " +
                          std::to_string(grid.x_max) + "]; widen the grid");
    return s;
}

}  // namespace singfbsde::ipde
