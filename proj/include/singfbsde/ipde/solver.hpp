#pragma once

#include "singfbsde/forward/time_grid.hpp"
#include "singfbsde/ipde/scheme.hpp"
#include "singfbsde/model/generator.hpp"

namespace singfbsde::ipde {

/// u on [time node x space node], row-major in time.
struct IpdeSolution {
    SpaceGrid grid;
    std::vector<double> times;
    std::vector<double> u;
    int n = 0;                           ///< truncation level
    double delta = 0.0;
    double max_dt = 0.0;
    std::vector<double> theta;           ///< per step
    double max_cfl = 0.0;
    double lip_y = 0.0;
    std::size_t bound_violations = 0;    ///< entries above n(T+1)
    std::size_t negative_violations = 0; ///< entries below 0
    double worst_bound_excess = 0.0;
    std::size_t max_principle_violations = 0;  ///< outside [min, max] of the later row widened by dt sup|f_n(.,0)|
    double dropped_small_jump = 0.0;
    double extrapolated_fraction = 0.0;

    std::size_t nt() const { return times.size() - 1; }
    std::size_t nx() const { return grid.nx; }
    std::span<const double> row(std::size_t i) const { return {u.data() + i * grid.nx, grid.nx}; }
    double at(std::size_t i, std::size_t j) const { return u[i * grid.nx + j]; }
    double sup_norm() const {
        double m = 0.0;
        for (double v : u) m = std::max(m, std::abs(v));
        return m;
    }

    /// Bilinear interpolation in (t, x).
    double value(double t, double x) const {
        require(t >= times.front() && t <= times.back(), "IpdeSolution::value: t outside the time grid");
        const auto it = std::upper_bound(times.begin(), times.end(), t);
        std::size_t i = static_cast<std::size_t>(it - times.begin());
        if (i == 0) i = 1;
        if (i >= times.size()) i = times.size() - 1;
        const double w = (t - times[i - 1]) / (times[i] - times[i - 1]);
        return (1.0 - w) * grid.interpolate(row(i - 1), x) + w * grid.interpolate(row(i), x);
    }

    /// Index of the time node nearest to t.
    std::size_t time_index(double t) const {
        std::size_t best = 0;
        for (std::size_t i = 1; i < times.size(); ++i)
            if (std::abs(times[i] - t) < std::abs(times[best] - t)) best = i;
        return best;
    }
};

struct IpdeOptions {
    double t0 = 0.0;
    double grading = 1.0;  ///< time-grid grading power, > 1 clusters steps near T
    StencilOptions stencil;
    double cfl_max = 0.9;
    std::optional<double> theta;
    std::optional<double> lip_y;
    double envelope_k = kInf;
    double gap_epsilon = 0.05;  ///< singular solve: gaps measured on t <= T - epsilon
    unsigned threads = 0;
};

namespace detail {

inline std::vector<Point<1>> lipschitz_probe(const SpaceGrid& grid) {
    std::vector<Point<1>> probe;
    const std::size_t stride = std::max<std::size_t>(1, grid.nx / 16);
    for (std::size_t j = 0; j < grid.nx; j += stride) probe.push_back({grid.nodes[j]});
    probe.push_back({grid.x_max});
    return probe;
}

}  // namespace detail

/// Level-n solve with terminal row g ^ n. Bounds 0 <= u <= n(T+1) are
/// checked and reported, never enforced.
inline IpdeSolution solve_truncated_ipde(const model::ProblemSpec<1>& spec, int n, const SpaceGrid& grid,
                                         std::size_t nt, const IpdeOptions& opt = {}) {
    const double T = spec.horizon();
    require(n >= 1, "solve_truncated_ipde: n must be >= 1");
    require(opt.t0 < T, "solve_truncated_ipde: t0 must be < T");
    const auto tg = forward::TimeGrid::graded(opt.t0, T, nt, opt.grading);
    const auto gen_n = model::truncate_generator(spec.generator, n, T);
    const auto g_n = model::truncate_terminal(spec.terminal, n);
    const auto st = build_nonlocal_stencil(spec.model, gen_n, grid, opt.stencil);
    const auto coef = node_coefficients(spec.model, st, grid);
    const double radius = model::truncation_radius(n, T);

    IpdeSolution sol;
    sol.grid = grid;
    sol.times = tg.nodes;
    sol.n = n;
    sol.delta = st.delta;
    sol.max_dt = tg.max_dt();
    sol.dropped_small_jump = st.dropped_small_jump;
    sol.extrapolated_fraction = st.extrapolated_fraction;
    sol.lip_y = opt.lip_y ? *opt.lip_y : model::estimate_lipschitz_y<1>(gen_n, T, n, detail::lipschitz_probe(grid), 401);
    sol.u.assign((nt + 1) * grid.nx, 0.0);
    sol.theta.assign(nt, 0.0);

    auto check_row = [&](std::size_t i) {
        for (double v : sol.row(i)) {
            if (!std::isfinite(v)) throw NumericalError("ipde: non-finite value at time node " + std::to_string(i));
            const double tol = 1e-12 * radius;
            if (v < -tol) {
                ++sol.negative_violations;
                sol.worst_bound_excess = std::max(sol.worst_bound_excess, -v);
            } else if (v > radius + tol) {
                ++sol.bound_violations;
                sol.worst_bound_excess = std::max(sol.worst_bound_excess, v - radius);
            }
        }
    };

    for (std::size_t j = 0; j < grid.nx; ++j) {
        const double v = g_n(Point<1>{grid.nodes[j]});
        if (!std::isfinite(v)) throw NumericalError("ipde: terminal value not finite at x=" + std::to_string(grid.nodes[j]));
        sol.u[nt * grid.nx + j] = v;
    }
    check_row(nt);

    StepOptions so;
    so.theta = opt.theta;
    so.cfl_max = opt.cfl_max;
    so.lip_y = sol.lip_y;
    so.threads = opt.threads;
    so.cap = EnvelopeCap{opt.envelope_k, spec.generator.q, spec.generator.growth_delta, T};
    double c0 = 0.0;
    for (std::size_t j = 0; j < grid.nx; ++j)
        c0 = std::max(c0, std::abs(gen_n.core(T, Point<1>{grid.nodes[j]}, 0.0, Point<1>{}, 0.0)));

    for (std::size_t i = nt; i-- > 0;) {
        const double dt = tg.dt(i), t = tg.nodes[i];
        StepReport rep;
        auto next = imex_step(sol.row(i + 1), st, gen_n, coef, grid, dt, t, so, &rep);
        sol.theta[i] = rep.theta;
        sol.max_cfl = std::max(sol.max_cfl, rep.cfl_ratio);
        const auto prev = sol.row(i + 1);
        const auto [lo, hi] = std::minmax_element(prev.begin(), prev.end());
        const double slack = c0 * dt + 1e-12 * std::max(1.0, std::max(std::abs(*lo), std::abs(*hi)));
        // The lower side only holds when f_n does not depend on y.
        const bool two_sided = sol.lip_y == 0.0;
        for (double v : next)
            if ((two_sided && v < *lo - slack) || v > *hi + slack) ++sol.max_principle_violations;
        std::copy(next.begin(), next.end(), sol.u.begin() + static_cast<std::ptrdiff_t>(i * grid.nx));
        check_row(i);
    }
    return sol;
}

/// Ulp-level allowance for comparisons between two solutions that exact
/// arithmetic orders; rounding in the implicit solves can cross by a few ulp.
inline double comparison_slack(double scale) { return 16.0 * std::numeric_limits<double>::epsilon() * scale; }

struct Comparison {
    double worst = 0.0;  ///< max(u - u') over nodes
    double slack = 0.0;
    std::size_t time_node = 0, space_node = 0;
    bool ordered() const { return worst <= slack; }
};

/// Checks u <= u' node-wise.
inline Comparison compare_solutions(const IpdeSolution& a, const IpdeSolution& b) {
    require(a.u.size() == b.u.size() && a.grid.nx == b.grid.nx, "compare_solutions: grids differ");
    Comparison c;
    c.worst = -kInf;
    for (std::size_t k = 0; k < a.u.size(); ++k) {
        const double d = a.u[k] - b.u[k];
        if (d > c.worst) {
            c.worst = d;
            c.time_node = k / a.grid.nx;
            c.space_node = k % a.grid.nx;
        }
    }
    c.slack = comparison_slack(std::max(a.sup_norm(), b.sup_norm()));
    return c;
}

struct SingularIpdeResult {
    std::vector<int> schedule;
    std::vector<double> gaps;  ///< sup over t <= T - epsilon of u_k - u_{k-1}; 0 for the first level
    double epsilon = 0.0;
    bool converged = false;
    double worst_monotone = 0.0;  ///< max over levels of (u_k - u_{k+1}), <= 0 when ordered
    double monotone_slack = 0.0;
    IpdeSolution solution;             ///< the last level
    std::vector<IpdeSolution> levels;  ///< every level when kept
};

/// u_n along an increasing schedule with one theta per step shared by all levels;
/// the levels must be ordered node-wise, otherwise the scheme is broken.
inline SingularIpdeResult solve_singular_ipde(const model::ProblemSpec<1>& spec, const SpaceGrid& grid, std::size_t nt,
                                              const std::vector<int>& schedule, double tol, IpdeOptions opt = {},
                                              bool keep_levels = false) {
    require(!spec.terminal.singular.empty(), "solve_singular_ipde: terminal data has no singular set");
    require(!schedule.empty(), "solve_singular_ipde: empty schedule");
    for (std::size_t k = 0; k < schedule.size(); ++k) {
        require(schedule[k] >= 1, "solve_singular_ipde: levels must be >= 1");
        if (k) require(schedule[k] > schedule[k - 1], "solve_singular_ipde: schedule must be strictly increasing");
    }
    require(opt.gap_epsilon >= 0.0, "solve_singular_ipde: epsilon must be >= 0");
    const double T = spec.horizon();
    if (!opt.lip_y) {
        const int n_max = schedule.back();
        opt.lip_y = model::estimate_lipschitz_y<1>(model::truncate_generator(spec.generator, n_max, T), T, n_max,
                                                   detail::lipschitz_probe(grid), 401);
    }

    SingularIpdeResult out;
    out.schedule = schedule;
    out.epsilon = opt.gap_epsilon;
    out.worst_monotone = -kInf;
    std::optional<IpdeSolution> prev;
    for (int n : schedule) {
        auto sol = solve_truncated_ipde(spec, n, grid, nt, opt);
        double gap = 0.0;
        if (prev) {
            const auto cmp = compare_solutions(*prev, sol);
            out.worst_monotone = std::max(out.worst_monotone, cmp.worst);
            out.monotone_slack = std::max(out.monotone_slack, cmp.slack);
            if (!cmp.ordered())
                throw NumericalError("ipde levels not monotone: u_" + std::to_string(prev->n) + " exceeds u_" +
                                     std::to_string(n) + " by " + std::to_string(cmp.worst) + " at t=" +
                                     std::to_string(sol.times[cmp.time_node]) +
                                     ", x=" + std::to_string(grid.nodes[cmp.space_node]));
            for (std::size_t i = 0; i < sol.times.size(); ++i) {
                if (sol.times[i] > T - opt.gap_epsilon) break;
                for (std::size_t j = 0; j < grid.nx; ++j) gap = std::max(gap, std::abs(sol.at(i, j) - prev->at(i, j)));
            }
        }
        out.gaps.push_back(gap);
        if (keep_levels) out.levels.push_back(sol);
        prev = std::move(sol);
    }
    if (out.worst_monotone == -kInf) out.worst_monotone = 0.0;
    out.converged = schedule.size() > 1 && out.gaps.back() <= tol;
    out.solution = std::move(*prev);
    return out;
}

}  // namespace singfbsde::ipde
