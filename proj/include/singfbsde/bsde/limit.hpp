#pragma once

#include "singfbsde/bsde/sweep.hpp"
#include "singfbsde/model/levy.hpp"

namespace singfbsde::bsde {

template <std::size_t Dim>
struct MonteCarloConfig {
    std::size_t n_paths = 10000;
    std::size_t n_steps = 50;
    double grading = 1.0;  ///< > 1 clusters steps near T
    std::uint64_t seed = 1;
    RegressionBasis basis;
    forward::SimulationOptions<Dim> simulation;
    SweepOptions sweep;
};

struct LevelSummary {
    int n = 0;
    double u_root = 0.0;
    double std_error = 0.0;
    double gap = 0.0;  ///< u_root minus the previous level's value (0 for the first)
    double clamp_fraction = 0.0;
    double zu_norm = 0.0;
    double max_y = 0.0;
    double theta = 0.5;
    bool under_resolved = false;
};

template <std::size_t Dim>
struct LimitSolution {
    std::vector<int> levels;
    std::vector<LevelSummary> summaries;
    double u_limit = 0.0;
    double gap = 0.0;
    bool converged = false;
    bool monotone = true;           ///< u_k <= u_{k+1} + 3 pooled s.e. for every k
    std::vector<std::string> flags;
    /// Solutions per level; kept only when requested.
    std::vector<TruncatedSolution<Dim>> solutions;

    std::vector<double> u_values() const {
        std::vector<double> v;
        for (const auto& s : summaries) v.push_back(s.u_root);
        return v;
    }
};

inline std::vector<int> doubling_schedule(int first, int count) {
    require(first >= 1 && count >= 1, "doubling_schedule: need first >= 1, count >= 1");
    std::vector<int> s;
    for (int k = 0, v = first; k < count; ++k, v *= 2) s.push_back(v);
    return s;
}

/// u_n at the root of an existing bundle along an increasing schedule; every
/// level reuses the same paths. The convergence declaration (last gap <= tol) is heuristic.
template <std::size_t Dim>
LimitSolution<Dim> monotone_limit_on(const forward::PathBundle<Dim>& bundle, const model::ProblemSpec<Dim>& spec,
                                     const std::vector<int>& schedule, double tol, const MonteCarloConfig<Dim>& mc,
                                     bool keep_solutions = false) {
    require(!schedule.empty(), "monotone_limit: empty schedule");
    for (std::size_t k = 0; k < schedule.size(); ++k) {
        require(schedule[k] >= 1, "monotone_limit: levels must be >= 1");
        if (k) require(schedule[k] > schedule[k - 1], "monotone_limit: schedule must be strictly increasing");
    }
    const double T = spec.horizon();
    const auto& grid = bundle.grid;
    require(std::abs(grid.nodes.back() - T) <= 1e-12 * std::max(1.0, T), "monotone_limit: bundle does not end at T");
    const Point<Dim> x = bundle.state(0, 0);

    // One theta for every level, set by the stiffest (largest) level.
    SweepOptions sweep = mc.sweep;
    if (!sweep.theta) {
        const int n_max = schedule.back();
        const auto gen_max = model::truncate_generator(spec.generator, n_max, T);
        std::vector<Point<Dim>> probe;
        for (std::size_t k = 0; k < std::min<std::size_t>(bundle.n_paths, 16); ++k)
            probe.push_back(bundle.state(grid.n_steps(), k));
        probe.push_back(x);
        sweep.theta = model::auto_theta(grid.max_dt(), model::estimate_lipschitz_y<Dim>(gen_max, T, n_max, probe, 401),
                                        sweep.cfl_max);
    }

    const auto rho_check = model::check_rho_condition(spec.generator.q, spec.generator.ell);
    const double rho = rho_check.pass ? rho_check.rho : 0.0;
    const double theta_l2 =
        std::sqrt(model::levy_quadrature(spec.model.levy, [&](double e) { return std::pow(spec.generator.theta(e), 2); }, 0.0));

    LimitSolution<Dim> out;
    out.levels = schedule;
    if (!rho_check.pass) out.flags.push_back("rho condition fails; weighted Z/U norm uses rho = 0");
    for (int n : schedule) {
        const auto gen_n = model::truncate_generator(spec.generator, n, T);
        const auto g_n = model::truncate_terminal(spec.terminal, n);
        auto sol = backward_sweep<Dim>(bundle, gen_n, g_n, mc.basis, sweep);
        LevelSummary s;
        s.n = n;
        s.u_root = sol.u_root;
        s.std_error = sol.std_error;
        s.gap = out.summaries.empty() ? 0.0 : sol.u_root - out.summaries.back().u_root;
        s.clamp_fraction = sol.clamp_fraction();
        s.zu_norm = zu_weighted_norm(sol, rho, spec.generator.ell, theta_l2);
        s.max_y = sol.max_y();
        s.theta = sol.theta;
        s.under_resolved = sol.under_resolved;
        if (sol.under_resolved) out.flags.push_back("level " + std::to_string(n) + ": clamp active on > 50% of nodes");
        if (!out.summaries.empty()) {
            const auto& prev = out.summaries.back();
            const double pooled = std::sqrt(prev.std_error * prev.std_error + s.std_error * s.std_error);
            const double slack = 3.0 * pooled + 1e-12 * std::max(1.0, std::abs(s.u_root));
            if (prev.u_root > s.u_root + slack) {
                out.monotone = false;
                out.flags.push_back("level " + std::to_string(n) + " decreases beyond 3 pooled s.e.");
            }
        }
        out.summaries.push_back(s);
        if (keep_solutions) out.solutions.push_back(std::move(sol));
    }
    out.u_limit = out.summaries.back().u_root;
    out.gap = out.summaries.size() > 1 ? std::abs(out.summaries.back().gap) : kInf;
    out.converged = out.gap <= tol;
    return out;
}

/// u_n(t, x) along an increasing schedule on common random numbers.
template <std::size_t Dim>
LimitSolution<Dim> monotone_limit(const model::ProblemSpec<Dim>& spec, double t, const Point<Dim>& x,
                                  const std::vector<int>& schedule, double tol, const MonteCarloConfig<Dim>& mc,
                                  bool keep_solutions = false) {
    const double T = spec.horizon();
    require(t < T, "monotone_limit: t must be < T");
    const auto grid = forward::TimeGrid::graded(t, T, mc.n_steps, mc.grading);
    auto sim = mc.simulation;
    sim.gamma = spec.generator.gamma;
    const auto bundle = forward::simulate_paths(spec.model, t, x, grid, mc.n_paths, mc.seed, sim);
    return monotone_limit_on(bundle, spec, schedule, tol, mc, keep_solutions);
}

}  // namespace singfbsde::bsde
