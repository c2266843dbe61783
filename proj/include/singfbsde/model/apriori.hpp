#pragma once

#include "singfbsde/forward/paths.hpp"
#include "singfbsde/model/problem.hpp"

namespace singfbsde::model {

struct AprioriBound {
    double bound = 0.0;      ///< K_cal (T-t)^(-1-1/q) E[int ...]^(1/ell)
    double integral = 0.0;   ///< MC estimate of the expectation
    std::optional<double> sharp;  ///< (q a0 (T-t))^(-1/q) when a is constant and f0 = 0
};

struct AprioriOptions {
    std::size_t n_paths = 2000;
    std::size_t n_steps = 50;
    std::uint64_t seed = 7;
};

/// Sharp constant-coefficient bound (q a0 (T - t))^(-1/q).
inline double sharp_apriori_bound(double q, double a0, double remaining) {
    require(remaining > 0.0, "sharp_apriori_bound: need t < T");
    return std::pow(q * a0 * remaining, -1.0 / q);
}

template <std::size_t Dim>
AprioriBound apriori_bound(const ProblemSpec<Dim>& spec, double t, const Point<Dim>& x, double k_cal = 1.0,
                           const AprioriOptions& opt = {}) {
    const double T = spec.horizon();
    if (!(t < T)) throw DomainError("apriori_bound: t must be < T");
    const auto& gen = spec.generator;
    const double q = gen.q, ell = gen.ell;
    const auto grid = forward::TimeGrid::uniform(t, T, opt.n_steps);
    forward::SimulationOptions<Dim> so;
    const auto paths = forward::simulate_paths(spec.model, t, x, grid, opt.n_paths, opt.seed, so);
    double acc = 0.0;
    for (std::size_t p = 0; p < paths.n_paths; ++p) {
        for (std::size_t i = 0; i < grid.n_steps(); ++i) {
            const double r = grid.nodes[i];
            const auto& X = paths.state(i, p);
            const double h = std::pow(1.0 / (q * gen.decay(r, X)), 1.0 / q) +
                             std::pow(T - r, 1.0 + 1.0 / q) * gen.f0(r, X);
            acc += grid.dt(i) * std::pow(h, ell);
        }
    }
    AprioriBound out;
    out.integral = acc / static_cast<double>(paths.n_paths);
    out.bound = k_cal * std::pow(T - t, -1.0 - 1.0 / q) * std::pow(out.integral, 1.0 / ell);
    if (gen.constant_decay && gen.f0_is_zero) out.sharp = sharp_apriori_bound(q, *gen.constant_decay, T - t);
    return out;
}

}  // namespace singfbsde::model
