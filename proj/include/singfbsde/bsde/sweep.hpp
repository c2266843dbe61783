#pragma once

#include "singfbsde/bsde/regression.hpp"
#include "singfbsde/forward/paths.hpp"
#include "singfbsde/model/generator.hpp"

namespace singfbsde::bsde {

template <std::size_t Dim>
struct TruncatedSolution {
    int n = 0;
    std::size_t n_paths = 0;
    std::size_t n_steps = 0;
    std::vector<double> y_vals;       ///< (n_steps + 1) * n_paths, node-major
    std::vector<Point<Dim>> z_vals;   ///< n_steps * n_paths
    std::vector<double> b_vals;       ///< n_steps * n_paths
    std::vector<double> times;
    double u_root = 0.0;
    double std_error = 0.0;
    double theta = 0.5;
    std::size_t clamp_low = 0;
    std::size_t clamp_high = 0;
    std::vector<double> residual_rms;  ///< per step, fit of E[Y_{i+1} | X_i]
    bool degenerate = false;
    bool under_resolved = false;       ///< clamp fraction above 50%

    double y(std::size_t node, std::size_t path) const { return y_vals[node * n_paths + path]; }
    double clamp_fraction() const {
        const double total = static_cast<double>(n_steps * n_paths);
        return total > 0.0 ? static_cast<double>(clamp_low + clamp_high) / total : 0.0;
    }
    double max_y() const { return *std::max_element(y_vals.begin(), y_vals.end()); }
};

struct SweepOptions {
    /// Weight of the implicit y-evaluation of f; empty picks auto_theta from the
    /// sampled Lipschitz constant of f_n.
    std::optional<double> theta;
    double cfl_max = 0.9;
    bool clamp = true;
    unsigned threads = 0;
};

/// Backward least-squares sweep for the truncated BSDE:
///   Y_N = g_n(X_T),
///   EY = E[Y_{i+1} | X_i],  Z_i = E[Y_{i+1} dW_i | X_i] / dt,  B_i = E[Y_{i+1} M_i | X_i] / dt,
///   Y_i - theta dt f_n(Y_i) = EY + (1 - theta) dt f_n(EY)   (Z_i, B_i frozen),
/// then Y_i is clamped to [0, n(T+1)].
template <std::size_t Dim>
TruncatedSolution<Dim> backward_sweep(const forward::PathBundle<Dim>& bundle, const model::Generator<Dim>& gen_n,
                                      const std::function<double(const Point<Dim>&)>& g_n,
                                      const RegressionBasis& basis, const SweepOptions& opt = {}) {
    const std::size_t P = bundle.n_paths, N = bundle.n_steps();
    const double T = bundle.grid.T;
    const int n = gen_n.truncation_level;
    require(n >= 1, "backward_sweep: generator must be truncated");
    const double radius = model::truncation_radius(n, gen_n.horizon > 0.0 ? gen_n.horizon : T);
    const unsigned threads = opt.threads ? opt.threads : default_threads();

    TruncatedSolution<Dim> sol;
    sol.n = n;
    sol.n_paths = P;
    sol.n_steps = N;
    sol.times = bundle.grid.nodes;
    sol.y_vals.assign((N + 1) * P, 0.0);
    sol.z_vals.assign(N * P, Point<Dim>{});
    sol.b_vals.assign(N * P, 0.0);
    sol.residual_rms.assign(N, 0.0);

    if (opt.theta) {
        sol.theta = *opt.theta;
    } else {
        std::vector<Point<Dim>> probe;
        for (std::size_t k = 0; k < std::min<std::size_t>(P, 16); ++k) probe.push_back(bundle.state(N, k));
        probe.push_back(bundle.state(0, 0));
        sol.theta = model::auto_theta(bundle.grid.max_dt(),
                                      model::estimate_lipschitz_y<Dim>(gen_n, T, n, probe, 401), opt.cfl_max);
    }
    require(sol.theta >= 0.0 && sol.theta <= 1.0, "backward_sweep: theta must lie in [0, 1]");

    for (std::size_t p = 0; p < P; ++p) {
        const double v = g_n(bundle.state(N, p));
        if (!std::isfinite(v)) throw NumericalError("backward_sweep: terminal value not finite");
        sol.y_vals[N * P + p] = opt.clamp ? std::clamp(v, 0.0, radius) : v;
    }
    const bool has_m = std::any_of(bundle.m_gamma.begin(), bundle.m_gamma.end(), [](double v) { return v != 0.0; });

    std::vector<double> work(P);
    // Pathwise g_n(X_N) + sum of driver increments: its sample spread gives the
    // Monte Carlo error of u_root including the terminal noise.
    std::vector<double> pathwise(sol.y_vals.begin() + static_cast<std::ptrdiff_t>(N * P), sol.y_vals.end());
    std::size_t low = 0, high = 0;
    const std::size_t n_blocks = (P + forward::kPathBlock - 1) / forward::kPathBlock;
    std::vector<std::size_t> block_low(n_blocks), block_high(n_blocks);

    for (std::size_t i = N; i-- > 0;) {
        const double dt = bundle.grid.dt(i), t = bundle.grid.nodes[i];
        const std::span<const double> next(sol.y_vals.data() + (i + 1) * P, P);
        const RegressionDesign<Dim> design(bundle.node_states(i), basis);
        sol.degenerate = sol.degenerate || design.degenerate();

        const std::vector<double> ey = design.fit(next);
        double res = 0.0;
        for (std::size_t p = 0; p < P; ++p) res += (next[p] - ey[p]) * (next[p] - ey[p]);
        sol.residual_rms[i] = std::sqrt(res / static_cast<double>(P));

        // Y_{i+1} - E_i Y_{i+1} has the same products' conditional mean with far less noise.
        for (std::size_t k = 0; k < Dim; ++k) {
            for (std::size_t p = 0; p < P; ++p) work[p] = (next[p] - ey[p]) * bundle.increment(i, p)[k];
            const auto zk = design.fit(work);
            for (std::size_t p = 0; p < P; ++p) sol.z_vals[i * P + p][k] = zk[p] / dt;
        }
        if (has_m) {
            for (std::size_t p = 0; p < P; ++p) work[p] = (next[p] - ey[p]) * bundle.gamma_functional(i, p);
            const auto bk = design.fit(work);
            for (std::size_t p = 0; p < P; ++p) sol.b_vals[i * P + p] = bk[p] / dt;
        }

        std::fill(block_low.begin(), block_low.end(), 0);
        std::fill(block_high.begin(), block_high.end(), 0);
        parallel_for(n_blocks, threads, [&](std::size_t block) {
            const std::size_t begin = block * forward::kPathBlock, end = std::min(P, begin + forward::kPathBlock);
            for (std::size_t p = begin; p < end; ++p) {
                const auto& x = bundle.state(i, p);
                const auto& z = sol.z_vals[i * P + p];
                const double b = sol.b_vals[i * P + p];
                const double rhs = ey[p] + (1.0 - sol.theta) * dt * gen_n.core(t, x, ey[p], z, b);
                double y = rhs;
                if (sol.theta > 0.0) {
                    const double w = sol.theta * dt;
                    y = solve_increasing([&](double v) { return v - w * gen_n.core(t, x, v, z, b); }, rhs, ey[p]);
                }
                if (!std::isfinite(y))
                    throw NumericalError("backward_sweep: non-finite Y on path " + std::to_string(p));
                if (opt.clamp) {
                    if (y < 0.0) {
                        y = 0.0;
                        ++block_low[block];
                    } else if (y > radius) {
                        y = radius;
                        ++block_high[block];
                    }
                }
                sol.y_vals[i * P + p] = y;
                pathwise[p] += y - ey[p];
            }
        });
        for (std::size_t b = 0; b < n_blocks; ++b) {
            low += block_low[b];
            high += block_high[b];
        }
    }
    sol.clamp_low = low;
    sol.clamp_high = high;
    sol.under_resolved = sol.clamp_fraction() > 0.5;

    double s = 0.0, m1 = 0.0, s2 = 0.0;
    for (std::size_t p = 0; p < P; ++p) {
        s += sol.y_vals[p];
        m1 += pathwise[p];
    }
    sol.u_root = s / static_cast<double>(P);
    m1 /= static_cast<double>(P);
    for (std::size_t p = 0; p < P; ++p) s2 += (pathwise[p] - m1) * (pathwise[p] - m1);
    sol.std_error = P > 1 ? std::sqrt(s2 / static_cast<double>(P - 1) / static_cast<double>(P)) : 0.0;
    return sol;
}

/// Diagnostic E[(int (T-s)^rho (|Z|^2 + B^2 / ||theta||^2) ds)^(ell/2)]; the B part
/// is skipped when ||theta||_L2 = 0.
template <std::size_t Dim>
double zu_weighted_norm(const TruncatedSolution<Dim>& sol, double rho, double ell = 2.0, double theta_l2 = 0.0) {
    require(rho >= 0.0 && rho < 1.0, "zu_weighted_norm: rho must lie in [0, 1)");
    const double T = sol.times.back();
    double acc = 0.0;
    for (std::size_t p = 0; p < sol.n_paths; ++p) {
        double path = 0.0;
        for (std::size_t i = 0; i < sol.n_steps; ++i) {
            const double dt = sol.times[i + 1] - sol.times[i];
            const auto& z = sol.z_vals[i * sol.n_paths + p];
            double q = 0.0;
            for (double v : z) q += v * v;
            if (theta_l2 > 0.0) {
                const double b = sol.b_vals[i * sol.n_paths + p];
                q += b * b / (theta_l2 * theta_l2);
            }
            path += dt * std::pow(T - sol.times[i], rho) * q;
        }
        acc += std::pow(path, ell / 2.0);
    }
    return sol.n_paths ? acc / static_cast<double>(sol.n_paths) : 0.0;
}

}  // namespace singfbsde::bsde
