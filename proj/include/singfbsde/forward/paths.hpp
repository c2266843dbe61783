#pragma once

#include "singfbsde/forward/jump_sampler.hpp"
#include "singfbsde/forward/time_grid.hpp"
#include "singfbsde/model/problem.hpp"

namespace singfbsde::forward {

/// Forward paths plus the interval functionals used by the backward regression.
/// Storage is node-major: all paths of node i are contiguous.
template <std::size_t Dim>
struct PathBundle {
    using State = Point<Dim>;

    TimeGrid grid;
    std::size_t n_paths = 0;
    std::uint64_t seed = 0;
    double delta_cut = 0.0;
    double total_rate = 0.0;
    double small_jump_variance = 0.0;
    SmallJumpMode small_jump_mode = SmallJumpMode::drop;

    std::vector<State> x;          ///< (n_steps + 1) * n_paths
    std::vector<State> dw;         ///< n_steps * n_paths
    std::vector<double> m_gamma;   ///< n_steps * n_paths
    std::uint64_t jump_count = 0;

    std::size_t n_steps() const { return grid.n_steps(); }
    const State& state(std::size_t node, std::size_t path) const { return x[node * n_paths + path]; }
    const State& increment(std::size_t step, std::size_t path) const { return dw[step * n_paths + path]; }
    double gamma_functional(std::size_t step, std::size_t path) const { return m_gamma[step * n_paths + path]; }

    std::span<const State> node_states(std::size_t node) const {
        return {x.data() + node * n_paths, n_paths};
    }
};

template <std::size_t Dim>
struct SimulationOptions {
    double delta_cut = 1e-3;
    SmallJumpMode small_jump_mode = SmallJumpMode::drop;
    int mark_cells = 16;
    unsigned threads = 0;  ///< 0 = default_threads()
    /// gamma(x, e) for the compensated functional M_i; null leaves m_gamma at 0.
    std::function<double(const Point<Dim>&, double)> gamma;
};

inline constexpr std::size_t kPathBlock = 1024;

/// Euler scheme for the forward jump SDE started at (t, x) on `grid`. Jumps
/// are binned into their step with beta frozen at the left endpoint; the
/// compensator uses the quadrature rule of lambda beyond delta_cut.
template <std::size_t Dim>
PathBundle<Dim> simulate_paths(const model::ForwardModel<Dim>& m, double t, const Point<Dim>& x0,
                               const TimeGrid& grid, std::size_t n_paths, std::uint64_t seed,
                               const SimulationOptions<Dim>& opt = {}) {
    require(n_paths >= 1, "simulate_paths: n_paths must be >= 1");
    require(std::abs(grid.t0 - t) <= 1e-12 * std::max(1.0, std::abs(t)), "simulate_paths: grid must start at t");
    require(all_finite(x0), "simulate_paths: non-finite start state");
    const auto approx = build_jump_sampler(m.levy, opt.delta_cut, opt.small_jump_mode, opt.mark_cells);

    PathBundle<Dim> out;
    out.grid = grid;
    out.n_paths = n_paths;
    out.seed = seed;
    out.delta_cut = opt.delta_cut;
    out.total_rate = approx.total_rate;
    out.small_jump_variance = approx.small_jump_variance;
    out.small_jump_mode = opt.small_jump_mode;
    const std::size_t N = grid.n_steps();
    out.x.assign((N + 1) * n_paths, x0);
    out.dw.assign(N * n_paths, Point<Dim>{});
    out.m_gamma.assign(N * n_paths, 0.0);

    const bool has_jumps = approx.total_rate > 0.0 && !approx.cdf.empty();
    const bool surrogate = opt.small_jump_mode == SmallJumpMode::gaussian_surrogate && !approx.small.empty();
    const std::size_t n_blocks = (n_paths + kPathBlock - 1) / kPathBlock;
    std::vector<std::uint64_t> block_jumps(n_blocks, 0);

    parallel_for(n_blocks, opt.threads ? opt.threads : default_threads(), [&](std::size_t block) {
        auto rng = block_rng(seed, 0, block);
        std::normal_distribution<double> normal(0.0, 1.0);
        const std::size_t begin = block * kPathBlock, end = std::min(n_paths, begin + kPathBlock);
        for (std::size_t p = begin; p < end; ++p) {
            Point<Dim> X = x0;
            for (std::size_t i = 0; i < N; ++i) {
                const double dt = grid.dt(i), sq = std::sqrt(dt);
                Point<Dim> dW;
                for (auto& w : dW) w = sq * normal(rng);
                const Point<Dim> b = m.drift(X);
                const Matrix<Dim> s = m.diffusion(X);
                Point<Dim> next = X;
                for (std::size_t r = 0; r < Dim; ++r) {
                    next[r] += b[r] * dt;
                    for (std::size_t c = 0; c < Dim; ++c) next[r] += s[r * Dim + c] * dW[c];
                }
                double mg = 0.0;
                if (has_jumps) {
                    const auto count = std::poisson_distribution<std::uint64_t>(approx.total_rate * dt)(rng);
                    block_jumps[block] += count;
                    for (std::uint64_t j = 0; j < count; ++j) {
                        const double e = approx.sample_mark(rng);
                        const auto jb = m.jump(X, e);
                        for (std::size_t r = 0; r < Dim; ++r) next[r] += jb[r];
                        if (opt.gamma) mg += opt.gamma(X, e);
                    }
                    for (std::size_t k = 0; k < approx.large.marks.size(); ++k) {
                        const double w = approx.large.weights[k] * dt;
                        const auto jb = m.jump(X, approx.large.marks[k]);
                        for (std::size_t r = 0; r < Dim; ++r) next[r] -= w * jb[r];
                        if (opt.gamma) mg -= w * opt.gamma(X, approx.large.marks[k]);
                    }
                }
                if (surrogate) {
                    Point<Dim> var{};
                    for (std::size_t k = 0; k < approx.small.marks.size(); ++k) {
                        const auto jb = m.jump(X, approx.small.marks[k]);
                        for (std::size_t r = 0; r < Dim; ++r) var[r] += approx.small.weights[k] * jb[r] * jb[r];
                    }
                    for (std::size_t r = 0; r < Dim; ++r) next[r] += std::sqrt(var[r] * dt) * normal(rng);
                }
                if (!all_finite(next))
                    throw NumericalError("simulate_paths: non-finite state on path " + std::to_string(p) +
                                         " at step " + std::to_string(i));
                out.dw[i * n_paths + p] = dW;
                out.m_gamma[i * n_paths + p] = mg;
                out.x[(i + 1) * n_paths + p] = next;
                X = next;
            }
        }
    });
    for (auto c : block_jumps) out.jump_count += c;
    return out;
}

struct MomentCheck {
    double statistic = 0.0;
    double std_error = 0.0;
    double bound = 0.0;
};

/// MC estimate of E sup_s |X_s - x|^p against C_cal (1 + |x|^p)(T - t).
template <std::size_t Dim>
MomentCheck moment_check(const PathBundle<Dim>& bundle, double p, const Point<Dim>& x, double c_cal = 1.0) {
    require(p >= 2.0, "moment_check: p must be >= 2");
    const std::size_t N = bundle.n_steps();
    double sum = 0.0, sum2 = 0.0;
    for (std::size_t path = 0; path < bundle.n_paths; ++path) {
        double sup = 0.0;
        for (std::size_t i = 0; i <= N; ++i) sup = std::max(sup, distance(bundle.state(i, path), x));
        const double v = std::pow(sup, p);
        sum += v;
        sum2 += v * v;
    }
    const double n = static_cast<double>(bundle.n_paths);
    MomentCheck out;
    out.statistic = sum / n;
    out.std_error = n > 1 ? std::sqrt(std::max(0.0, (sum2 / n - out.statistic * out.statistic) / (n - 1))) : 0.0;
    out.bound = c_cal * (1.0 + std::pow(norm(x), p)) * (bundle.grid.T - bundle.grid.t0);
    return out;
}

}  // namespace singfbsde::forward
