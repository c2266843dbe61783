#pragma once

#include "singfbsde/ipde/stencil.hpp"

namespace singfbsde::ipde {

/// Per-node coefficients of the local part, fixed for the whole solve.
struct NodeCoefficients {
    std::vector<double> drift;      ///< b - compensator of the large jumps
    std::vector<double> sigma;
    std::vector<double> diffusion;  ///< 1/2 sigma^2 + small-jump surrogate; 0 on boundary rows
};

inline NodeCoefficients node_coefficients(const model::ForwardModel<1>& m, const NonlocalStencil& st,
                                          const SpaceGrid& grid) {
    const std::size_t n = grid.nx;
    NodeCoefficients c;
    c.drift.resize(n);
    c.sigma.resize(n);
    c.diffusion.assign(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        const Point<1> x{grid.nodes[j]};
        c.drift[j] = m.drift(x)[0] - st.compensator[j];
        c.sigma[j] = m.diffusion(x)[0];
        if (!std::isfinite(c.drift[j]) || !std::isfinite(c.sigma[j]))
            throw NumericalError("ipde: non-finite coefficient at x=" + std::to_string(x[0]));
        if (j > 0 && j + 1 < n) c.diffusion[j] = 0.5 * c.sigma[j] * c.sigma[j] + st.small_diffusion[j];
    }
    return c;
}

struct StepOptions {
    std::optional<double> theta;  ///< implicit weight of f in y; auto when empty
    double cfl_max = 0.9;
    std::optional<double> lip_y;  ///< L_n of f_n in y; estimated when empty
    EnvelopeCap cap;
    unsigned threads = 0;
};

struct StepReport {
    double theta = 0.0;
    double cfl_ratio = 0.0;  ///< dt (|b|/h + Lambda + L_u Gamma + L_z |sigma|/h) + (1 - theta) dt L_n
    double linear_ratio = 0.0;
};

/// Worst linear part of the explicit-stage ratio over the nodes.
template <class Gen>
double linear_cfl(const NodeCoefficients& c, const NonlocalStencil& st, const Gen& gen, double h, double dt) {
    double worst = 0.0;
    for (std::size_t j = 0; j < c.drift.size(); ++j)
        worst = std::max(worst, dt * (std::abs(c.drift[j]) / h + st.jump_mass[j] + gen.lip_u * st.gamma_mass[j] +
                                      gen.lip_z * std::abs(c.sigma[j]) / h));
    return worst;
}

/// theta = max(1/2, 1 - (cfl_max - linear ratio) / (dt L_n)): the smallest
/// implicit weight, not below Crank-Nicolson, that keeps the explicit stage monotone.
/// Explicit weight 1 - theta of f_n, in [0, 1/2]; computed directly so that
/// dt L_n (1 - theta) stays accurate when dt L_n is huge.
inline double ipde_explicit_weight(double linear_ratio, double dt, double lip_y, double cfl_max) {
    if (linear_ratio > cfl_max)
        throw NumericalError("ipde: CFL violated, ratio " + std::to_string(linear_ratio) + " > " +
                             std::to_string(cfl_max) + " before the generator term; reduce dt or coarsen h");
    if (dt * lip_y <= 0.0) return 0.5;
    return std::clamp((cfl_max - linear_ratio) / (dt * lip_y), 0.0, 0.5);
}

inline double ipde_theta(double linear_ratio, double dt, double lip_y, double cfl_max) {
    return 1.0 - ipde_explicit_weight(linear_ratio, dt, lip_y, cfl_max);
}

/// One backward step from t + dt to t: explicit upwind drift, nonlocal I and B,
/// and (1 - theta) f_n; then the theta part of f_n pointwise; then implicit diffusion.
template <class Gen>
std::vector<double> imex_step(std::span<const double> u_next, const NonlocalStencil& st, const Gen& gen_n,
                              const NodeCoefficients& c, const SpaceGrid& grid, double dt, double t,
                              const StepOptions& opt, StepReport* report = nullptr) {
    const std::size_t n = grid.nx;
    require(u_next.size() == n && st.size() == n, "imex_step: size mismatch");
    require(dt > 0.0, "imex_step: dt must be > 0");
    const double h = grid.h;
    const double lip = opt.lip_y.value_or(0.0);
    const double lin = linear_cfl(c, st, gen_n, h, dt);
    const double weight = opt.theta ? 1.0 - *opt.theta : ipde_explicit_weight(lin, dt, lip, opt.cfl_max);
    const double theta = 1.0 - weight;
    const double ratio = lin + weight * dt * lip;
    if (ratio > opt.cfl_max * (1.0 + 1e-9))
        throw NumericalError("ipde: CFL violated, ratio " + std::to_string(ratio) + " > " + std::to_string(opt.cfl_max));
    if (report) *report = {theta, ratio, lin};

    std::vector<double> v(n);
    constexpr std::size_t kBlock = 64;
    const std::size_t blocks = (n + kBlock - 1) / kBlock;
    parallel_for(blocks, opt.threads ? opt.threads : default_threads(), [&](std::size_t blk) {
        const std::size_t end = std::min(n, (blk + 1) * kBlock);
        for (std::size_t j = blk * kBlock; j < end; ++j) {
            const Point<1> x{grid.nodes[j]};
            const double uj = u_next[j];
            const double fwd = j + 1 < n ? (u_next[j + 1] - uj) / h : 0.0;
            const double bwd = j > 0 ? (uj - u_next[j - 1]) / h : 0.0;
            // upwind; boundary rows drop the outward-pointing part
            const double b = c.drift[j];
            const double drift = b > 0.0 ? b * fwd : b * bwd;
            const double jumps = st.jump_difference(u_next, j, t, opt.cap);
            const double big_b = st.apply_B(u_next, j, t, opt.cap);
            double z = c.sigma[j] * (j > 0 && j + 1 < n ? 0.5 * (fwd + bwd) : (j + 1 < n ? fwd : bwd));
            if (gen_n.lip_z > 0.0 && c.sigma[j] != 0.0) {
                const double eps = 1e-6 * (1.0 + std::abs(z));
                const double slope = gen_n.core(t, x, uj, Point<1>{z + eps}, big_b) -
                                     gen_n.core(t, x, uj, Point<1>{z - eps}, big_b);
                const bool forward = (slope * c.sigma[j] >= 0.0 && j + 1 < n) || j == 0;
                z = c.sigma[j] * (forward ? fwd : bwd);
            }
            double r = uj + dt * (drift + jumps);
            if (weight > 0.0) r += weight * dt * gen_n.core(t, x, uj, Point<1>{z}, big_b);
            double y = r;
            if (theta > 0.0) {
                const double w = theta * dt;
                y = solve_increasing([&](double s) { return s - w * gen_n.core(t, x, s, Point<1>{z}, big_b); }, r, r);
            }
            if (!std::isfinite(y)) throw NumericalError("ipde: non-finite value at x=" + std::to_string(x[0]));
            v[j] = y;
        }
    });

    // (I - dt A) delta = dt A v, u = v + delta: the increment form keeps constants exact
    bool any = false;
    for (double a : c.diffusion) any = any || a > 0.0;
    if (!any) return v;
    std::vector<double> sub(n, 0.0), diag(n, 1.0), sup(n, 0.0), rhs(n, 0.0);
    for (std::size_t j = 1; j + 1 < n; ++j) {
        const double k = dt * c.diffusion[j] / (h * h);
        sub[j] = -k;
        sup[j] = -k;
        diag[j] = 1.0 + 2.0 * k;
        rhs[j] = k * ((v[j + 1] - v[j]) - (v[j] - v[j - 1]));
    }
    const auto inc = solve_tridiagonal(sub, diag, sup, rhs);
    for (std::size_t j = 0; j < n; ++j) v[j] += inc[j];
    return v;
}

/// Convenience overload building the node coefficients on the fly.
template <class Gen>
std::vector<double> imex_step(std::span<const double> u_next, const NonlocalStencil& st, const Gen& gen_n,
                              const model::ForwardModel<1>& m, const SpaceGrid& grid, double dt, double t,
                              const StepOptions& opt = {}, StepReport* report = nullptr) {
    return imex_step(u_next, st, gen_n, node_coefficients(m, st, grid), grid, dt, t, opt, report);
}

}  // namespace singfbsde::ipde
