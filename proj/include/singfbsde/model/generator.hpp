#pragma once

#include "singfbsde/model/problem.hpp"

namespace singfbsde::model {

/// f(t, x, y, z, B). Rejects non-finite arguments and times outside [0, T].
template <std::size_t Dim>
double eval_generator(const Generator<Dim>& gen, double t, const Point<Dim>& x, double y, const Point<Dim>& z,
                      double b) {
    if (!std::isfinite(t) || !all_finite(x) || !std::isfinite(y) || !all_finite(z) || !std::isfinite(b))
        throw DomainError("eval_generator: non-finite input");
    if (t < 0.0 || (gen.horizon > 0.0 && t > gen.horizon))
        throw DomainError("eval_generator: t outside [0, T]");
    return gen.core(t, x, y, z, b);
}

/// T_n(y) = n(T+1) y / (|y| v n(T+1)): identity on |y| <= n(T+1), radial clamp beyond.
inline double clamp_level(double y, double radius) {
    const double a = std::abs(y);
    return a <= radius ? y : radius * y / a;
}

inline double truncation_radius(int n, double horizon) { return n * (horizon + 1.0); }

/// f_n(t,x,y,z,B) = f(t,x,T_n(y),z,B) - f0(t,x) + (f0(t,x) ^ n).
template <std::size_t Dim>
Generator<Dim> truncate_generator(const Generator<Dim>& gen, int n, double horizon) {
    require(n >= 1, "truncate_generator: n must be >= 1");
    require(horizon > 0.0, "truncate_generator: horizon must be > 0");
    Generator<Dim> out = gen;
    const double radius = truncation_radius(n, horizon);
    const double cap = static_cast<double>(n);
    out.core = [core = gen.core, f0 = gen.f0, radius, cap](double t, const Point<Dim>& x, double y,
                                                           const Point<Dim>& z, double b) {
        const double value = core(t, x, clamp_level(y, radius), z, b);
        const double base = f0(t, x);
        return base <= cap ? value : value - base + cap;
    };
    out.f0 = [f0 = gen.f0, cap](double t, const Point<Dim>& x) { return std::min(f0(t, x), cap); };
    out.horizon = horizon;
    out.truncation_level = n;
    return out;
}

/// g_n = g ^ n.
template <std::size_t Dim>
std::function<double(const Point<Dim>&)> truncate_terminal(const TerminalData<Dim>& term, int n) {
    require(n >= 1, "truncate_terminal: n must be >= 1");
    return [term, cap = static_cast<double>(n)](const Point<Dim>& x) { return std::min(term(x), cap); };
}

struct RhoCheck {
    double base = 0.0;  ///< 2/q + 2(1 - 1/ell)
    double eta = 0.0;
    double rho = 0.0;   ///< base + 2 eta / ell
    bool pass = false;
};

/// Balance condition between the nonlinearity q and the integrability ell.
/// Without an explicit eta, picks the one putting rho halfway between base and 1.
inline RhoCheck check_rho_condition(double q, double ell, std::optional<double> eta = std::nullopt) {
    require(q > 0.0 && std::isfinite(q), "check_rho_condition: q must be > 0");
    require(ell > 1.0 && std::isfinite(ell), "check_rho_condition: ell must be > 1");
    RhoCheck out;
    out.base = 2.0 / q + 2.0 * (1.0 - 1.0 / ell);
    if (eta) {
        require(*eta > 0.0, "check_rho_condition: eta must be > 0");
        out.eta = *eta;
    } else {
        out.eta = out.base < 1.0 ? (1.0 - out.base) * ell / 4.0 : 0.0;
    }
    out.rho = out.base + 2.0 * out.eta / ell;
    out.pass = out.base < 1.0 && out.rho < 1.0;
    return out;
}

/// Sampled Lipschitz constant of y -> f_n(t, x, y, 0, 0) on [-n(T+1), n(T+1)].
/// Used to limit the theta of the y-implicit step.
template <std::size_t Dim>
double estimate_lipschitz_y(const Generator<Dim>& gen, double horizon, int n, std::span<const Point<Dim>> states,
                            int y_points = 2001) {
    const double radius = truncation_radius(n, horizon);
    const Point<Dim> zero{};
    double lip = 0.0;
    const std::array<double, 3> times{0.0, 0.5 * horizon, horizon};
    for (const auto& x : states) {
        for (double t : times) {
            double prev = gen.core(t, x, -radius, zero, 0.0);
            for (int k = 1; k < y_points; ++k) {
                const double y = -radius + 2.0 * radius * k / (y_points - 1);
                const double cur = gen.core(t, x, y, zero, 0.0);
                lip = std::max(lip, std::abs(cur - prev) / (2.0 * radius / (y_points - 1)));
                prev = cur;
            }
        }
    }
    return lip * 1.01;
}

/// theta = max(1/2, 1 - cfl_max / (2 dt L_n)); theta = 1/2 is Crank-Nicolson in y.
inline double auto_theta(double dt, double lip_n, double cfl_max = 0.9) {
    if (dt * lip_n <= 0.0) return 0.5;
    return std::max(0.5, 1.0 - cfl_max / (2.0 * dt * lip_n));
}

// ---------------------------------------------------------------------------
// Presets

/// f = -a y|y|^q + f0 + coupling * B.
template <std::size_t Dim>
Generator<Dim> power_generator(double q, double a, std::function<double(double, const Point<Dim>&)> f0 = nullptr,
                               double coupling = 0.0) {
    require(q > 0.0 && a > 0.0, "power_generator: q and a must be > 0");
    Generator<Dim> g;
    g.q = q;
    g.decay = [a](double, const Point<Dim>&) { return a; };
    g.constant_decay = a;
    g.f0_is_zero = !f0;
    if (!f0) f0 = [](double, const Point<Dim>&) { return 0.0; };
    g.f0 = f0;
    g.core = [q, a, f0, coupling](double t, const Point<Dim>& x, double y, const Point<Dim>&, double b) {
        return -a * y * std::pow(std::abs(y), q) + f0(t, x) + coupling * b;
    };
    g.lip_u = coupling;
    g.mono_chi = 0.0;
    return g;
}

/// Portfolio-liquidation driver -y|y|^q / (q eta^q) + f0 with price impact eta.
template <std::size_t Dim>
Generator<Dim> liquidation_generator(double q, std::function<double(double, const Point<Dim>&)> eta,
                                     std::function<double(double, const Point<Dim>&)> f0 = nullptr,
                                     double coupling = 0.0) {
    require(q > 0.0, "liquidation_generator: q must be > 0");
    Generator<Dim> g;
    g.q = q;
    g.f0_is_zero = !f0;
    if (!f0) f0 = [](double, const Point<Dim>&) { return 0.0; };
    g.f0 = f0;
    g.decay = [q, eta](double t, const Point<Dim>& x) { return 1.0 / (q * std::pow(eta(t, x), q)); };
    g.core = [q, eta, f0, coupling](double t, const Point<Dim>& x, double y, const Point<Dim>&, double b) {
        return -y * std::pow(std::abs(y), q) / (q * std::pow(eta(t, x), q)) + f0(t, x) + coupling * b;
    };
    g.lip_u = coupling;
    return g;
}

/// f = 0 (linear Feynman-Kac problem).
template <std::size_t Dim>
Generator<Dim> heat_generator() {
    Generator<Dim> g;
    g.f0_is_zero = true;
    return g;
}

}  // namespace singfbsde::model
