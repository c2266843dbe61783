#pragma once

#include "singfbsde/common.hpp"

namespace singfbsde::verify {

namespace detail {

/// RK4 for w = y^{-q} in s = T - t: w' = q a0 - q f0c w^{(q+1)/q}, w(0) = n^{-q}.
inline double integrate_w(double q, double a0, double f0c, double w0, double s, std::size_t steps) {
    auto rhs = [&](double w) { return q * a0 - q * f0c * std::pow(std::max(w, 0.0), (q + 1.0) / q); };
    const double h = s / static_cast<double>(steps);
    double w = w0;
    for (std::size_t i = 0; i < steps; ++i) {
        const double k1 = rhs(w);
        const double k2 = rhs(w + 0.5 * h * k1);
        const double k3 = rhs(w + 0.5 * h * k2);
        const double k4 = rhs(w + h * k3);
        w += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return w;
}

}  // namespace detail

/// y(t) for -dy/dt = -a0 y^{q+1} + f0c, y(T) = n (n may be +inf), computed
/// by RK4 on w = y^{-q} with step doubling until the Richardson estimate is below tol.
inline double ode_oracle_integrated(double q, double a0, double f0c, double n, double T, double t, double tol = 1e-8) {
    require(q > 0.0 && a0 > 0.0 && f0c >= 0.0, "ode_oracle: need q > 0, a0 > 0, f0c >= 0");
    require(n > 0.0, "ode_oracle: n must be > 0");
    require(t <= T, "ode_oracle: t must be <= T");
    if (t == T) {
        require(std::isfinite(n), "ode_oracle: the singular solution has no value at t = T");
        return n;
    }
    const double w0 = std::isfinite(n) ? std::pow(n, -q) : 0.0;
    const double s = T - t;
    std::size_t steps = 64;
    double coarse = detail::integrate_w(q, a0, f0c, w0, s, steps);
    for (int round = 0; round < 20; ++round) {
        steps *= 2;
        const double fine = detail::integrate_w(q, a0, f0c, w0, s, steps);
        if (!(fine > 0.0) || !std::isfinite(fine))
            throw NumericalError("ode_oracle: solution diverges before t = " + std::to_string(t));
        const double y_fine = std::pow(fine, -1.0 / q), y_coarse = std::pow(coarse, -1.0 / q);
        if (std::abs(y_fine - y_coarse) / 15.0 <= tol) return y_fine;
        coarse = fine;
    }
    throw NumericalError("ode_oracle: step doubling did not reach the tolerance");
}

/// Comparison ODE of the constant-coefficient power driver. Closed form when f0c = 0.
inline double ode_oracle(double q, double a0, double f0c, double n, double T, double t) {
    require(q > 0.0 && a0 > 0.0 && f0c >= 0.0, "ode_oracle: need q > 0, a0 > 0, f0c >= 0");
    require(n > 0.0, "ode_oracle: n must be > 0");
    require(t <= T, "ode_oracle: t must be <= T");
    if (f0c > 0.0) return ode_oracle_integrated(q, a0, f0c, n, T, t);
    if (t == T) {
        require(std::isfinite(n), "ode_oracle: the singular solution has no value at t = T");
        return n;
    }
    const double tail = std::isfinite(n) ? std::pow(n, -q) : 0.0;
    return std::pow(q * a0 * (T - t) + tail, -1.0 / q);
}

struct RateFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    std::size_t used = 0;
};

/// Least-squares slope of log u against log(T - t) over samples with T - t in [lo, hi].
inline RateFit blowup_rate_fit(std::span<const std::pair<double, double>> samples, double lo = 0.0, double hi = kInf) {
    std::vector<std::pair<double, double>> pts;
    for (auto [s, u] : samples) {
        if (!(s >= lo && s <= hi)) continue;
        if (!(s > 0.0)) throw DomainError("blowup_rate_fit: T - t must be > 0");
        if (!(u > 0.0) || !std::isfinite(u))
            throw DomainError("blowup_rate_fit: nonpositive value " + std::to_string(u) + " at T-t=" + std::to_string(s));
        pts.emplace_back(std::log(s), std::log(u));
    }
    if (pts.size() < 5) throw DomainError("blowup_rate_fit: need at least 5 samples in the window");
    const double m = static_cast<double>(pts.size());
    double mx = 0.0, my = 0.0;
    for (auto [x, y] : pts) {
        mx += x;
        my += y;
    }
    mx /= m;
    my /= m;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (auto [x, y] : pts) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if (sxx <= 0.0) throw DomainError("blowup_rate_fit: all samples at the same T - t");
    RateFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r2 = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
    f.used = pts.size();
    return f;
}

}  // namespace singfbsde::verify
