#pragma once

#include "singfbsde/common.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <functional>
#include <optional>
#include <utility>
#include <variant>

namespace singfbsde::model {

struct Atom {
    double mark;
    double mass;
};

/// Absolutely continuous measure density(e) de on [lo, hi]. `tail_mass(cut)`,
/// when given, is the closed-form value of lambda({|e| > cut}).
struct TailDensity {
    std::function<double(double)> density;
    double lo = 0.0;
    double hi = 1.0;
    std::function<double(double)> tail_mass;
};

/// Quadrature nodes and weights (weights already include the measure).
struct MarkRule {
    std::vector<double> marks;
    std::vector<double> weights;

    double total() const {
        double s = 0.0;
        for (double w : weights) s += w;
        return s;
    }
    bool empty() const { return marks.empty(); }

    template <class Fn>
    double integrate(Fn&& h) const {
        double s = 0.0;
        for (std::size_t k = 0; k < marks.size(); ++k) s += weights[k] * h(marks[k]);
        return s;
    }
};

namespace detail {

/// Integral of h over [a, b] with tanh-sinh; tolerates integrable endpoint singularities.
inline double integrate_interval(const std::function<double(double)>& h, double a, double b, double rel_tol = 1e-6) {
    if (!(b > a)) return 0.0;
    boost::math::quadrature::tanh_sinh<double> integrator;
    double error = 0.0, l1 = 0.0;
    // Nudge evaluations off the endpoints, where densities may be singular.
    auto inner = [&](double e) {
        if (e <= a) e = std::nextafter(a, b);
        if (e >= b) e = std::nextafter(b, a);
        const double v = h(e);
        // 0 * inf underflow next to an integrable endpoint singularity
        if (!std::isfinite(v) && std::min(e - a, b - e) <= 1e-12 * (b - a)) return 0.0;
        return v;
    };
    const double value = integrator.integrate(inner, a, b, 1e-12, &error, &l1);
    // tanh-sinh error estimates stall around 1e-8 relative on tiny cells; an
    // absolute floor keeps those cells, whose mass is negligible anyway.
    if (!std::isfinite(value) || error > rel_tol * l1 + 1e-13)
        throw NumericalError("levy quadrature did not converge on [" + std::to_string(a) + ", " +
                             std::to_string(b) + "] (error " + std::to_string(error) + ")");
    return value;
}

/// The parts of [lo, hi] with |e| > cut (or |e| <= cut when `inside`), split at 0.
inline std::vector<std::pair<double, double>> pieces(double lo, double hi, double cut, bool inside) {
    std::vector<std::pair<double, double>> out;
    auto add = [&](double a, double b) {
        a = std::max(a, lo);
        b = std::min(b, hi);
        if (b > a) out.emplace_back(a, b);
    };
    if (inside) {
        add(-cut, 0.0);
        add(0.0, cut);
    } else {
        add(-kInf, -cut);
        add(cut, kInf);
    }
    return out;
}

}  // namespace detail

class LevyMeasureSpec {
public:
    LevyMeasureSpec() = default;

    static LevyMeasureSpec none() { return LevyMeasureSpec{}; }

    static LevyMeasureSpec atoms(std::vector<Atom> atoms) {
        for (const Atom& a : atoms) {
            if (!std::isfinite(a.mark) || !std::isfinite(a.mass) || a.mass < 0.0)
                throw ConfigError("levy atoms need finite marks and non-negative masses");
            if (a.mark == 0.0) throw ConfigError("levy atom at mark 0 is not allowed (E excludes 0)");
        }
        LevyMeasureSpec out;
        out.variant_ = std::move(atoms);
        out.two_moment_ = 0.0;
        for (const Atom& a : std::get<std::vector<Atom>>(out.variant_))
            out.two_moment_ += std::min(1.0, a.mark * a.mark) * a.mass;
        return out;
    }

    static LevyMeasureSpec density(TailDensity d) {
        if (!(d.hi > d.lo) || !std::isfinite(d.lo) || !std::isfinite(d.hi))
            throw ConfigError("levy density needs a finite support lo < hi");
        LevyMeasureSpec out;
        out.variant_ = std::move(d);
        const auto& dens = std::get<TailDensity>(out.variant_);
        double m2 = 0.0;
        for (auto [a, b] : detail::pieces(dens.lo, dens.hi, 0.0, false)) {
            m2 += detail::integrate_interval(
                [&](double e) {
                    const double v = dens.density(e);
                    if (v < 0.0) throw ConfigError("levy density is negative at e=" + std::to_string(e));
                    return std::min(1.0, e * e) * v;
                },
                a, b);
        }
        if (!std::isfinite(m2)) throw ConfigError("levy measure violates the integrability of 1 ^ |e|^2");
        out.two_moment_ = m2;
        return out;
    }

    bool is_zero() const {
        if (std::holds_alternative<std::monostate>(variant_)) return true;
        if (const auto* a = std::get_if<std::vector<Atom>>(&variant_))
            return std::all_of(a->begin(), a->end(), [](const Atom& x) { return x.mass == 0.0; });
        return false;
    }
    bool has_atoms() const { return std::holds_alternative<std::vector<Atom>>(variant_); }
    bool has_density() const { return std::holds_alternative<TailDensity>(variant_); }
    const std::vector<Atom>& atom_list() const { return std::get<std::vector<Atom>>(variant_); }
    const TailDensity& density_spec() const { return std::get<TailDensity>(variant_); }

    /// int (1 ^ |e|^2) lambda(de)
    double two_moment() const { return two_moment_; }

    /// Largest |e| in the support.
    double support_radius() const {
        if (has_atoms()) {
            double r = 0.0;
            for (const Atom& a : atom_list())
                if (a.mass > 0.0) r = std::max(r, std::abs(a.mark));
            return r;
        }
        if (has_density()) return std::max(std::abs(density_spec().lo), std::abs(density_spec().hi));
        return 0.0;
    }

private:
    std::variant<std::monostate, std::vector<Atom>, TailDensity> variant_;
    double two_moment_ = 0.0;
};

/// int_{|e| > delta_cut} h(e) lambda(de): exact for atoms, tanh-sinh for densities.
inline double levy_quadrature(const LevyMeasureSpec& levy, const std::function<double(double)>& h, double delta_cut) {
    require(delta_cut >= 0.0, "levy_quadrature: delta_cut must be >= 0");
    if (levy.has_atoms()) {
        double s = 0.0;
        for (const Atom& a : levy.atom_list())
            if (std::abs(a.mark) > delta_cut && a.mass > 0.0) s += a.mass * h(a.mark);
        return s;
    }
    if (!levy.has_density()) return 0.0;
    const TailDensity& d = levy.density_spec();
    double s = 0.0;
    for (auto [a, b] : detail::pieces(d.lo, d.hi, delta_cut, false))
        s += detail::integrate_interval([&](double e) { return h(e) * d.density(e); }, a, b);
    return s;
}

/// Worst relative disagreement between the declared tail mass and quadrature over `cuts`.
inline double tail_mass_discrepancy(const LevyMeasureSpec& levy, std::span<const double> cuts) {
    if (!levy.has_density() || !levy.density_spec().tail_mass) return 0.0;
    double worst = 0.0;
    for (double c : cuts) {
        const double numeric = levy_quadrature(levy, [](double) { return 1.0; }, c);
        const double analytic = levy.density_spec().tail_mass(c);
        worst = std::max(worst, std::abs(numeric - analytic) / std::max(std::abs(numeric), 1e-300));
    }
    return worst;
}

/// Discrete rule for lambda restricted to |e| > cut (large jumps) or |e| <= cut
/// (small jumps). Density pieces are split into `cells` cells carrying 4-point
/// Gauss-Legendre nodes. The small-jump side uses dyadic cells accumulating at 0.
inline MarkRule mark_rule(const LevyMeasureSpec& levy, double cut, bool small_jumps, int cells = 16) {
    MarkRule rule;
    if (levy.has_atoms()) {
        for (const Atom& a : levy.atom_list()) {
            const bool is_small = std::abs(a.mark) <= cut;
            if (a.mass > 0.0 && is_small == small_jumps) {
                rule.marks.push_back(a.mark);
                rule.weights.push_back(a.mass);
            }
        }
        return rule;
    }
    if (!levy.has_density()) return rule;
    const TailDensity& d = levy.density_spec();
    using GL = boost::math::quadrature::gauss<double, 4>;
    // Large-jump cells carry their exact mass; small-jump cells their exact
    // second moment, the only quantity the small-jump rule is used for.
    auto moment = [small_jumps](double e) { return small_jumps ? e * e : 1.0; };
    auto add_cell = [&](double a, double b) {
        if (!(b > a)) return;
        const double exact = detail::integrate_interval([&](double e) { return moment(e) * d.density(e); }, a, b);
        if (exact <= 0.0) return;
        const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
        const auto& abscissa = GL::abscissa();
        const auto& weights = GL::weights();
        std::vector<std::pair<double, double>> nodes;
        double approx = 0.0;
        auto push = [&](double e, double w) {
            const double v = w * half * d.density(e);
            nodes.emplace_back(e, v);
            approx += v * moment(e);
        };
        for (std::size_t i = 0; i < abscissa.size(); ++i) {
            if (abscissa[i] == 0.0) {
                push(mid, weights[i]);
            } else {
                push(mid - half * abscissa[i], weights[i]);
                push(mid + half * abscissa[i], weights[i]);
            }
        }
        const double scale = approx > 0.0 ? exact / approx : 0.0;
        for (auto [e, w] : nodes) {
            rule.marks.push_back(e);
            rule.weights.push_back(w * scale);
        }
    };
    for (auto [a, b] : detail::pieces(d.lo, d.hi, cut, small_jumps)) {
        if (small_jumps) {
            // Dyadic refinement toward the origin, where the density may be singular.
            const bool negative = b <= 0.0;
            double outer = negative ? -a : b;
            const double inner = negative ? -b : a;
            for (int k = 0; k < 40 && outer > inner && outer > 1e-12; ++k) {
                const double next = std::max(inner, 0.5 * outer);
                if (negative) add_cell(-outer, -next);
                else add_cell(next, outer);
                outer = next;
            }
        } else {
            const double width = (b - a) / cells;
            for (int c = 0; c < cells; ++c) add_cell(a + c * width, c + 1 == cells ? b : a + (c + 1) * width);
        }
    }
    return rule;
}

}  // namespace singfbsde::model
