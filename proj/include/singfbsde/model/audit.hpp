#pragma once

#include "singfbsde/model/generator.hpp"

#include <sstream>

namespace singfbsde::model {

/// Where and how densely the structural conditions are probed.
template <std::size_t Dim>
struct ProbePlan {
    Box<Dim> state_box;
    std::size_t n_states = 2000;
    std::size_t n_pairs = 10000;
    double y_max = 10.0;
    double z_max = 5.0;
    double b_max = 5.0;
    std::uint64_t seed = 1;
    double delta_cut = 1e-3;  ///< marks for density measures come from the quadrature rules split here
    int mark_cells = 16;
    double continuity_tol = 0.05;       ///< on atan(g) between neighbouring probes
    std::size_t continuity_points = 20001;
    double rel_tol = 1e-9;              ///< slack when comparing against declared constants
};

struct AuditEntry {
    std::string id;
    bool pass = true;
    bool vacuous = false;
    std::size_t probes = 0;
    double margin = kInf;      ///< worst signed slack; negative means violated
    double estimate = 0.0;     ///< measured constant where one applies
    std::string witness;
    std::string note;
};

struct AuditReport {
    std::vector<AuditEntry> entries;

    const AuditEntry& find(std::string_view id) const {
        for (const auto& e : entries)
            if (e.id == id) return e;
        throw DomainError("audit: no entry " + std::string(id));
    }
    bool all_pass() const {
        return std::all_of(entries.begin(), entries.end(), [](const AuditEntry& e) { return e.pass; });
    }
    bool conditions_d_pass() const { return find("D1").pass && find("D2").pass; }
};

inline const std::vector<std::string>& audit_ids() {
    static const std::vector<std::string> ids{"A1", "A2", "A3", "B1", "B2", "B3", "C2", "C3", "C4",
                                              "C5", "C6", "C7", "C8", "C9", "C10", "D1", "D2", "rho"};
    return ids;
}

namespace detail {

template <std::size_t Dim>
std::string format_point(const Point<Dim>& x) {
    std::ostringstream os;
    os.precision(6);
    os << '(';
    for (std::size_t i = 0; i < Dim; ++i) os << (i ? "," : "") << x[i];
    os << ')';
    return os.str();
}

inline std::string no_violation(std::size_t n) { return "no violation found among " + std::to_string(n) + " probes"; }

template <std::size_t Dim>
Point<Dim> uniform_in(const Box<Dim>& box, std::mt19937_64& rng) {
    Point<Dim> x;
    for (std::size_t i = 0; i < Dim; ++i) x[i] = std::uniform_real_distribution<double>(box.lo[i], box.hi[i])(rng);
    return x;
}

/// Marks that carry lambda-mass: all atoms, or the nodes of both quadrature rules.
inline std::vector<double> probe_marks(const LevyMeasureSpec& levy, double cut, int cells) {
    std::vector<double> marks;
    for (const auto& r : {mark_rule(levy, cut, false, cells), mark_rule(levy, cut, true, cells)})
        for (std::size_t k = 0; k < r.marks.size(); ++k)
            if (r.weights[k] > 0.0) marks.push_back(r.marks[k]);
    return marks;
}

/// Lipschitz quotient of a map over random pairs, half near-diagonal.
template <std::size_t Dim, class Dist>
std::pair<double, Point<Dim>> max_quotient(const Box<Dim>& box, std::size_t n_pairs, std::mt19937_64& rng,
                                           Dist&& dist) {
    double best = 0.0;
    Point<Dim> where{};
    double width = 0.0;
    for (std::size_t i = 0; i < Dim; ++i) width = std::max(width, box.hi[i] - box.lo[i]);
    std::uniform_real_distribution<double> sym(-1.0, 1.0);
    for (std::size_t k = 0; k < n_pairs; ++k) {
        const Point<Dim> x = uniform_in(box, rng);
        Point<Dim> y;
        if (k % 2 == 0) {
            for (std::size_t i = 0; i < Dim; ++i)
                y[i] = std::clamp(x[i] + 1e-3 * width * sym(rng), box.lo[i], box.hi[i]);
        } else {
            y = uniform_in(box, rng);
        }
        const double dxy = distance(x, y);
        if (dxy <= 0.0) continue;
        const double qv = dist(x, y) / dxy;
        if (!(qv <= best)) {
            best = qv;
            where = x;
        }
    }
    return {best, where};
}

}  // namespace detail

/// Sampled falsification checks of the structural conditions. Every entry is
/// "no violation found among N probes" at best, never a proof.
template <std::size_t Dim>
AuditReport audit_assumptions(const ProblemSpec<Dim>& spec, const ProbePlan<Dim>& plan) {
    require(plan.state_box.bounded(), "audit: probe box must be bounded");
    require(plan.n_states >= 1 && plan.n_pairs >= 1, "audit: probe counts must be positive");
    using detail::format_point;
    using detail::no_violation;
    const auto& m = spec.model;
    const auto& gen = spec.generator;
    const auto& term = spec.terminal;
    const double T = spec.horizon();
    const double tol = plan.rel_tol;
    const auto marks = detail::probe_marks(m.levy, plan.delta_cut, plan.mark_cells);
    AuditReport report;
    std::uint64_t stream = 0;
    auto rng_for = [&] { return block_rng(plan.seed, stream++, 0); };
    auto add = [&](AuditEntry e) { report.entries.push_back(std::move(e)); };
    auto against = [&](AuditEntry& e, std::optional<double> declared, const std::string& name) {
        if (!std::isfinite(e.estimate)) {
            e.pass = false;
            e.margin = -kInf;
            e.note = name + " estimate is not finite";
        } else if (declared) {
            e.margin = *declared * (1.0 + tol) + tol - e.estimate;
            e.pass = e.margin >= 0.0;
            e.note = e.pass ? no_violation(e.probes) : name + " exceeds the declared constant";
        } else {
            e.note = no_violation(e.probes) + "; no declared " + name + ", estimate only";
        }
    };

    // A1: Lipschitz b and sigma.
    {
        auto rng = rng_for();
        AuditEntry e{"A1"};
        auto [est, at] = detail::max_quotient<Dim>(plan.state_box, plan.n_pairs, rng, [&](const auto& x, const auto& y) {
            return distance<Dim>(m.drift(x), m.drift(y)) + matrix_distance<Dim>(m.diffusion(x), m.diffusion(y));
        });
        e.estimate = est;
        e.probes = plan.n_pairs;
        e.witness = format_point(at);
        against(e, m.k_bsigma, "K_b,sigma");
        add(e);
    }
    // A2: Lipschitz beta, scaled by 1 ^ |e|.
    {
        auto rng = rng_for();
        AuditEntry e{"A2"};
        double best = 0.0;
        std::string where;
        const std::size_t per_mark = marks.empty() ? 0 : std::max<std::size_t>(1, plan.n_pairs / marks.size());
        for (double mk : marks) {
            const double scale = std::min(1.0, std::abs(mk));
            auto [est, at] = detail::max_quotient<Dim>(plan.state_box, per_mark, rng, [&](const auto& x, const auto& y) {
                return distance<Dim>(m.jump(x, mk), m.jump(y, mk)) / scale;
            });
            if (!(est <= best)) {
                best = est;
                where = format_point(at) + " e=" + std::to_string(mk);
            }
            e.probes += per_mark;
        }
        e.estimate = best;
        e.witness = where;
        against(e, m.k_beta, "K_beta");
        if (marks.empty()) e.note = "measure has no mass; " + e.note;
        add(e);
    }
    // A3: |beta| <= C_beta (1 ^ |e|).
    {
        auto rng = rng_for();
        AuditEntry e{"A3"};
        double best = 0.0;
        for (std::size_t k = 0; k < plan.n_states; ++k) {
            const Point<Dim> x = detail::uniform_in(plan.state_box, rng);
            for (double mk : marks) {
                const double v = norm<Dim>(m.jump(x, mk)) / std::min(1.0, std::abs(mk));
                ++e.probes;
                if (!(v <= best)) {
                    best = v;
                    e.witness = format_point(x) + " e=" + std::to_string(mk);
                }
            }
        }
        e.estimate = best;
        against(e, m.c_beta, "C_beta");
        add(e);
    }
    // Conditions (B).
    {
        auto rng = rng_for();
        AuditEntry b1{"B1"}, b2{"B2"};
        double worst_growth = 0.0;
        b1.margin = kInf;
        for (std::size_t k = 0; k < plan.n_states; ++k) {
            const Point<Dim> x = detail::uniform_in(plan.state_box, rng);
            ++b1.probes;
            ++b2.probes;
            if (term.singular.contains(x)) continue;
            const double v = term.finite_part(x);
            if (!(v >= 0.0) || !std::isfinite(v)) {
                if (b1.pass || v < b1.margin) {
                    b1.margin = std::isnan(v) ? -kInf : v;
                    b1.witness = format_point(x);
                }
                b1.pass = false;
            } else {
                b1.margin = std::min(b1.margin, v);
                const double growth = v / (1.0 + std::pow(norm(x), 2.0));
                if (growth > worst_growth) {
                    worst_growth = growth;
                    b2.witness = format_point(x);
                }
            }
        }
        b1.note = b1.pass ? no_violation(b1.probes) + "; g = +inf exactly on S by construction"
                          : "g is negative, NaN or infinite off S";
        if (term.singular.empty()) b1.note += "; S is empty (bounded data)";
        b2.estimate = worst_growth;
        b2.pass = b1.pass;
        b2.margin = b1.pass ? 0.0 : -kInf;
        b2.note = b2.pass ? "g finite off S with g/(1+|x|^2) <= " + std::to_string(worst_growth) +
                                " on probes; integrable given the moment bound of X"
                          : "g not finite off S";
        add(b1);
        add(b2);
    }
    // B3: continuity into [0, +inf] via atan(g) on neighbouring probes.
    {
        auto rng = rng_for();
        AuditEntry e{"B3"};
        auto at = [&](const Point<Dim>& x) { return std::atan(term(x)); };
        double worst = 0.0;
        auto visit = [&](const Point<Dim>& a, const Point<Dim>& b) {
            const double d = std::abs(at(a) - at(b));
            ++e.probes;
            if (!(d <= worst)) {
                worst = d;
                e.witness = format_point(a);
            }
        };
        if constexpr (Dim == 1) {
            const double lo = plan.state_box.lo[0], hi = plan.state_box.hi[0];
            const std::size_t n = std::max<std::size_t>(plan.continuity_points, 2);
            Point<1> prev{lo};
            for (std::size_t k = 1; k < n; ++k) {
                const Point<1> cur{lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n - 1)};
                visit(prev, cur);
                prev = cur;
            }
        } else {
            double width = 0.0;
            for (std::size_t i = 0; i < Dim; ++i) width = std::max(width, plan.state_box.hi[i] - plan.state_box.lo[i]);
            const double h = width / static_cast<double>(plan.continuity_points);
            for (std::size_t k = 0; k < plan.n_pairs; ++k) {
                const Point<Dim> a = detail::uniform_in(plan.state_box, rng);
                Point<Dim> b = a;
                b[k % Dim] += h;
                visit(a, b);
            }
        }
        e.estimate = worst;
        e.margin = plan.continuity_tol - worst;
        e.pass = e.margin >= 0.0;
        e.note = e.pass ? no_violation(e.probes) : "atan(g) jumps between neighbouring probes";
        add(e);
    }

    // Generator conditions.
    auto rng_t = rng_for();
    std::uniform_real_distribution<double> ut(0.0, T), uy(-plan.y_max, plan.y_max), uy_pos(0.0, plan.y_max),
        uz(-plan.z_max, plan.z_max), ub(-plan.b_max, plan.b_max);
    struct Sample {
        double t;
        Point<Dim> x;
        double y, y2;
        Point<Dim> z, z2;
        double b, b2;
    };
    std::vector<Sample> samples(plan.n_pairs);
    for (auto& s : samples) {
        s.t = ut(rng_t);
        s.x = detail::uniform_in(plan.state_box, rng_t);
        s.y = uy(rng_t);
        s.y2 = uy(rng_t);
        for (std::size_t i = 0; i < Dim; ++i) {
            s.z[i] = uz(rng_t);
            s.z2[i] = uz(rng_t);
        }
        s.b = ub(rng_t);
        s.b2 = ub(rng_t);
    }
    auto where = [&](const Sample& s) { return "t=" + std::to_string(s.t) + " x=" + format_point(s.x); };
    const Point<Dim> zero{};

    {
        AuditEntry e{"C2"};
        for (const auto& s : samples) {
            const double v = gen.f0(s.t, s.x);
            ++e.probes;
            if (!(v >= e.margin)) {
                e.margin = std::isnan(v) ? -kInf : v;
                e.witness = where(s);
            }
        }
        e.pass = e.margin >= 0.0;
        e.note = e.pass ? no_violation(e.probes) : "f0 < 0";
        add(e);
    }
    {
        AuditEntry e{"C3"};
        for (const auto& s : samples) {
            const double dy = s.y - s.y2;
            if (dy == 0.0) continue;
            const double lhs = (gen.core(s.t, s.x, s.y, s.z, s.b) - gen.core(s.t, s.x, s.y2, s.z, s.b)) * dy;
            const double slack = gen.mono_chi * dy * dy - lhs + tol * std::abs(lhs);
            ++e.probes;
            e.estimate = std::max(e.estimate, lhs / (dy * dy));
            if (!(slack >= e.margin)) {
                e.margin = slack;
                e.witness = where(s);
            }
        }
        e.pass = e.margin >= 0.0;
        e.note = e.pass ? no_violation(e.probes) : "monotonicity constant chi too small";
        add(e);
    }
    {
        AuditEntry e{"C4"};
        for (const auto& s : samples) {
            const double dy = s.y - s.y2;
            if (dy == 0.0) continue;
            const double qv =
                std::abs(gen.core(s.t, s.x, s.y, s.z, s.b) - gen.core(s.t, s.x, s.y2, s.z, s.b)) / std::abs(dy);
            ++e.probes;
            if (!(qv <= e.estimate)) {
                e.estimate = qv;
                e.witness = where(s);
            }
        }
        e.pass = std::isfinite(e.estimate);
        e.note = (e.pass ? no_violation(e.probes) : std::string("non-finite quotient")) + "; L_R estimate for R=" +
                 std::to_string(plan.y_max);
        add(e);
    }
    {
        AuditEntry e{"C5"};
        for (const auto& s : samples) {
            const double dz = distance(s.z, s.z2);
            if (dz == 0.0) continue;
            const double qv = std::abs(gen.core(s.t, s.x, s.y, s.z, s.b) - gen.core(s.t, s.x, s.y, s.z2, s.b)) / dz;
            ++e.probes;
            if (!(qv <= e.estimate)) {
                e.estimate = qv;
                e.witness = where(s);
            }
        }
        against(e, gen.lip_z, "L (z)");
        add(e);
    }
    {
        AuditEntry e{"C6"};
        double lip = 0.0;
        for (const auto& s : samples) {
            const double lo = std::min(s.b, s.b2), hi = std::max(s.b, s.b2);
            if (hi == lo) continue;
            const double inc = gen.core(s.t, s.x, s.y, s.z, hi) - gen.core(s.t, s.x, s.y, s.z, lo);
            ++e.probes;
            lip = std::max(lip, inc / (hi - lo));
            const double slack = std::min(inc + tol * std::abs(inc), gen.lip_u * (hi - lo) * (1.0 + tol) + tol - inc);
            if (!(slack >= e.margin)) {
                e.margin = slack;
                e.witness = where(s);
            }
        }
        e.estimate = lip;
        e.pass = e.margin >= 0.0;
        e.note = e.pass ? no_violation(e.probes) : "f not non-decreasing in B or Lipschitz constant exceeded";
        add(e);
    }
    {
        auto rng = rng_for();
        AuditEntry e{"C7"};
        for (std::size_t k = 0; k < plan.n_states; ++k) {
            const Point<Dim> x = detail::uniform_in(plan.state_box, rng);
            for (double mk : marks) {
                const double g = gen.gamma(x, mk), th = gen.theta(mk);
                const double slack = std::min(g, th - g);
                ++e.probes;
                if (!(slack >= e.margin)) {
                    e.margin = slack;
                    e.witness = format_point(x) + " e=" + std::to_string(mk);
                }
            }
        }
        const double l2 = levy_quadrature(m.levy, [&](double mk) { return gen.theta(mk) * gen.theta(mk); }, 0.0);
        e.estimate = std::sqrt(l2);
        e.pass = e.margin >= -tol && std::isfinite(l2);
        e.note = e.pass ? no_violation(e.probes) + "; ||theta||_L2 = " + std::to_string(e.estimate)
                        : "gamma outside [0, theta] or theta not square integrable";
        add(e);
    }
    {
        AuditEntry e{"C8"};
        for (const auto& s : samples) {
            const double y = std::abs(s.y);
            const double a = gen.decay(s.t, s.x);
            const double lhs = gen.core(s.t, s.x, y, s.z, s.b);
            const double rhs = -a * std::pow(y, gen.q + 1.0) + gen.core(s.t, s.x, 0.0, s.z, s.b);
            const double slack = rhs - lhs + tol * (std::abs(lhs) + std::abs(rhs));
            ++e.probes;
            if (!(slack >= e.margin) || !(a > 0.0)) {
                e.margin = a > 0.0 ? slack : -kInf;
                e.witness = where(s) + " y=" + std::to_string(y);
            }
        }
        e.pass = e.margin >= 0.0;
        e.note = e.pass ? no_violation(e.probes) : "decay bound f <= -a y^(q+1) + f(.,0,.) violated";
        add(e);
    }
    {
        AuditEntry e{"C9"};
        // Fit the polynomial growth of h = a^(-1/q) + f0 against |x|; compare to growth_delta.
        double worst = 0.0;
        for (const auto& s : samples) {
            const double h = 1.0 / std::pow(gen.decay(s.t, s.x), 1.0 / gen.q) + gen.f0(s.t, s.x);
            ++e.probes;
            if (!std::isfinite(h)) {
                e.pass = false;
                e.witness = where(s);
                continue;
            }
            const double ratio = h / (1.0 + std::pow(norm(s.x), gen.growth_delta));
            if (ratio > worst) {
                worst = ratio;
                e.witness = where(s);
            }
        }
        e.estimate = worst;
        e.margin = e.pass ? 0.0 : -kInf;
        e.note = e.pass ? "a^(-1/q) + f0 <= " + std::to_string(worst) + " (1 + |x|^delta) on probes"
                        : "a^(-1/q) + f0 not finite";
        add(e);
    }
    {
        AuditEntry e{"C10"};
        const double lt = gen.ell / (gen.ell - 1.0);
        double v = 0.0;
        for (const auto& r : {mark_rule(m.levy, plan.delta_cut, false, plan.mark_cells),
                              mark_rule(m.levy, plan.delta_cut, true, plan.mark_cells)})
            v += r.integrate([&](double mk) { return std::pow(std::abs(gen.theta(mk)), lt); });
        e.estimate = std::pow(v, 1.0 / lt);
        e.probes = marks.size();
        e.pass = std::isfinite(v) && gen.ell > 1.0;
        e.margin = e.pass ? 0.0 : -kInf;
        e.note = "||theta|| in L^" + std::to_string(lt) + " = " + std::to_string(e.estimate) + " (quadrature)";
        add(e);
    }

    // Conditions (D).
    const auto& S = term.singular;
    if (S.empty()) {
        for (const char* id : {"D1", "D2"}) {
            AuditEntry e{id};
            e.vacuous = true;
            e.note = "vacuous: singular set is empty";
            add(e);
        }
    } else {
        AuditEntry d1{"D1"};
        d1.probes = S.boxes().size();
        d1.pass = S.boundary_compact();
        d1.margin = d1.pass ? 0.0 : -kInf;
        d1.note = d1.pass ? (Dim == 1 ? "boundary is a finite set of points" : "boundary is compact; box corners are not C2")
                          : "boundary is not compact";
        add(d1);

        auto rng = rng_for();
        AuditEntry d2{"D2"};
        std::vector<Point<Dim>> inside, boundary;
        for (const auto& b : S.boxes()) {
            Box<Dim> clip;
            bool nonempty = true;
            for (std::size_t i = 0; i < Dim; ++i) {
                clip.lo[i] = std::max(b.lo[i], plan.state_box.lo[i]);
                clip.hi[i] = std::min(b.hi[i], plan.state_box.hi[i]);
                nonempty = nonempty && clip.lo[i] <= clip.hi[i];
            }
            const std::size_t n_in = plan.n_states / S.boxes().size() + 1;
            for (std::size_t k = 0; nonempty && k < n_in; ++k) inside.push_back(detail::uniform_in(clip, rng));
            if constexpr (Dim == 1) {
                for (double p : {b.lo[0], b.hi[0]})
                    if (std::isfinite(p)) boundary.push_back(Point<1>{p});
            } else {
                for (std::size_t k = 0; nonempty && k < n_in; ++k) {
                    Point<Dim> x = detail::uniform_in(clip, rng);
                    const std::size_t axis = k % Dim;
                    const double face = (k / Dim) % 2 == 0 ? b.lo[axis] : b.hi[axis];
                    if (!std::isfinite(face)) continue;
                    x[axis] = face;
                    boundary.push_back(x);
                }
            }
        }
        for (const auto& x : boundary) inside.push_back(x);
        auto signed_dist = [&](const Point<Dim>& y) {
            return S.contains(y) ? S.boundary_distance(y) : -S.boundary_distance(y);
        };
        for (const auto& x : inside) {
            for (double mk : marks) {
                Point<Dim> y = x;
                const auto jump = m.jump(x, mk);
                for (std::size_t i = 0; i < Dim; ++i) y[i] += jump[i];
                ++d2.probes;
                const double sd = signed_dist(y);
                if (!S.contains(y) && (d2.pass || sd < d2.margin)) {
                    d2.pass = false;
                    d2.margin = sd;
                    d2.witness = "x=" + format_point(x) + " e=" + std::to_string(mk) + " exits S";
                }
            }
        }
        double worst_nu = kInf;
        std::string nu_witness;
        for (const auto& x : boundary) {
            for (double mk : marks) {
                Point<Dim> y = x;
                const auto jump = m.jump(x, mk);
                for (std::size_t i = 0; i < Dim; ++i) y[i] += jump[i];
                const double d = S.boundary_distance(y);
                if (d < worst_nu) {
                    worst_nu = d;
                    nu_witness = "x=" + format_point(x) + " e=" + std::to_string(mk);
                }
            }
        }
        const double nu_slack = worst_nu - term.nu * (1.0 - tol);
        if (d2.pass) {
            d2.margin = std::min(d2.margin, nu_slack);
            d2.witness = nu_witness;
            if (!(term.nu > 0.0)) {
                d2.pass = false;
                d2.margin = -kInf;
                d2.note = "nu must be > 0";
            } else if (nu_slack < 0.0) {
                d2.pass = false;
                d2.note = "boundary jump lands within nu of the boundary";
            }
        } else {
            d2.note = "jump from S leaves S";
        }
        d2.estimate = worst_nu;
        if (marks.empty()) {
            d2.note = "measure has no mass; jump conditions hold trivially";
            d2.pass = term.nu > 0.0;
        } else if (d2.pass) {
            d2.note = no_violation(d2.probes) + "; min d(x+beta, dS) on dS = " + std::to_string(worst_nu);
        }
        add(d2);
    }

    {
        AuditEntry e{"rho"};
        const RhoCheck r = check_rho_condition(gen.q, gen.ell);
        e.estimate = r.rho;
        e.margin = 1.0 - std::max(r.base, r.rho);
        e.pass = r.pass;
        e.probes = 1;
        e.note = "base " + std::to_string(r.base) + ", eta " + std::to_string(r.eta);
        add(e);
    }
    return report;
}

}  // namespace singfbsde::model
