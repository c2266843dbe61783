#pragma once

// ProblemSpec<1> and solver options from a resolved Config.

#include "singfbsde/bsde/limit.hpp"
#include "singfbsde/cli/config.hpp"
#include "singfbsde/expr.hpp"
#include "singfbsde/ipde/solver.hpp"
#include "singfbsde/model/audit.hpp"
#include "singfbsde/verify/checks.hpp"

namespace singfbsde::cli {

namespace detail {

inline Expr expr(const Config& c, const std::string& name, std::initializer_list<Var> allowed) {
    try {
        return Expr::parse(c.str(name), allowed);
    } catch (const ConfigError& e) {
        throw ConfigError(name + ": " + e.what());
    }
}

inline std::optional<double> constant_of(const Expr& e) {
    if (!e.is_constant()) return std::nullopt;
    return e(0.0, 0.0, 0.0);
}

inline forward::SmallJumpMode small_jump_mode(const Config& c) {
    const auto& v = c.str("forward.small_jump_mode");
    if (v == "drop") return forward::SmallJumpMode::drop;
    if (v == "gaussian") return forward::SmallJumpMode::gaussian_surrogate;
    throw ConfigError("forward.small_jump_mode must be drop or gaussian, got '" + v + "'");
}

inline std::optional<double> theta_setting(const Config& c, const std::string& name) {
    if (c.str(name) == "auto") return std::nullopt;
    return c.num(name);
}

}  // namespace detail

inline model::LevyMeasureSpec build_levy(const Config& c) {
    const auto& kind = c.str("model.levy");
    if (kind == "none") return model::LevyMeasureSpec::none();
    if (kind == "atoms") {
        std::vector<model::Atom> atoms;
        for (auto [mark, mass] : c.pairs("model.atoms")) atoms.push_back({mark, mass});
        if (atoms.empty()) throw ConfigError("model.atoms is empty but model.levy = atoms");
        return model::LevyMeasureSpec::atoms(std::move(atoms));
    }
    if (kind == "density") {
        if (c.empty("model.density")) throw ConfigError("model.density is empty but model.levy = density");
        const auto d = detail::expr(c, "model.density", {Var::e});
        model::TailDensity td;
        td.density = [d](double e) { return d(0.0, 0.0, e); };
        td.lo = c.num("model.density_lo");
        td.hi = c.num("model.density_hi");
        return model::LevyMeasureSpec::density(std::move(td));
    }
    throw ConfigError("model.levy must be none, atoms or density, got '" + kind + "'");
}

inline model::ForwardModel<1> build_model(const Config& c) {
    model::ForwardModel<1> m;
    m.horizon = c.num("model.horizon");
    if (!(m.horizon > 0.0) || !std::isfinite(m.horizon)) throw ConfigError("model.horizon must be finite and > 0");
    const auto b = detail::expr(c, "model.drift", {Var::x});
    const auto s = detail::expr(c, "model.sigma", {Var::x});
    const auto j = detail::expr(c, "model.jump", {Var::x, Var::e});
    m.drift = [b](const Point<1>& x) { return Point<1>{b(0.0, x[0])}; };
    m.diffusion = [s](const Point<1>& x) { return Matrix<1>{s(0.0, x[0])}; };
    m.jump = [j](const Point<1>& x, double e) { return Point<1>{j(0.0, x[0], e)}; };
    m.levy = build_levy(c);
    m.k_bsigma = c.opt_num("model.k_bsigma");
    m.k_beta = c.opt_num("model.k_beta");
    m.c_beta = c.opt_num("model.c_beta");
    return m;
}

inline model::Generator<1> build_generator(const Config& c) {
    using F = std::function<double(double, const Point<1>&)>;
    const auto& type = c.str("generator.type");
    const double q = c.num("generator.q");
    const double coupling = c.num("generator.coupling");
    const auto f0e = detail::expr(c, "generator.f0", {Var::t, Var::x});
    const auto f0c = detail::constant_of(f0e);
    F f0 = nullptr;
    if (!(f0c && *f0c == 0.0)) f0 = [f0e](double t, const Point<1>& x) { return f0e(t, x[0]); };

    model::Generator<1> g;
    if (type == "power") {
        const auto a = detail::expr(c, "generator.a", {Var::t, Var::x});
        if (const auto ac = detail::constant_of(a)) {
            g = model::power_generator<1>(q, *ac, f0, coupling);
        } else {
            g = model::power_generator<1>(q, 1.0, f0, coupling);
            g.constant_decay.reset();
            g.decay = [a](double t, const Point<1>& x) { return a(t, x[0]); };
            const auto f0v = g.f0;
            g.core = [q, a, f0v, coupling](double t, const Point<1>& x, double y, const Point<1>&, double b) {
                return -a(t, x[0]) * y * std::pow(std::abs(y), q) + f0v(t, x) + coupling * b;
            };
        }
    } else if (type == "liquidation") {
        const auto eta = detail::expr(c, "generator.eta", {Var::t, Var::x});
        g = model::liquidation_generator<1>(q, [eta](double t, const Point<1>& x) { return eta(t, x[0]); }, f0,
                                            coupling);
        if (const auto ec = detail::constant_of(eta)) g.constant_decay = 1.0 / (q * std::pow(*ec, q));
    } else if (type == "heat") {
        g = model::heat_generator<1>();
        g.q = q;
    } else if (type == "custom") {
        if (c.empty("generator.core")) throw ConfigError("generator.core is required when generator.type = custom");
        const auto core = detail::expr(c, "generator.core", {Var::t, Var::x, Var::y, Var::z, Var::B});
        const auto a = detail::expr(c, "generator.a", {Var::t, Var::x});
        g.q = q;
        g.core = [core](double t, const Point<1>& x, double y, const Point<1>& z, double b) {
            VarValues v;
            v[Var::t] = t;
            v[Var::x] = x[0];
            v[Var::y] = y;
            v[Var::z] = z[0];
            v[Var::B] = b;
            return core(v);
        };
        g.decay = [a](double t, const Point<1>& x) { return a(t, x[0]); };
        g.f0 = [f0e](double t, const Point<1>& x) { return f0e(t, x[0]); };
        g.f0_is_zero = f0c && *f0c == 0.0;
        g.lip_u = coupling;
    } else {
        throw ConfigError("generator.type must be power, liquidation, heat or custom, got '" + type + "'");
    }
    const auto gam = detail::expr(c, "generator.gamma", {Var::x, Var::e});
    const auto th = detail::expr(c, "generator.theta", {Var::e});
    g.gamma = [gam](const Point<1>& x, double e) { return gam(0.0, x[0], e); };
    g.theta = [th](double e) { return th(0.0, 0.0, e); };
    g.ell = c.num("generator.ell");
    g.growth_delta = c.num("generator.growth_delta");
    g.lip_z = c.num("generator.lip_z");
    g.lip_u = c.opt_num("generator.lip_u").value_or(std::abs(coupling));
    g.mono_chi = c.num("generator.mono_chi");
    return g;
}

inline model::TerminalData<1> build_terminal(const Config& c) {
    model::TerminalData<1> term;
    const auto g = detail::expr(c, "terminal.g", {Var::x});
    term.finite_part = [g](const Point<1>& x) { return g(0.0, x[0]); };
    term.singular = model::SingularSet<1>::intervals(c.pairs("terminal.singular"));
    term.nu = c.num("terminal.nu");
    return term;
}

inline model::ProblemSpec<1> build_spec(const Config& c) {
    return model::ProblemSpec<1>(build_model(c), build_generator(c), build_terminal(c));
}

/// FNV-1a of the sections that define the problem; equal ids mean equal specs.
inline std::string spec_id(const Config& c) {
    std::uint64_t h = 1469598103934665603ull;
    for (const auto& [k, v] : c.values()) {
        if (!(k.starts_with("model.") || k.starts_with("generator.") || k.starts_with("terminal."))) continue;
        for (char ch : k + "=" + v + "\n") {
            h ^= static_cast<unsigned char>(ch);
            h *= 1099511628211ull;
        }
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline bsde::MonteCarloConfig<1> build_monte_carlo(const Config& c) {
    bsde::MonteCarloConfig<1> mc;
    mc.n_paths = c.count("forward.n_paths", 2);
    mc.n_steps = c.count("forward.n_steps");
    mc.grading = c.num("forward.grading");
    mc.seed = static_cast<std::uint64_t>(c.integer("forward.seed"));
    mc.simulation.delta_cut = c.num("forward.delta_cut");
    mc.simulation.small_jump_mode = detail::small_jump_mode(c);
    mc.simulation.mark_cells = static_cast<int>(c.count("forward.mark_cells"));
    const auto& basis = c.str("bsde.basis");
    if (basis == "polynomial")
        mc.basis.kind = bsde::RegressionBasis::Kind::polynomial;
    else if (basis == "piecewise_linear")
        mc.basis.kind = bsde::RegressionBasis::Kind::piecewise_linear;
    else
        throw ConfigError("bsde.basis must be polynomial or piecewise_linear, got '" + basis + "'");
    mc.basis.degree = static_cast<int>(c.count("bsde.degree", 0));
    mc.basis.bins = static_cast<int>(c.count("bsde.bins"));
    mc.basis.ridge = c.num("bsde.ridge");
    mc.sweep.theta = detail::theta_setting(c, "bsde.theta");
    mc.sweep.cfl_max = c.num("bsde.cfl_max");
    mc.sweep.clamp = c.flag("bsde.clamp");
    return mc;
}

inline ipde::SpaceGrid build_grid(const Config& c) {
    return ipde::SpaceGrid::uniform(c.num("ipde.x_min"), c.num("ipde.x_max"), c.count("ipde.nx", 3));
}

inline ipde::IpdeOptions build_ipde_options(const Config& c) {
    ipde::IpdeOptions o;
    o.t0 = c.num("forward.t0");
    o.grading = c.num("ipde.grading");
    o.stencil.delta_cut = c.num("forward.delta_cut");
    o.stencil.small_jump_mode = detail::small_jump_mode(c);
    o.stencil.mark_cells = static_cast<int>(c.count("forward.mark_cells"));
    o.stencil.max_extrapolation = c.num("ipde.max_extrapolation");
    o.cfl_max = c.num("ipde.cfl_max");
    o.theta = detail::theta_setting(c, "ipde.theta");
    o.envelope_k = c.num("ipde.envelope_k");
    o.gap_epsilon = c.num("ipde.gap_epsilon");
    return o;
}

inline model::ProbePlan<1> build_probe_plan(const Config& c) {
    model::ProbePlan<1> plan;
    auto box = c.pairs("verify.audit_box");
    if (box.size() > 1) throw ConfigError("verify.audit_box takes one lo:hi pair");
    if (box.empty()) box.emplace_back(c.num("ipde.x_min"), c.num("ipde.x_max"));
    plan.state_box = model::Box<1>{{box[0].first}, {box[0].second}};
    plan.n_states = c.count("verify.audit_states");
    plan.n_pairs = c.count("verify.audit_pairs");
    plan.seed = static_cast<std::uint64_t>(c.integer("verify.audit_seed"));
    plan.delta_cut = c.num("forward.delta_cut");
    plan.mark_cells = static_cast<int>(c.count("forward.mark_cells"));
    return plan;
}

inline verify::InvariantOptions build_invariant_options(const Config& c) {
    verify::InvariantOptions o;
    o.eps_sweep = c.list("verify.eps_sweep");
    o.apriori_window = c.num("verify.apriori_window");
    o.apriori_rel = c.num("verify.apriori_rel");
    o.terminal_rel = c.num("verify.terminal_rel");
    o.divergence_threshold = c.num("verify.divergence_threshold");
    o.n_se = c.num("verify.n_se");
    o.k_cal = c.num("verify.k_cal");
    return o;
}

inline verify::TolerancePolicy build_tolerance(const Config& c) {
    return {c.num("verify.n_se"), c.num("verify.relative"), c.num("verify.absolute")};
}

/// Probe points for cross-validation; defaults to (t0, x0).
inline std::vector<std::pair<double, double>> probe_points(const Config& c) {
    auto pts = c.pairs("verify.points");
    if (pts.empty()) pts.emplace_back(c.num("forward.t0"), c.num("forward.x0"));
    return pts;
}

}  // namespace singfbsde::cli
