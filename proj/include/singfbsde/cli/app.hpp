#pragma once

// Command-line front end: run, audit, bsde, ipde, compare, oracle, report.
// Exit codes: 0 ok, 1 verification failure, 2 config error, 3 numerical failure.

#include "singfbsde/cli/build.hpp"
#include "singfbsde/cli/svg.hpp"
#include "singfbsde/forward/persist.hpp"
#include "singfbsde/verify/oracle.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <Eigen/Core>
#include <boost/version.hpp>
#include <openssl/crypto.h>
#include <openssl/evp.h>

#include <chrono>
#include <filesystem>
#include <iostream>

namespace singfbsde::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode { kOk = 0, kVerificationFailed = 1, kConfigError = 2, kNumericalError = 3 };

inline std::string sha256_hex(std::string_view bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256 failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

inline std::string read_file(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    if (!is) throw ConfigError("cannot read " + p.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

/// Every file a command writes goes through here, under one directory.
class Artifacts {
public:
    explicit Artifacts(fs::path dir) : dir_(std::move(dir)) {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec || !fs::is_directory(dir_)) throw ConfigError("cannot create output directory " + dir_.string());
    }

    const fs::path& dir() const { return dir_; }
    fs::path path(const std::string& name) const { return dir_ / name; }

    void write(const std::string& name, std::string_view content) {
        std::ofstream os(path(name), std::ios::binary | std::ios::trunc);
        os.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!os) throw ConfigError("cannot write " + path(name).string());
        record(name);
    }
    void record(const std::string& name) {
        if (std::find(files_.begin(), files_.end(), name) == files_.end()) files_.push_back(name);
    }
    json inventory() const {
        json arr = json::array();
        for (const auto& f : files_) {
            const auto bytes = read_file(path(f));
            arr.push_back({{"path", f}, {"bytes", bytes.size()}, {"sha256", sha256_hex(bytes)}});
        }
        return arr;
    }

private:
    fs::path dir_;
    std::vector<std::string> files_;
};

// ---------------------------------------------------------------------------
// CSV reading for `report`

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(std::string_view name) const {
        for (std::size_t k = 0; k < header.size(); ++k)
            if (header[k] == name) return k;
        throw ConfigError("csv has no column " + std::string(name));
    }
    std::vector<double> numbers(std::string_view name) const {
        const auto k = column(name);
        std::vector<double> out;
        for (const auto& r : rows) out.push_back(k < r.size() ? std::strtod(r[k].c_str(), nullptr) : std::nan(""));
        return out;
    }
};

inline std::optional<Table> read_table(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    if (!is) return std::nullopt;
    Table t;
    std::string line;
    bool first = true;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (first) {
            t.header = csv_split(line);
            first = false;
        } else {
            t.rows.push_back(csv_split(line));
        }
    }
    if (first) return std::nullopt;
    return t;
}

// ---------------------------------------------------------------------------
// Plots, rebuilt from the CSVs so `report` can redo them.

/// Returns the number of CSVs a plot was drawn from.
inline std::size_t render_plots(Artifacts& out) {
    std::size_t used = 0;
    if (auto t = read_table(out.path("ipde_u.csv"))) {
        ++used;
        Plot p{"u(t, x) profiles", "x", "u", false, false, {}, {}};
        std::vector<double> xs;
        for (std::size_t k = 1; k < t->header.size(); ++k) xs.push_back(std::strtod(t->header[k].c_str(), nullptr));
        const std::size_t nt = t->rows.size();
        std::vector<std::size_t> picks;
        if (nt > 0) {
            // t0, then rows closing in on T.
            for (double frac : {0.0, 0.5, 0.75, 0.9, 0.97}) {
                const auto i = std::min(nt - 1, static_cast<std::size_t>(frac * static_cast<double>(nt - 1)));
                if (picks.empty() || picks.back() != i) picks.push_back(i);
            }
        }
        for (auto i : picks) {
            Series s;
            s.label = "t=" + detail::short_num(std::strtod(t->rows[i][0].c_str(), nullptr));
            s.x = xs;
            for (std::size_t k = 1; k < t->rows[i].size(); ++k) s.y.push_back(std::strtod(t->rows[i][k].c_str(), nullptr));
            p.series.push_back(std::move(s));
        }
        out.write("profile.svg", render_svg(p));
    }
    if (auto t = read_table(out.path("blowup.csv"))) {
        ++used;
        Plot p{"blow-up of u(., x0)", "T - t", "u", true, true, {}, {}};
        Series s{"u", t->numbers("tau"), t->numbers("u"), false};
        p.series.push_back(s);
        if (auto f = read_table(out.path("blowup_fit.csv")); f && !f->rows.empty()) {
            const double slope = f->numbers("slope")[0], icpt = f->numbers("intercept")[0];
            const double lo = f->numbers("lo")[0], hi = f->numbers("hi")[0];
            Series fit{"fit", {lo, hi}, {std::exp(icpt) * std::pow(lo, slope), std::exp(icpt) * std::pow(hi, slope)}, true};
            p.series.push_back(fit);
            p.notes.push_back("fitted slope " + detail::short_num(slope) + ", expected " +
                              detail::short_num(f->numbers("expected")[0]) + " on [" + detail::short_num(lo) + ", " +
                              detail::short_num(hi) + "]");
        }
        out.write("blowup.svg", render_svg(p));
    }
    Plot ladder{"per-level values", "n", "u(t0, x0)", true, false, {}, {}};
    if (auto t = read_table(out.path("bsde_levels.csv"))) {
        ++used;
        const auto n = t->numbers("n"), u = t->numbers("u_root"), se = t->numbers("std_error");
        std::vector<double> lo, hi;
        for (std::size_t k = 0; k < u.size(); ++k) {
            lo.push_back(u[k] - 3.0 * se[k]);
            hi.push_back(u[k] + 3.0 * se[k]);
        }
        ladder.series.push_back({"bsde", n, u, false});
        ladder.series.push_back({"bsde -3 s.e.", n, lo, true});
        ladder.series.push_back({"bsde +3 s.e.", n, hi, true});
    }
    if (auto t = read_table(out.path("ipde_levels.csv"))) {
        ++used;
        ladder.series.push_back({"ipde", t->numbers("n"), t->numbers("u_t0_x0"), false});
    }
    if (!ladder.series.empty()) out.write("ladder.svg", render_svg(ladder));
    return used;
}

// ---------------------------------------------------------------------------
// Pipeline stages

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

struct Session {
    Config cfg;
    std::string command;
    unsigned threads = 1;
    std::ostream* log = &std::cerr;
    std::unique_ptr<Artifacts> out;
    json timings = json::object();
    json diagnostics = json::object();
    verify::VerificationReport report;
    std::optional<model::AuditReport> audit;

    template <class Fn>
    auto timed(const std::string& stage, Fn&& fn) {
        Stopwatch sw;
        *log << "[" << stage << "] running\n";
        if constexpr (std::is_void_v<decltype(fn())>) {
            fn();
            timings[stage] = sw.seconds();
        } else {
            auto r = fn();
            timings[stage] = sw.seconds();
            return r;
        }
    }
};

inline void merge_prefixed(verify::VerificationReport& into, const verify::VerificationReport& from,
                           const std::string& prefix) {
    for (auto c : from.checks()) {
        c.name = prefix + c.name;
        into.add(std::move(c));
    }
}

inline model::AuditReport stage_audit(Session& s, const model::ProblemSpec<1>& spec) {
    auto rep = s.timed("audit", [&] { return model::audit_assumptions(spec, build_probe_plan(s.cfg)); });
    std::ostringstream os;
    CsvWriter w(os);
    w.row("id", "status", "probes", "margin", "estimate", "witness", "note");
    for (const auto& e : rep.entries)
        w.row(e.id, e.vacuous ? "vacuous" : (e.pass ? "pass" : "fail"), e.probes, e.margin, e.estimate, e.witness,
              e.note);
    s.out->write("audit.csv", os.str());
    s.audit = rep;
    return rep;
}

struct BsdeRun {
    bsde::LimitSolution<1> limit;
    forward::PathBundle<1> bundle;
};

inline BsdeRun stage_bsde(Session& s, const model::ProblemSpec<1>& spec) {
    const auto& c = s.cfg;
    const auto mc = build_monte_carlo(c);
    const auto schedule = c.levels("bsde.schedule");
    const double t0 = c.num("forward.t0"), x0 = c.num("forward.x0");
    BsdeRun run;
    s.timed("forward", [&] {
        if (!c.empty("bsde.replay")) {
            run.bundle = forward::read_bundle<1>(c.str("bsde.replay"));
        } else {
            require(t0 < spec.horizon(), "forward.t0 must be < T");
            const auto grid = forward::TimeGrid::graded(t0, spec.horizon(), mc.n_steps, mc.grading);
            auto sim = mc.simulation;
            sim.gamma = spec.generator.gamma;
            run.bundle = forward::simulate_paths(spec.model, t0, Point<1>{x0}, grid, mc.n_paths, mc.seed, sim);
        }
    });
    if (c.flag("forward.save_paths")) {
        forward::write_bundle(s.out->path("paths.bin").string(), run.bundle);
        s.out->record("paths.bin");
    }
    {
        std::ostringstream os;
        forward::write_bundle_summary(os, run.bundle);
        s.out->write("forward_summary.csv", os.str());
    }
    s.diagnostics["forward"] = {{"n_paths", run.bundle.n_paths},
                                {"n_steps", run.bundle.n_steps()},
                                {"delta_cut", run.bundle.delta_cut},
                                {"total_rate", run.bundle.total_rate},
                                {"small_jump_variance", run.bundle.small_jump_variance},
                                {"small_jump_mode", c.str("forward.small_jump_mode")},
                                {"replayed", !c.empty("bsde.replay")}};

    run.limit = s.timed("bsde", [&] {
        return bsde::monotone_limit_on(run.bundle, spec, schedule, c.num("bsde.tol"), mc);
    });
    std::ostringstream os;
    CsvWriter w(os);
    w.row("n", "u_root", "gap", "std_error", "clamp_fraction", "zu_norm", "max_y", "theta", "under_resolved");
    for (const auto& l : run.limit.summaries)
        w.row(l.n, l.u_root, l.gap, l.std_error, l.clamp_fraction, l.zu_norm, l.max_y, l.theta,
              l.under_resolved ? "true" : "false");
    s.out->write("bsde_levels.csv", os.str());
    s.diagnostics["bsde"] = {{"u_limit", run.limit.u_limit},
                             {"last_gap", run.limit.gap},
                             {"converged_heuristic", run.limit.converged},
                             {"monotone_3se", run.limit.monotone},
                             {"flags", run.limit.flags}};
    return run;
}

struct IpdeRun {
    std::vector<ipde::IpdeSolution> levels;
    std::vector<double> gaps;
    bool converged = false;
    std::optional<ipde::IpdeSolution> coarse;  ///< last level on the halved grid
};

inline IpdeRun stage_ipde(Session& s, const model::ProblemSpec<1>& spec) {
    const auto& c = s.cfg;
    const auto grid = build_grid(c);
    const auto nt = c.count("ipde.nt");
    const auto schedule = c.levels("ipde.schedule");
    const double tol = c.num("ipde.tol");
    auto opt = build_ipde_options(c);
    const double T = spec.horizon();
    IpdeRun run;
    s.timed("ipde", [&] {
        if (!spec.terminal.singular.empty()) {
            auto res = ipde::solve_singular_ipde(spec, grid, nt, schedule, tol, opt, true);
            run.levels = std::move(res.levels);
            run.gaps = res.gaps;
            run.converged = res.converged;
        } else {
            require(std::is_sorted(schedule.begin(), schedule.end()) &&
                        std::adjacent_find(schedule.begin(), schedule.end()) == schedule.end(),
                    "ipde.schedule must be strictly increasing");
            if (!opt.lip_y)
                opt.lip_y = model::estimate_lipschitz_y<1>(model::truncate_generator(spec.generator, schedule.back(), T),
                                                           T, schedule.back(), ipde::detail::lipschitz_probe(grid), 401);
            for (int n : schedule) {
                run.levels.push_back(ipde::solve_truncated_ipde(spec, n, grid, nt, opt));
                double gap = 0.0;
                if (run.levels.size() > 1) {
                    const auto& a = run.levels[run.levels.size() - 2];
                    const auto& b = run.levels.back();
                    for (std::size_t i = 0; i <= b.nt(); ++i) {
                        if (b.times[i] > T - opt.gap_epsilon) break;
                        for (std::size_t j = 0; j < b.nx(); ++j) gap = std::max(gap, std::abs(b.at(i, j) - a.at(i, j)));
                    }
                }
                run.gaps.push_back(gap);
            }
            run.converged = run.levels.size() > 1 && run.gaps.back() <= tol;
        }
        if (c.flag("ipde.coarse_check")) {
            const auto cg = ipde::SpaceGrid::uniform(grid.x_min, grid.x_max, (grid.nx - 1) / 2 + 1);
            auto copt = opt;
            copt.lip_y = run.levels.back().lip_y;
            run.coarse = ipde::solve_truncated_ipde(spec, schedule.back(), cg, std::max<std::size_t>(1, nt / 2), copt);
        }
    });

    const double t0 = opt.t0, x0 = c.num("forward.x0");
    {
        std::ostringstream os;
        CsvWriter w(os);
        w.row("n", "u_t0_x0", "gap", "sup_norm", "max_cfl", "theta_min", "theta_max", "bound_violations",
              "negative_violations", "max_principle_violations", "worst_bound_excess", "extrapolated_fraction",
              "dropped_small_jump");
        for (std::size_t k = 0; k < run.levels.size(); ++k) {
            const auto& l = run.levels[k];
            const auto [tmin, tmax] = std::minmax_element(l.theta.begin(), l.theta.end());
            w.row(l.n, l.value(t0, x0), run.gaps[k], l.sup_norm(), l.max_cfl, l.theta.empty() ? 0.0 : *tmin,
                  l.theta.empty() ? 0.0 : *tmax, l.bound_violations, l.negative_violations, l.max_principle_violations,
                  l.worst_bound_excess, l.extrapolated_fraction, l.dropped_small_jump);
        }
        s.out->write("ipde_levels.csv", os.str());
    }
    {
        const auto& l = run.levels.back();
        std::ostringstream os;
        CsvWriter w(os);
        w.field("t\\x");
        for (double x : l.grid.nodes) w.field(x);
        w.end_row();
        for (std::size_t i = 0; i <= l.nt(); ++i) {
            w.field(l.times[i]);
            for (std::size_t j = 0; j < l.nx(); ++j) w.field(l.at(i, j));
            w.end_row();
        }
        s.out->write("ipde_u.csv", os.str());
    }
    json levels = json::array();
    for (const auto& l : run.levels)
        levels.push_back({{"n", l.n},
                          {"sup_norm", l.sup_norm()},
                          {"bound_radius", model::truncation_radius(l.n, T)},
                          {"bound_violations", l.bound_violations},
                          {"worst_bound_excess", l.worst_bound_excess},
                          {"max_cfl", l.max_cfl},
                          {"lip_y", l.lip_y},
                          {"max_dt", l.max_dt}});
    s.diagnostics["ipde"] = {{"levels", levels},
                             {"gaps", run.gaps},
                             {"converged_heuristic", run.converged},
                             {"grid", {{"x_min", grid.x_min}, {"x_max", grid.x_max}, {"nx", grid.nx}, {"nt", nt}}}};
    return run;
}

/// Comparison-ODE value the config asks to reproduce, or nullopt.
inline std::optional<double> oracle_target(const Session& s, const model::ProblemSpec<1>& spec) {
    const auto n = s.cfg.opt_num("verify.oracle_n");
    if (!n) return std::nullopt;
    if (!spec.generator.constant_decay)
        throw ConfigError("verify.oracle_n needs a constant decay coefficient (generator.a or generator.eta)");
    const auto f0 = detail::constant_of(detail::expr(s.cfg, "generator.f0", {Var::t, Var::x}));
    if (!f0) throw ConfigError("verify.oracle_n needs a constant generator.f0");
    return verify::ode_oracle(spec.generator.q, *spec.generator.constant_decay, *f0, *n, spec.horizon(),
                              s.cfg.num("forward.t0"));
}

inline void verify_bsde(Session& s, const model::ProblemSpec<1>& spec, const BsdeRun& run) {
    auto opt = build_invariant_options(s.cfg);
    if (s.audit) opt.audit = &*s.audit;
    const double t0 = s.cfg.num("forward.t0"), x0 = s.cfg.num("forward.x0");
    merge_prefixed(s.report, verify::bsde_invariant_suite<1>(run.limit, spec, t0, Point<1>{x0}, opt), "bsde.");
    if (const auto target = oracle_target(s, spec)) {
        const double tol = s.cfg.num("verify.oracle_tol") + s.cfg.num("verify.n_se") * run.limit.summaries.back().std_error;
        const double err = std::abs(run.limit.u_limit - *target);
        s.report.add({"bsde.oracle", err <= tol ? verify::Status::pass : verify::Status::fail, run.limit.u_limit,
                      *target, tol, "t=" + format_double(t0) + " x=" + format_double(x0), "comparison ODE"});
    }
}

inline void verify_ipde(Session& s, const model::ProblemSpec<1>& spec, const IpdeRun& run) {
    auto opt = build_invariant_options(s.cfg);
    if (s.audit) opt.audit = &*s.audit;
    const double t0 = s.cfg.num("forward.t0"), x0 = s.cfg.num("forward.x0");
    const double T = spec.horizon();
    merge_prefixed(s.report, verify::ipde_invariant_suite(run.levels, spec, x0, opt), "ipde.");
    const auto& last = run.levels.back();
    if (const auto target = oracle_target(s, spec)) {
        const double tol = s.cfg.num("verify.oracle_tol");
        const double v = last.value(t0, x0);
        s.report.add({"ipde.oracle", std::abs(v - *target) <= tol ? verify::Status::pass : verify::Status::fail, v,
                      *target, tol, "t=" + format_double(t0) + " x=" + format_double(x0), "comparison ODE"});
    }
    if (const auto xb = s.cfg.opt_num("verify.blowup_x")) {
        const auto window = s.cfg.pairs("verify.blowup_window");
        if (window.size() != 1) throw ConfigError("verify.blowup_window takes one lo:hi pair");
        std::vector<std::pair<double, double>> samples;
        for (std::size_t i = 0; i <= last.nt(); ++i)
            if (last.times[i] < T) samples.emplace_back(T - last.times[i], last.value(last.times[i], *xb));
        std::sort(samples.begin(), samples.end());
        {
            std::ostringstream os;
            CsvWriter w(os);
            w.row("tau", "u");
            for (auto [tau, u] : samples) w.row(tau, u);
            s.out->write("blowup.csv", os.str());
        }
        const auto fit = verify::blowup_rate_fit(samples, window[0].first, window[0].second);
        const double expected = -1.0 / spec.generator.q;
        const double tol = s.cfg.num("verify.blowup_tol");
        {
            std::ostringstream os;
            CsvWriter w(os);
            w.row("slope", "intercept", "r2", "used", "lo", "hi", "expected");
            w.row(fit.slope, fit.intercept, fit.r2, fit.used, window[0].first, window[0].second, expected);
            s.out->write("blowup_fit.csv", os.str());
        }
        s.report.add({"ipde.blowup_rate", std::abs(fit.slope - expected) <= tol ? verify::Status::pass : verify::Status::fail,
                      fit.slope, expected, tol, "x=" + format_double(*xb) + " r2=" + format_double(fit.r2),
                      "log-log slope of u(., x) against T - t"});
    }
}

inline void stage_compare(Session& s, const model::ProblemSpec<1>& spec, const IpdeRun& ipde_run) {
    const auto& c = s.cfg;
    const auto pts = probe_points(c);
    const auto schedule = c.levels("bsde.schedule");
    const auto mc = build_monte_carlo(c);
    const auto id = spec_id(c);
    verify::SolverEstimates mcest{"bsde", id, schedule.back(), {}};
    s.timed("compare", [&] {
        for (auto [t, x] : pts) {
            const auto lim = bsde::monotone_limit<1>(spec, t, Point<1>{x}, schedule, c.num("bsde.tol"), mc);
            mcest.points.push_back({t, x, lim.u_limit, lim.summaries.back().std_error, 0.0});
        }
    });
    const auto fd = verify::ipde_estimates(ipde_run.levels.back(), ipde_run.coarse ? &*ipde_run.coarse : nullptr, pts, id);
    const auto rep = verify::cross_validate(mcest, fd, build_tolerance(c));
    std::ostringstream os;
    CsvWriter w(os);
    w.row("t", "x", "bsde", "bsde_std_error", "ipde", "ipde_grid_error", "gap", "tolerance", "status");
    for (std::size_t k = 0; k < pts.size(); ++k) {
        const auto& chk = rep.checks()[k];
        w.row(pts[k].first, pts[k].second, mcest.points[k].value, mcest.points[k].std_error, fd.points[k].value,
              fd.points[k].grid_error, chk.measured, chk.tolerance, verify::to_string(chk.status));
    }
    s.out->write("compare.csv", os.str());
    s.report.merge(rep);
}

inline json verification_json(const verify::VerificationReport& r) {
    json checks = json::array();
    for (const auto& c : r.checks())
        checks.push_back({{"name", c.name},
                          {"status", verify::to_string(c.status)},
                          {"measured", format_double(c.measured)},
                          {"expected", format_double(c.expected)},
                          {"tolerance", format_double(c.tolerance)},
                          {"witness", c.witness},
                          {"note", c.note}});
    return {{"summary", r.summary()},
            {"all_pass", r.all_pass()},
            {"pass", r.count(verify::Status::pass)},
            {"fail", r.count(verify::Status::fail)},
            {"info", r.count(verify::Status::info)},
            {"vacuous", r.count(verify::Status::vacuous)},
            {"checks", checks}};
}

inline void write_manifest(Session& s, int exit_code) {
    const auto& c = s.cfg;
    json values = json::object();
    for (const auto& [k, v] : c.values()) values[k] = v;
    json m;
    m["program"] = "singfbsde";
    m["version"] = kVersion;
    m["command"] = s.command;
    m["versions"] = {{"compiler", __VERSION__},
                     {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                   std::to_string(EIGEN_MINOR_VERSION)},
                     {"boost", BOOST_LIB_VERSION},
                     {"openssl", OpenSSL_version(OPENSSL_VERSION)}};
    m["config"] = {{"resolved", c.resolved()}, {"values", values}, {"spec_id", spec_id(c)}};
    m["seeds"] = {{"forward", c.str("forward.seed")}, {"audit", c.str("verify.audit_seed")}};
    m["threads"] = s.threads;
    m["tolerances"] = {{"n_se", c.num("verify.n_se")},
                       {"cross_validate_relative", c.num("verify.relative")},
                       {"cross_validate_absolute", c.num("verify.absolute")},
                       {"oracle", c.num("verify.oracle_tol")},
                       {"apriori_rel", c.num("verify.apriori_rel")},
                       {"terminal_rel", c.num("verify.terminal_rel")},
                       {"blowup", c.num("verify.blowup_tol")},
                       {"ipde_monotone_slack_ulps", 16},
                       {"bsde_tol", c.num("bsde.tol")},
                       {"ipde_tol", c.num("ipde.tol")}};
    m["timings_s"] = s.timings;
    m["diagnostics"] = s.diagnostics;
    m["verification"] = verification_json(s.report);
    m["exit_code"] = exit_code;
    m["files"] = s.out->inventory();
    const auto text = m.dump(2) + "\n";
    std::ofstream os(s.out->path("manifest.json"), std::ios::binary | std::ios::trunc);
    os << text;
    if (!os) throw ConfigError("cannot write manifest.json");
}

inline int finish(Session& s, std::ostream& out) {
    {
        std::ostringstream os;
        s.report.write_csv(os);
        s.out->write("verification.csv", os.str());
    }
    if (s.cfg.flag("output.plots")) render_plots(*s.out);
    const int code = s.report.all_pass() ? kOk : kVerificationFailed;
    write_manifest(s, code);
    for (const auto& c : s.report.checks())
        if (c.status == verify::Status::fail)
            out << "FAIL " << c.name << ": measured " << format_double(c.measured) << ", tolerance "
                << format_double(c.tolerance) << (c.witness.empty() ? "" : ", at " + c.witness) << '\n';
    out << "verification: " << s.report.summary() << '\n' << "artifacts: " << s.out->dir().string() << '\n';
    return code;
}

// ---------------------------------------------------------------------------
// Commands

inline int cmd_pipeline(Session& s, std::ostream& out) {
    const auto spec = build_spec(s.cfg);
    s.out = std::make_unique<Artifacts>(s.cfg.str("output.dir"));
    s.out->write("resolved.ini", s.cfg.resolved());
    const bool run_all = s.command == "run";
    const bool want_bsde = (run_all && s.cfg.flag("bsde.enabled")) || s.command == "bsde";
    const bool want_ipde = (run_all && s.cfg.flag("ipde.enabled")) || s.command == "ipde" || s.command == "compare";

    if (s.command == "audit" || run_all) {
        const auto rep = stage_audit(s, spec);
        std::vector<std::string> failed;
        for (const auto& e : rep.entries) {
            if (s.command == "audit" || !e.pass)
                out << e.id << ' ' << (e.vacuous ? "vacuous" : (e.pass ? "pass" : "fail")) << " margin "
                    << format_double(e.margin) << (e.witness.empty() ? "" : " witness " + e.witness)
                    << (e.note.empty() ? "" : " (" + e.note + ")") << '\n';
            if (!e.pass) failed.push_back(e.id);
        }
        if (s.command == "audit") {
            for (const auto& id : failed) s.report.add({"audit." + id, verify::Status::fail, rep.find(id).margin, 0.0,
                                                        0.0, rep.find(id).witness, rep.find(id).note});
            if (failed.empty()) s.report.add({"audit", verify::Status::pass, 0.0, 0.0, 0.0, "", "all conditions hold"});
        } else {
            std::string note = failed.empty() ? "all conditions hold on the probes" : "failed:";
            for (const auto& id : failed) note += " " + id;
            s.report.add({"audit", verify::Status::info, static_cast<double>(failed.size()), 0.0, 0.0, "", note});
        }
    }
    std::optional<IpdeRun> ipde_run;
    if (want_bsde) {
        const auto run = stage_bsde(s, spec);
        verify_bsde(s, spec, run);
    }
    if (want_ipde) {
        ipde_run = stage_ipde(s, spec);
        if (s.command != "compare") verify_ipde(s, spec, *ipde_run);
    }
    if (s.command == "compare" || (run_all && want_bsde && want_ipde && !s.cfg.empty("verify.points")))
        stage_compare(s, spec, *ipde_run);
    return finish(s, out);
}

/// Bare keys q, a, f0, n, T, t; defaults come from the config when one is given.
inline int cmd_oracle(const Config& cfg, const std::vector<std::pair<std::string, std::string>>& bare, bool have_config,
                      std::ostream& out) {
    std::map<std::string, double> p{{"q", 2.0}, {"a", 1.0}, {"f0", 0.0}, {"n", kInf}, {"T", 1.0}, {"t", 0.0}};
    if (have_config) {
        const auto spec = build_spec(cfg);
        p["q"] = spec.generator.q;
        if (spec.generator.constant_decay) p["a"] = *spec.generator.constant_decay;
        if (auto f0 = detail::constant_of(detail::expr(cfg, "generator.f0", {Var::t, Var::x}))) p["f0"] = *f0;
        if (auto n = cfg.opt_num("verify.oracle_n")) p["n"] = *n;
        p["T"] = spec.horizon();
        p["t"] = cfg.num("forward.t0");
    }
    for (const auto& [k, v] : bare) {
        if (!p.count(k)) throw ConfigError("oracle: unknown key " + k + " (expected q, a, f0, n, T, t)");
        p[k] = Config::parse_number(k, v);
    }
    const double y = verify::ode_oracle(p["q"], p["a"], p["f0"], p["n"], p["T"], p["t"]);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", y);
    out << buf << '\n';
    return kOk;
}

inline int cmd_report(const std::string& dir, std::ostream& out) {
    if (!fs::is_directory(dir)) throw ConfigError("report: " + dir + " is not a directory");
    Artifacts art(dir);
    const auto used = render_plots(art);
    if (used == 0) throw ConfigError("report: no result CSVs in " + dir);
    out << "re-rendered plots from " << used << " CSV files in " << dir << '\n';
    return kOk;
}

inline unsigned env_threads() {
    if (const char* v = std::getenv("SINGFBSDE_THREADS")) {
        char* end = nullptr;
        const long n = std::strtol(v, &end, 10);
        if (end != v && *end == '\0' && n >= 1) return static_cast<unsigned>(n);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Entry point; args excludes the program name.
inline int run_cli(std::vector<std::string> args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Numerical lab for BSDEs with jumps and singular terminal values", "singfbsde"};
    app.require_subcommand(1);
    std::string config_path, out_dir;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> sets;
    unsigned threads = env_threads();
    app.add_option("--config", config_path, "INI run configuration");
    app.add_option("--seed", seed, "master seed (overrides forward.seed)");
    app.add_option("--out", out_dir, "artifact directory (overrides output.dir)");
    app.add_option("--set", sets, "section.key=value override, repeatable")->take_all();
    app.add_option("--threads", threads, "worker threads (default: SINGFBSDE_THREADS or all cores)")
        ->check(CLI::PositiveNumber);
    const std::vector<std::pair<std::string, std::string>> commands{
        {"run", "audit, forward, bsde, ipde and verification"},
        {"audit", "condition audit only"},
        {"bsde", "Monte Carlo level schedule"},
        {"ipde", "finite-difference level schedule"},
        {"compare", "cross-validate the two solvers at verify.points"},
        {"oracle", "comparison ODE value; keys q a f0 n T t via --set"},
        {"report", "re-render plots from the CSVs in --out"}};
    for (const auto& [name, help] : commands) app.add_subcommand(name, help)->fallthrough();

    try {
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kConfigError;
    }

    Session s;
    s.command = app.get_subcommands().front()->get_name();
    s.threads = threads;
    s.log = &err;
    set_default_threads(threads);
    try {
        if (!config_path.empty()) s.cfg.read_file(config_path);
        std::vector<std::pair<std::string, std::string>> bare;
        for (const auto& a : sets) {
            const auto eq = a.find('=');
            if (s.command == "oracle" && eq != std::string::npos && a.substr(0, eq).find('.') == std::string::npos)
                bare.emplace_back(trim(a.substr(0, eq)), trim(a.substr(eq + 1)));
            else
                s.cfg.apply_override(a);
        }
        if (seed) s.cfg.set("forward.seed", std::to_string(*seed));
        if (!out_dir.empty()) s.cfg.set("output.dir", out_dir);

        if (s.command == "oracle") return cmd_oracle(s.cfg, bare, !config_path.empty(), out);
        if (s.command == "report") return cmd_report(s.cfg.str("output.dir"), out);
        return cmd_pipeline(s, out);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const DomainError& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << '\n';
        return kNumericalError;
    } catch (const std::exception& e) {
        err << "numerical failure: " << e.what() << '\n';
        return kNumericalError;
    }
}

}  // namespace singfbsde::cli
