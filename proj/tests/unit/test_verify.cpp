#include "singfbsde/verify/checks.hpp"
#include "singfbsde/verify/oracle.hpp"

#include <gtest/gtest.h>

using namespace singfbsde;
using namespace singfbsde::verify;

namespace {

model::ProblemSpec<1> power_case(double q, double sigma, std::vector<std::pair<double, double>> singular) {
    model::ForwardModel<1> m;
    m.diffusion = [sigma](const Point<1>&) { return Matrix<1>{sigma}; };
    model::TerminalData<1> term;
    term.finite_part = [](const Point<1>& x) { return 0.5 + 0.1 * std::abs(x[0]); };
    term.singular = model::SingularSet<1>::intervals(std::move(singular));
    return model::ProblemSpec<1>(m, model::power_generator<1>(q, 1.0), term);
}

}  // namespace

TEST(OdeOracle, ClosedForms) {
    EXPECT_NEAR(ode_oracle(2.0, 1.0, 0.0, 10.0, 1.0, 0.0), 0.705346, 1e-6);
    EXPECT_NEAR(ode_oracle(2.0, 1.0, 0.0, kInf, 1.0, 0.0), 0.707107, 1e-6);
    EXPECT_EQ(ode_oracle(2.0, 1.0, 0.0, 10.0, 1.0, 1.0), 10.0);
    EXPECT_EQ(ode_oracle(3.0, 2.0, 0.5, 4.0, 1.0, 1.0), 4.0);
    EXPECT_THROW(ode_oracle(2.0, 1.0, 0.0, kInf, 1.0, 1.0), DomainError);
    EXPECT_THROW(ode_oracle(2.0, 0.0, 0.0, 1.0, 1.0, 0.0), DomainError);
    EXPECT_THROW(ode_oracle(2.0, 1.0, 0.0, 1.0, 1.0, 2.0), DomainError);
}

TEST(OdeOracle, IntegratorAgreesWithClosedForm) {
    for (double q : {0.5, 1.0, 2.0, 3.0})
        for (double n : {1.0, 10.0, kInf})
            for (double t : {0.0, 0.5, 0.99})
                EXPECT_NEAR(ode_oracle_integrated(q, 1.3, 0.0, n, 1.0, t), ode_oracle(q, 1.3, 0.0, n, 1.0, t), 1e-6)
                    << q << " " << n << " " << t;
}

TEST(OdeOracle, SourceTermApproachesEquilibrium) {
    // y' = -y^3 + 1 in s has equilibrium 1; from y(0) = 10 the solution decays towards it
    const double y = ode_oracle(2.0, 1.0, 1.0, 10.0, 20.0, 0.0);
    EXPECT_NEAR(y, 1.0, 1e-8);
    // independent check: explicit small-step Euler in y
    double v = 10.0;
    const int N = 2000000;
    for (int i = 0; i < N; ++i) v += 0.5 / N * (-v * v * v + 1.0);
    EXPECT_NEAR(ode_oracle(2.0, 1.0, 1.0, 10.0, 1.0, 0.5), v, 1e-5);
}

TEST(BlowupFit, ExactPowerLaw) {
    std::vector<std::pair<double, double>> s;
    for (int k = 0; k < 10; ++k) {
        const double r = 0.01 * std::pow(1.5, k);
        s.emplace_back(r, std::pow(2.0 * r, -0.5));
    }
    const auto f = blowup_rate_fit(s);
    EXPECT_NEAR(f.slope, -0.5, 1e-6);
    EXPECT_NEAR(f.r2, 1.0, 1e-12);
    std::vector<std::pair<double, double>> c;
    for (int k = 1; k <= 6; ++k) c.emplace_back(0.1 * k, 3.0);
    EXPECT_NEAR(blowup_rate_fit(c).slope, 0.0, 1e-6);
}

TEST(BlowupFit, RejectsBadInput) {
    std::vector<std::pair<double, double>> s{{0.1, 1.0}, {0.2, 1.0}, {0.3, 1.0}, {0.4, 1.0}};
    EXPECT_THROW(blowup_rate_fit(s), DomainError);
    s.emplace_back(0.5, 0.0);
    EXPECT_THROW(blowup_rate_fit(s), DomainError);
    s.back().second = 1.0;
    EXPECT_THROW(blowup_rate_fit(s, 0.25, 1.0), DomainError);  // only 3 samples in the window
}

TEST(BlowupFit, CubicPowerSolve) {
    auto spec = power_case(3.0, 0.05, {{1.0, kInf}});
    const auto grid = ipde::SpaceGrid::uniform(-1.0, 5.0, 61);
    ipde::IpdeOptions opt;
    opt.grading = 2.0;
    const auto res = ipde::solve_singular_ipde(spec, grid, 1500, {20, 80, 320}, 1e-2, opt);
    std::vector<std::pair<double, double>> s;
    for (std::size_t i = 0; i + 1 < res.solution.times.size(); ++i) {
        const double r = 1.0 - res.solution.times[i];
        if (r >= 0.01 && r <= 0.3) s.emplace_back(r, res.solution.value(res.solution.times[i], 2.0));
    }
    EXPECT_NEAR(blowup_rate_fit(s).slope, -1.0 / 3.0, 0.05);
}

TEST(Report, DuplicateNamesAndCsv) {
    VerificationReport r;
    r.add({"a", Status::pass, 1.0, 1.0, 0.0, "x=1, y=\"2\"", ""});
    r.add({"b", Status::info});
    EXPECT_THROW(r.add({"a"}), DomainError);
    EXPECT_TRUE(r.all_pass());
    r.add({"c", Status::fail});
    EXPECT_FALSE(r.all_pass());
    std::ostringstream os;
    r.write_csv(os);
    EXPECT_NE(os.str().find("\"x=1, y=\"\"2\"\"\""), std::string::npos);
    EXPECT_EQ(csv_split("a,\"x=1, y=\"\"2\"\"\",c")[1], "x=1, y=\"2\"");
}

TEST(CrossValidate, SymmetricAndMismatchRejected) {
    SolverEstimates a{"bsde", "spec", 5, {{0.0, 1.0, 1.00, 0.01, 0.0}, {0.0, 2.0, 2.0, 0.01, 0.0}}};
    SolverEstimates b{"ipde", "spec", 5, {{0.0, 1.0, 1.02, 0.0, 0.005}, {0.0, 2.0, 2.2, 0.0, 0.005}}};
    const auto ab = cross_validate(a, b), ba = cross_validate(b, a);
    ASSERT_EQ(ab.checks().size(), ba.checks().size());
    for (std::size_t k = 0; k < ab.checks().size(); ++k) {
        EXPECT_EQ(ab.checks()[k].status, ba.checks()[k].status);
        EXPECT_EQ(ab.checks()[k].witness, ba.checks()[k].witness);
    }
    EXPECT_EQ(ab.find("cross_validate[0]").status, Status::pass);
    EXPECT_EQ(ab.find("cross_validate[1]").status, Status::fail);
    EXPECT_EQ(ab.find("cross_validate_worst").witness, ab.find("cross_validate[1]").witness);
    auto c = b;
    c.spec_id = "other";
    EXPECT_THROW(cross_validate(a, c), DomainError);
    c = b;
    c.points[0].x = 1.5;
    EXPECT_THROW(cross_validate(a, c), DomainError);
}

TEST(CrossValidate, PureDriftTransport) {
    // f = 0, g = x, b = 1: u = x + (T - t) for both solvers
    model::ForwardModel<1> m;
    m.drift = [](const Point<1>&) { return Point<1>{1.0}; };
    model::TerminalData<1> term;
    term.finite_part = [](const Point<1>& x) { return x[0] + 5.0; };
    const model::ProblemSpec<1> spec(m, model::heat_generator<1>(), term);
    const auto grid = ipde::SpaceGrid::uniform(-5.0, 5.0, 201);
    const auto fine = ipde::solve_truncated_ipde(spec, 20, grid, 400);
    const auto coarse = ipde::solve_truncated_ipde(spec, 20, ipde::SpaceGrid::uniform(-5.0, 5.0, 101), 200);
    std::vector<std::pair<double, double>> pts{{0.0, -1.0}, {0.0, 0.0}, {0.5, 1.0}};
    const auto ie = ipde_estimates(fine, &coarse, pts, "drift");
    SolverEstimates be{"bsde", "drift", 20, {}};
    for (auto [t, x] : pts) {
        bsde::MonteCarloConfig<1> mc;
        mc.n_paths = 4;
        mc.n_steps = 20;
        const auto lim = bsde::monotone_limit<1>(spec, t, {x}, {20}, 1e-9, mc);
        be.points.push_back({t, x, lim.u_limit, lim.summaries[0].std_error, 0.0});
        EXPECT_NEAR(lim.u_limit, x + 5.0 + 1.0 - t, 1e-12);
    }
    const auto rep = cross_validate(be, ie);
    EXPECT_TRUE(rep.all_pass()) << rep.find("cross_validate_worst").witness;
}

TEST(InvariantSuite, PowerCaseAllPass) {
    auto spec = power_case(2.0, 0.2, {{1.0, kInf}});
    spec.terminal.nu = 0.5;
    const auto grid = ipde::SpaceGrid::uniform(-3.0, 4.0, 71);
    ipde::IpdeOptions opt;
    opt.grading = 2.0;
    const auto res = ipde::solve_singular_ipde(spec, grid, 600, {5, 10, 20, 40}, 1e-2, opt, true);
    model::ProbePlan<1> plan;
    plan.state_box = model::Box<1>{{-3.0}, {4.0}};
    plan.n_states = 200;
    plan.n_pairs = 500;
    const auto audit = model::audit_assumptions(spec, plan);
    InvariantOptions io;
    io.audit = &audit;
    const auto rep = ipde_invariant_suite(res.levels, spec, -1.0, io);
    EXPECT_TRUE(rep.all_pass()) << rep.summary();
    EXPECT_EQ(rep.checks().size(), 5u);
    // q = 2 can never satisfy the rho condition, so the terminal check is reported only
    EXPECT_EQ(rep.find("terminal_limit").status, Status::info);
    EXPECT_NE(rep.find("terminal_limit").note.find("rho"), std::string::npos);
    for (const char* id : {"level_bound", "level_monotone", "apriori_bound", "singular_divergence"})
        EXPECT_EQ(rep.find(id).status, Status::pass) << id << ": " << rep.find(id).witness;
}

TEST(InvariantSuite, EmptySingularSetIsVacuous) {
    auto spec = power_case(2.0, 0.2, {});
    const auto grid = ipde::SpaceGrid::uniform(-2.0, 2.0, 41);
    std::vector<ipde::IpdeSolution> levels{ipde::solve_truncated_ipde(spec, 1, grid, 100),
                                           ipde::solve_truncated_ipde(spec, 2, grid, 100)};
    const auto rep = ipde_invariant_suite(levels, spec, 0.0);
    EXPECT_EQ(rep.find("singular_divergence").status, Status::vacuous);
    EXPECT_EQ(rep.find("terminal_limit").status, Status::info);  // no audit supplied
}

TEST(InvariantSuite, D2ViolationDowngradesTerminalCheck) {
    auto spec = power_case(2.0, 0.1, {{1.0, kInf}});
    spec.model.jump = [](const Point<1>&, double e) { return Point<1>{e}; };
    spec.model.levy = model::LevyMeasureSpec::atoms({{-0.5, 1.0}});
    const auto grid = ipde::SpaceGrid::uniform(-3.0, 4.0, 71);
    const auto res = ipde::solve_singular_ipde(spec, grid, 400, {5, 10}, 1e-2, {}, true);
    model::ProbePlan<1> plan;
    plan.state_box = model::Box<1>{{-3.0}, {4.0}};
    plan.n_states = 200;
    plan.n_pairs = 500;
    const auto audit = model::audit_assumptions(spec, plan);
    ASSERT_FALSE(audit.find("D2").pass);
    InvariantOptions io;
    io.audit = &audit;
    const auto rep = ipde_invariant_suite(res.levels, spec, 0.0, io);
    const auto& c = rep.find("terminal_limit");
    EXPECT_EQ(c.status, Status::info);
    EXPECT_NE(c.note.find("not guaranteed"), std::string::npos);
    EXPECT_TRUE(std::isfinite(c.measured));
}

TEST(InvariantSuite, BsdeLevels) {
    model::ForwardModel<1> m;
    model::TerminalData<1> term;
    term.singular = model::SingularSet<1>::intervals({{-kInf, kInf}});
    const model::ProblemSpec<1> spec(m, model::power_generator<1>(2.0, 1.0), term);
    bsde::MonteCarloConfig<1> mc;
    mc.n_paths = 2;
    mc.n_steps = 500;
    mc.grading = 2.0;
    const auto lim = bsde::monotone_limit<1>(spec, 0.0, {0.0}, {5, 10, 20}, 1e-2, mc);
    const auto rep = bsde_invariant_suite(lim, spec, 0.0, Point<1>{0.0});
    EXPECT_EQ(rep.find("level_bound").status, Status::pass);
    EXPECT_EQ(rep.find("level_monotone").status, Status::pass);
    EXPECT_EQ(rep.find("apriori_bound").status, Status::pass);
    EXPECT_EQ(rep.find("terminal_limit").status, Status::vacuous);
    EXPECT_EQ(rep.find("singular_divergence").status, Status::info);
}

TEST(Modulus, QuadraticAndConstant) {
    model::ForwardModel<1> m;
    m.horizon = 1.0;
    model::TerminalData<1> term;
    term.finite_part = [](const Point<1>& x) { return x[0] * x[0]; };
    const model::ProblemSpec<1> spec(m, model::heat_generator<1>(), term);
    const auto grid = ipde::SpaceGrid::uniform(-2.0, 2.0, 81);
    const auto sol = ipde::solve_truncated_ipde(spec, 10, grid, 10);
    const auto est = modulus_estimate(sol, 0.25);
    EXPECT_NEAR(est.lipschitz, 4.0, grid.h + 1e-12);
    term.finite_part = [](const Point<1>&) { return 2.0; };
    const model::ProblemSpec<1> flat(m, model::heat_generator<1>(), term);
    const auto c = modulus_estimate(ipde::solve_truncated_ipde(flat, 10, grid, 10), 0.25);
    EXPECT_EQ(c.lipschitz, 0.0);
    EXPECT_TRUE(c.holder.empty());
    EXPECT_THROW(modulus_estimate(sol, 0.0), DomainError);
}
