#include "singfbsde/bsde/limit.hpp"

#include <gtest/gtest.h>

using namespace singfbsde;
using namespace singfbsde::bsde;
using forward::TimeGrid;

namespace {

double oracle(double q, double a, double n, double remaining) {
    return std::pow(q * a * remaining + std::pow(n, -q), -1.0 / q);
}

model::ProblemSpec<1> deterministic_power(double q, double level_value) {
    model::ForwardModel<1> m;
    m.horizon = 1.0;
    model::TerminalData<1> term;
    if (level_value > 0.0) term.finite_part = [level_value](const Point<1>&) { return level_value; };
    else term.singular = model::SingularSet<1>::intervals({{-kInf, kInf}});
    return model::ProblemSpec<1>(m, model::power_generator<1>(q, 1.0), term);
}

forward::PathBundle<1> brownian(std::size_t n, std::size_t steps, std::uint64_t seed, double sigma = 1.0) {
    model::ForwardModel<1> m;
    m.diffusion = [sigma](const Point<1>&) { return Matrix<1>{sigma}; };
    return forward::simulate_paths(m, 0.0, {0.0}, TimeGrid::uniform(0.0, 1.0, steps), n, seed);
}

}  // namespace

TEST(Regression, ConstantIsReproduced) {
    const auto b = brownian(5000, 4, 1);
    std::vector<double> c(b.n_paths, 3.25);
    for (const auto& basis : {RegressionBasis::polynomial(3), RegressionBasis::piecewise_linear(12)}) {
        const auto fit = condexp_regress<1>(b.node_states(2), c, basis);
        for (double v : fit) EXPECT_NEAR(v, 3.25, 1e-9);
    }
}

TEST(Regression, MartingaleProjection) {
    const std::size_t n = 20000;
    const auto b = brownian(n, 4, 2);
    std::vector<double> next(n);
    for (std::size_t p = 0; p < n; ++p) next[p] = b.state(3, p)[0];
    const auto fit = condexp_regress<1>(b.node_states(2), next, RegressionBasis::polynomial(1));
    // residual X_3 - X_2 has s.d. sqrt(dt); fitted error of a 2-parameter fit is ~ sqrt(dt) * sqrt(2 / n) * |z|
    const double se = std::sqrt(0.25) * std::sqrt(2.0 / n);
    double worst = 0.0;
    for (std::size_t p = 0; p < n; ++p) worst = std::max(worst, std::abs(fit[p] - b.state(2, p)[0]) / (1.0 + std::abs(b.state(2, p)[0]) / std::sqrt(0.5)));
    EXPECT_LT(worst, 3.0 * se);
}

TEST(Regression, IndependentIncrementProjectsToZero) {
    const std::size_t n = 20000;
    const auto b = brownian(n, 4, 3);
    std::vector<double> dw(n);
    for (std::size_t p = 0; p < n; ++p) dw[p] = b.increment(2, p)[0];
    const auto fit = condexp_regress<1>(b.node_states(2), dw, RegressionBasis::polynomial(2));
    const double se = std::sqrt(0.25 / n);
    for (std::size_t p = 0; p < n; p += 97) EXPECT_LT(std::abs(fit[p]), 3.0 * se * (1.0 + b.state(2, p)[0] * b.state(2, p)[0]));
}

TEST(Regression, RankDeficiencyReported) {
    const auto b = brownian(200, 4, 4);
    auto basis = RegressionBasis::polynomial(12);
    basis.ridge = 0.0;
    basis.max_condition = 1e6;
    std::vector<double> v(200, 1.0);
    EXPECT_THROW(condexp_regress<1>(b.node_states(2), v, basis), NumericalError);
}

TEST(Sweep, MartingaleTerminal) {
    const auto b = brownian(20000, 10, 5);
    auto gen = model::truncate_generator(model::heat_generator<1>(), 100, 1.0);
    const auto sol = backward_sweep<1>(b, gen, [](const Point<1>& x) { return 2.0 + x[0]; },
                                       RegressionBasis::polynomial(2));
    EXPECT_NEAR(sol.u_root, 2.0, 3.0 * sol.std_error + 1e-12);
    EXPECT_GT(sol.std_error, 0.0);
}

TEST(Sweep, DeterministicPowerMatchesOracle) {
    const auto spec = deterministic_power(2.0, 10.0);
    model::ForwardModel<1> m;
    const auto b = forward::simulate_paths(m, 0.0, {0.0}, TimeGrid::uniform(0.0, 1.0, 1000), 4, 1);
    const auto gen = model::truncate_generator(spec.generator, 10, 1.0);
    const auto sol = backward_sweep<1>(b, gen, model::truncate_terminal(spec.terminal, 10), RegressionBasis{});
    EXPECT_TRUE(sol.degenerate);
    EXPECT_NEAR(sol.u_root, oracle(2.0, 1.0, 10.0, 1.0), 1e-3);
    EXPECT_LE(sol.max_y(), 20.0);
}

TEST(Sweep, ExplicitEulerInDegenerateCase) {
    // theta = 0: Y_i = Y_{i+1} - dt Y_{i+1}^3 exactly.
    const auto spec = deterministic_power(2.0, 1.0);
    model::ForwardModel<1> m;
    const std::size_t N = 50;
    const auto b = forward::simulate_paths(m, 0.0, {0.0}, TimeGrid::uniform(0.0, 1.0, N), 3, 1);
    SweepOptions opt;
    opt.theta = 0.0;
    const auto sol = backward_sweep<1>(b, model::truncate_generator(spec.generator, 1, 1.0),
                                       model::truncate_terminal(spec.terminal, 1), RegressionBasis{}, opt);
    double y = 1.0;
    for (std::size_t i = 0; i < N; ++i) y = y - (1.0 / N) * y * y * y;
    EXPECT_NEAR(sol.u_root, y, 1e-14);
}

TEST(Sweep, FirstOrderRefinement) {
    const auto spec = deterministic_power(2.0, 1.0);
    model::ForwardModel<1> m;
    SweepOptions opt;
    opt.theta = 0.0;
    const double exact = oracle(2.0, 1.0, 1.0, 1.0);
    std::vector<double> errs;
    for (std::size_t N : {50u, 100u, 200u}) {
        const auto b = forward::simulate_paths(m, 0.0, {0.0}, TimeGrid::uniform(0.0, 1.0, N), 2, 1);
        const auto sol = backward_sweep<1>(b, model::truncate_generator(spec.generator, 1, 1.0),
                                           model::truncate_terminal(spec.terminal, 1), RegressionBasis{}, opt);
        errs.push_back(std::abs(sol.u_root - exact));
    }
    EXPECT_NEAR(errs[0] / errs[1], 2.0, 0.2);
    EXPECT_NEAR(errs[1] / errs[2], 2.0, 0.2);
}

TEST(Sweep, BoundedByLevelRadius) {
    model::ForwardModel<1> m;
    m.diffusion = [](const Point<1>&) { return Matrix<1>{0.5}; };
    m.jump = [](const Point<1>&, double e) { return Point<1>{0.3 * e}; };
    m.levy = model::LevyMeasureSpec::atoms({{1.0, 1.0}, {-1.0, 1.0}});
    forward::SimulationOptions<1> so;
    so.gamma = [](const Point<1>&, double) { return 0.5; };
    const auto b = forward::simulate_paths(m, 0.0, {0.0}, TimeGrid::uniform(0.0, 1.0, 20), 4000, 6, so);
    auto base = model::power_generator<1>(1.0, 1.0, [](double, const Point<1>& x) { return 10.0 + x[0] * x[0]; }, 0.5);
    for (int n : {1, 2, 4}) {
        const auto sol = backward_sweep<1>(b, model::truncate_generator(base, n, 1.0),
                                           [](const Point<1>& x) { return 100.0 * std::abs(x[0]); },
                                           RegressionBasis::polynomial(2));
        EXPECT_LE(sol.max_y(), n * 2.0);
        EXPECT_GE(*std::min_element(sol.y_vals.begin(), sol.y_vals.end()), 0.0);
    }
}

TEST(Limit, ConvergesToSingularOracle) {
    const auto spec = deterministic_power(2.0, 0.0);
    MonteCarloConfig<1> mc;
    mc.n_paths = 4;
    mc.n_steps = 2000;
    mc.grading = 2.0;
    const auto lim = monotone_limit<1>(spec, 0.0, {0.0}, {10, 20, 40, 80, 160}, 1e-3, mc);
    EXPECT_NEAR(lim.u_limit, std::pow(2.0, -0.5), 1e-3);
    EXPECT_TRUE(lim.monotone);
    EXPECT_TRUE(lim.converged);
    const auto u = lim.u_values();
    for (std::size_t k = 1; k < u.size(); ++k) EXPECT_LE(u[k - 1], u[k]);
}

TEST(Limit, BoundedDataStabilizes) {
    auto spec = deterministic_power(2.0, 3.0);
    MonteCarloConfig<1> mc;
    mc.n_paths = 2;
    mc.n_steps = 100;
    const auto lim = monotone_limit<1>(spec, 0.0, {0.0}, {3, 4, 8}, 1e-12, mc);
    EXPECT_EQ(lim.summaries[1].u_root, lim.summaries[2].u_root);
    EXPECT_TRUE(lim.converged);
}

TEST(Limit, RejectsBadSchedule) {
    const auto spec = deterministic_power(2.0, 3.0);
    MonteCarloConfig<1> mc;
    EXPECT_THROW(monotone_limit<1>(spec, 0.0, {0.0}, {4, 2}, 1e-3, mc), DomainError);
    EXPECT_THROW(monotone_limit<1>(spec, 1.0, {0.0}, {1, 2}, 1e-3, mc), DomainError);
}

TEST(ZuNorm, ZeroAndConstantZ) {
    const auto b = brownian(20000, 20, 8);
    const auto gen = model::truncate_generator(model::heat_generator<1>(), 10, 1.0);
    auto sol = backward_sweep<1>(b, gen, [](const Point<1>& x) { return 5.0 + x[0]; }, RegressionBasis::polynomial(1));
    const double rho = 0.5, ell = 1.5;
    // Z ~ 1: (int_0^1 (1-s)^rho ds)^{ell/2}, left-point Riemann sum of the same integral
    double riemann = 0.0;
    for (int i = 0; i < 20; ++i) riemann += 0.05 * std::pow(1.0 - 0.05 * i, rho);
    EXPECT_NEAR(zu_weighted_norm(sol, rho, ell), std::pow(riemann, ell / 2.0), 0.03);
    EXPECT_NEAR(riemann, 1.0 / 1.5, 0.03);
    for (auto& z : sol.z_vals) z = Point<1>{};
    std::fill(sol.b_vals.begin(), sol.b_vals.end(), 0.0);
    EXPECT_EQ(zu_weighted_norm(sol, rho, ell, 1.0), 0.0);
    EXPECT_THROW(zu_weighted_norm(sol, 1.0), DomainError);
}
