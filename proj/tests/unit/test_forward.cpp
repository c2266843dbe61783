#include "singfbsde/forward/persist.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <sstream>

using namespace singfbsde;
using namespace singfbsde::forward;
using model::Atom;
using model::LevyMeasureSpec;
using model::TailDensity;

namespace {

// lambda(de) = e^{-3/2} de on (0, 1]; its mass beyond c is 2 (c^{-1/2} - 1).
LevyMeasureSpec stable_like() {
    TailDensity d;
    d.density = [](double e) { return e > 0.0 ? std::pow(e, -1.5) : 0.0; };
    d.lo = 0.0;
    d.hi = 1.0;
    d.tail_mass = [](double c) { return 2.0 * (1.0 / std::sqrt(c) - 1.0); };
    return LevyMeasureSpec::density(d);
}

LevyMeasureSpec symmetric_atoms() { return LevyMeasureSpec::atoms({{1.0, 1.0}, {-1.0, 1.0}}); }

}  // namespace

TEST(Levy, AtomQuadrature) {
    EXPECT_DOUBLE_EQ(model::levy_quadrature(symmetric_atoms(), [](double e) { return e * e; }, 0.0), 2.0);
    EXPECT_DOUBLE_EQ(model::levy_quadrature(symmetric_atoms(), [](double) { return 0.0; }, 0.0), 0.0);
}

TEST(Levy, DensityQuadrature) {
    // int_0^1 e * e^{-3/2} de = 2
    EXPECT_NEAR(model::levy_quadrature(stable_like(), [](double e) { return e; }, 0.0), 2.0, 2e-8);
    EXPECT_NEAR(stable_like().two_moment(), 2.0 / 3.0 * 1.0, 1e-8);  // int_0^1 e^{1/2} de
}

TEST(Levy, TailMassMatchesAnalytic) {
    const std::vector<double> cuts{0.01, 0.1, 0.25, 0.5, 0.9};
    EXPECT_LT(model::tail_mass_discrepancy(stable_like(), cuts), 1e-6);
}

TEST(Levy, RejectsBadAtoms) {
    EXPECT_THROW(LevyMeasureSpec::atoms({{1.0, -1.0}}), ConfigError);
    EXPECT_THROW(LevyMeasureSpec::atoms({{0.0, 1.0}}), ConfigError);
}

TEST(JumpSampler, AtomRate) {
    const auto a = build_jump_sampler(LevyMeasureSpec::atoms({{1.0, 2.0}}), 0.5);
    EXPECT_DOUBLE_EQ(a.total_rate, 2.0);
    EXPECT_FALSE(a.empty_support_warning);
}

TEST(JumpSampler, DensityRate) {
    const auto a = build_jump_sampler(stable_like(), 0.25);
    EXPECT_NEAR(a.total_rate, 2.0, 1e-8);
    EXPECT_NEAR(a.large.total(), 2.0, 1e-8);
    EXPECT_NEAR(a.cdf.back(), 2.0, 1e-4);
}

TEST(JumpSampler, CutBeyondSupportWarns) {
    const auto a = build_jump_sampler(stable_like(), 2.0);
    EXPECT_EQ(a.total_rate, 0.0);
    EXPECT_TRUE(a.empty_support_warning);
    EXPECT_THROW(build_jump_sampler(stable_like(), 0.0), DomainError);
}

TEST(JumpSampler, SmallJumpVarianceShrinksWithCut) {
    double prev = kInf;
    for (double cut : {0.8, 0.4, 0.2, 0.1, 0.05}) {
        const auto a = build_jump_sampler(stable_like(), cut);
        EXPECT_LT(a.small_jump_variance, prev);
        EXPECT_LE(a.small_jump_variance, stable_like().two_moment() + 1e-12);
        // int_0^c e^{1/2} de
        EXPECT_NEAR(a.small_jump_variance, 2.0 / 3.0 * std::pow(cut, 1.5), 1e-8);
        prev = a.small_jump_variance;
    }
}

TEST(JumpSampler, MarksFollowNormalizedRestriction) {
    const auto a = build_jump_sampler(stable_like(), 0.25);
    auto rng = block_rng(5, 0, 0);
    double mean = 0.0;
    const int n = 200000;
    for (int k = 0; k < n; ++k) {
        const double e = a.sample_mark(rng);
        ASSERT_GT(e, 0.25);
        ASSERT_LE(e, 1.0);
        mean += e;
    }
    mean /= n;
    // E[e | e > 1/4] = int_{1/4}^1 e^{-1/2} de / 2 = (2 - 1) / 2
    EXPECT_NEAR(mean, 0.5, 3e-3);
}

TEST(Paths, DeterministicDrift) {
    model::ForwardModel<1> m;
    m.drift = [](const Point<1>&) { return Point<1>{1.0}; };
    const auto grid = TimeGrid::uniform(0.0, 1.0, 8);
    const auto b = simulate_paths(m, 0.0, {0.25}, grid, 100, 3);
    for (std::size_t p = 0; p < b.n_paths; ++p) EXPECT_DOUBLE_EQ(b.state(8, p)[0], 1.25);
}

TEST(Paths, ConstantWhenCoefficientsVanish) {
    model::ForwardModel<1> m;
    m.levy = symmetric_atoms();
    const auto b = simulate_paths(m, 0.0, {0.7}, TimeGrid::uniform(0.0, 1.0, 10), 50, 3);
    for (const auto& x : b.x) EXPECT_EQ(x[0], 0.7);
}

TEST(Paths, SameSeedSameBytes) {
    model::ForwardModel<1> m;
    m.diffusion = [](const Point<1>& x) { return Matrix<1>{0.2 + 0.1 * std::sin(x[0])}; };
    m.jump = [](const Point<1>&, double e) { return Point<1>{0.3 * e}; };
    m.levy = symmetric_atoms();
    SimulationOptions<1> opt;
    opt.gamma = [](const Point<1>&, double e) { return e > 0 ? 1.0 : 0.5; };
    const auto grid = TimeGrid::uniform(0.0, 1.0, 20);
    const auto a = simulate_paths(m, 0.0, {0.0}, grid, 3000, 11, opt);
    opt.threads = 4;
    const auto b = simulate_paths(m, 0.0, {0.0}, grid, 3000, 11, opt);
    ASSERT_EQ(a.x.size(), b.x.size());
    EXPECT_EQ(0, std::memcmp(a.x.data(), b.x.data(), a.x.size() * sizeof(Point<1>)));
    EXPECT_EQ(0, std::memcmp(a.dw.data(), b.dw.data(), a.dw.size() * sizeof(Point<1>)));
    EXPECT_EQ(a.m_gamma, b.m_gamma);
    const auto c = simulate_paths(m, 0.0, {0.0}, grid, 3000, 12, opt);
    EXPECT_NE(a.m_gamma, c.m_gamma);
}

TEST(Paths, CompensatedJumpsAreMeanZero) {
    model::ForwardModel<1> m;
    m.jump = [](const Point<1>&, double e) { return Point<1>{e}; };
    m.levy = LevyMeasureSpec::atoms({{1.0, 1.0}, {-0.5, 2.0}, {2.0, 0.25}});  // mean jump 1 - 1 + 0.5
    const std::size_t n = 100000;
    const auto b = simulate_paths(m, 0.0, {0.0}, TimeGrid::uniform(0.0, 1.0, 10), n, 21);
    double s = 0.0, s2 = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
        const double v = b.state(10, p)[0];
        s += v;
        s2 += v * v;
    }
    const double mean = s / n, se = std::sqrt((s2 / n - mean * mean) / (n - 1));
    EXPECT_LT(std::abs(mean), 3.0 * se);
    EXPECT_GT(b.jump_count, 0u);
}

TEST(Paths, GammaFunctionalConsistency) {
    model::ForwardModel<1> m;
    m.jump = [](const Point<1>&, double e) { return Point<1>{0.2 * e}; };
    m.levy = symmetric_atoms();
    const auto grid = TimeGrid::uniform(0.0, 1.0, 10);
    SimulationOptions<1> zero;
    zero.gamma = [](const Point<1>&, double) { return 0.0; };
    const auto a = simulate_paths(m, 0.0, {0.0}, grid, 500, 4, zero);
    for (double v : a.m_gamma) EXPECT_EQ(v, 0.0);

    // The jump-sum part is M + dt * int gamma dlambda; theta dominates it pathwise.
    SimulationOptions<1> with_gamma, with_theta;
    with_gamma.gamma = [](const Point<1>& x, double e) { return e > 0 ? 0.5 + 0.4 * std::tanh(x[0]) : 0.2; };
    with_theta.gamma = [](const Point<1>&, double) { return 1.0; };
    const auto g = simulate_paths(m, 0.0, {0.0}, grid, 500, 4, with_gamma);
    const auto th = simulate_paths(m, 0.0, {0.0}, grid, 500, 4, with_theta);
    for (std::size_t i = 0; i < grid.n_steps(); ++i) {
        for (std::size_t p = 0; p < 500; ++p) {
            const double dt = grid.dt(i);
            const auto& x = g.state(i, p);
            const double comp_g = dt * (with_gamma.gamma(x, 1.0) + with_gamma.gamma(x, -1.0));
            const double sum_g = g.gamma_functional(i, p) + comp_g;
            const double sum_th = th.gamma_functional(i, p) + dt * 2.0;
            EXPECT_LE(sum_g, sum_th + 1e-12);
            EXPECT_GE(sum_g, -1e-12);
        }
    }
}

TEST(Paths, GaussianSurrogateAddsMatchedVariance) {
    model::ForwardModel<1> m;
    m.jump = [](const Point<1>&, double e) { return Point<1>{e}; };
    m.levy = stable_like();
    SimulationOptions<1> opt;
    opt.delta_cut = 0.25;
    opt.small_jump_mode = SmallJumpMode::gaussian_surrogate;
    const std::size_t n = 40000;
    const auto b = simulate_paths(m, 0.0, {0.0}, TimeGrid::uniform(0.0, 1.0, 4), n, 8, opt);
    double s = 0.0, s2 = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
        const double v = b.state(4, p)[0];
        s += v;
        s2 += v * v;
    }
    const double mean = s / n, var = s2 / n - mean * mean;
    // total variance = int_0^1 e^2 e^{-3/2} de = 2/3
    EXPECT_NEAR(var, 2.0 / 3.0, 0.03);
}

TEST(Paths, RejectsNonFiniteState) {
    model::ForwardModel<1> m;
    m.drift = [](const Point<1>& x) { return Point<1>{x[0] > 5.0 ? kInf : 10.0}; };
    EXPECT_THROW(simulate_paths(m, 0.0, {0.0}, TimeGrid::uniform(0.0, 1.0, 10), 10, 1), NumericalError);
}

TEST(Moments, DoobBound) {
    model::ForwardModel<1> m;
    m.diffusion = [](const Point<1>&) { return Matrix<1>{1.0}; };
    const auto b = simulate_paths(m, 0.0, {0.0}, TimeGrid::uniform(0.0, 1.0, 100), 20000, 2);
    const auto mc = moment_check(b, 2.0, {0.0});
    EXPECT_LE(mc.statistic, 4.0 + 3.0 * mc.std_error);
    EXPECT_GT(mc.statistic, 1.0);
    EXPECT_DOUBLE_EQ(mc.bound, 1.0);
}

TEST(Moments, DeterministicDriftExact) {
    model::ForwardModel<1> m;
    m.drift = [](const Point<1>&) { return Point<1>{1.0}; };
    const auto b = simulate_paths(m, 0.0, {0.0}, TimeGrid::uniform(0.0, 0.5, 8), 10, 2);
    const auto mc = moment_check(b, 2.0, {0.0});
    EXPECT_NEAR(mc.statistic, 0.25, 1e-14);
    EXPECT_GE(mc.statistic, 0.0);
    EXPECT_THROW(moment_check(b, 1.5, {0.0}), DomainError);
}

TEST(Persist, RoundTrip) {
    model::ForwardModel<2> m;
    m.diffusion = [](const Point<2>&) { return Matrix<2>{0.3, 0.1, 0.0, 0.2}; };
    m.jump = [](const Point<2>&, double e) { return Point<2>{0.1 * e, -0.05 * e}; };
    m.levy = symmetric_atoms();
    SimulationOptions<2> opt;
    opt.gamma = [](const Point<2>&, double) { return 0.5; };
    const auto a = simulate_paths(m, 0.0, {1.0, -1.0}, TimeGrid::uniform(0.0, 1.0, 7), 33, 9, opt);
    const auto path = (std::filesystem::temp_directory_path() / "singfbsde_roundtrip.bin").string();
    write_bundle(path, a);
    const auto b = read_bundle<2>(path);
    EXPECT_EQ(b.n_paths, a.n_paths);
    EXPECT_EQ(b.seed, a.seed);
    EXPECT_EQ(b.grid.nodes, a.grid.nodes);
    EXPECT_EQ(b.m_gamma, a.m_gamma);
    EXPECT_EQ(0, std::memcmp(a.x.data(), b.x.data(), a.x.size() * sizeof(Point<2>)));
    EXPECT_THROW(read_bundle<1>(path), ConfigError);
    std::filesystem::remove(path);

    std::ostringstream os;
    write_bundle_summary(os, a);
    EXPECT_EQ(os.str().substr(0, 6), "node,t");
}
