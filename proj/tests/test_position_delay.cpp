#include "support.hpp"

#include <gtest/gtest.h>

using namespace adhesion;
using adhesion::testing::base_params;

TEST(PositionHistory, PastAndPresent) {
    const Grid g = make_grid(1e-3, 0.1, 0.1, 2.0);
    PositionHistory h(PastPosition::from_elongation(AgeFunction::linear(0.0, 2.0), 0.1), g);
    // z_p(s) = -eps v_I(-s/eps) = 2 s
    EXPECT_NEAR(h.lagged(0, 3), 2.0 * (-3e-3), 1e-15);
    h.push(0.5);
    EXPECT_EQ(h.lagged(1, 0), 0.5);
    EXPECT_EQ(h.lagged(1, 1), 0.0);
    EXPECT_THROW((void)h.lagged(2, 0), Error);
}

TEST(VFromZ, LinearPosition) {
    const double k = 1.7, eps = 0.1;
    const Grid g = make_grid(1e-3, eps, 0.1, 2.0);
    PositionHistory h({[=](double s) { return k * s; }, 0.0}, g);
    for (std::size_t n = 1; n <= 20; ++n) h.push(k * g.time(n));
    const auto v = v_from_z(h, 20, eps, g);
    for (std::size_t j = 0; j < g.n_age; ++j) EXPECT_NEAR(v[j], k * g.age(j), 1e-12);
    EXPECT_EQ(v[0], 0.0);
}

TEST(VFromZ, ConstantPosition) {
    const Grid g = make_grid(1e-3, 0.1, 0.1, 2.0);
    PositionHistory h({[](double) { return 3.0; }, 3.0}, g);
    for (int n = 0; n < 5; ++n) h.push(3.0);
    for (double x : v_from_z(h, 5, 0.1, g)) EXPECT_EQ(x, 0.0);
}

TEST(SolveZ, ZeroForceZeroPast) {
    const ModelParams raw = base_params(1e-3, 0.05);
    const ModelParams p = validate_params(raw);
    const auto traj = march_z_route(p, {});
    for (const auto &s : traj.samples) EXPECT_EQ(s.z, 0.0);
}

TEST(SolveZ, BalanceIdentity) {
    const Grid g = make_grid(1e-2, 0.1, 0.1, 3.0);
    std::vector<double> rho(g.n_age), lag(g.n_age);
    for (std::size_t j = 0; j < g.n_age; ++j) {
        rho[j] = 0.5 * std::exp(-g.age(j));
        lag[j] = -0.3 * g.age(j);
    }
    const double f = 0.8, eps = 0.1;
    const double z = solve_z_step(lag, rho, f, trapezoid(rho, g.da), eps, g);
    std::vector<double> v(g.n_age);
    for (std::size_t j = 0; j < g.n_age; ++j) v[j] = j == 0 ? 0.0 : (z - lag[j]) / eps;
    EXPECT_NEAR(force_balance_residual(rho, v, f, g), 0.0, 1e-13);
}

TEST(SolveZ, ZeroMass) {
    const Grid g = make_grid(1e-2, 0.1, 0.1, 3.0);
    const std::vector<double> rho(g.n_age, 0.0), lag(g.n_age, 0.0);
    try {
        solve_z_step(lag, rho, 1.0, 0.0, 0.1, g);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::ZeroMass);
    }
}

TEST(ForceBalance, CompatibleInitialData) {
    ModelParams raw = base_params(1e-3, 0.1);
    raw.v_init = AgeFunction::linear(0.0, 2.0);
    raw.force = TimeFunction::linear(1.0, 1.0);
    const ModelParams p = validate_params(raw);
    const StateFields s = initial_state(p);
    EXPECT_NEAR(force_balance_residual(s.rho, s.v, p.force.value(0.0), p.mesh()), 0.0, 1e-12);
}

TEST(ZRoute, MatchesPdeRoute) {
    ModelParams raw = base_params(1e-3, 0.1);
    raw.beta = TimeFunction::constant(0.5);
    raw.v_init = AgeFunction::linear(0.0, 2.0);
    raw.force = TimeFunction::linear(1.0, 1.0);
    const ModelParams p = validate_params(raw);
    MarchOptions mo;
    mo.snapshot_stride = 5;
    const auto pde = march_coupled(p, mo);
    const auto zr = march_z_route(p, mo);
    ASSERT_EQ(zr.outcome, pde.outcome);
    EXPECT_NEAR(zr.tear_off_time, pde.tear_off_time, 1e-9);
    const std::size_t m = std::min(pde.snapshots.size(), zr.snapshots.size());
    ASSERT_GT(m, 2u);
    for (std::size_t i = 0; i + 1 < m; ++i) {
        std::vector<double> d(pde.grid.n_age);
        for (std::size_t j = 0; j < d.size(); ++j) d[j] = zr.snapshots[i].v[j] - pde.snapshots[i].v[j];
        EXPECT_LE(weighted_sup_norm(d, pde.grid), p.mesh().dt);
    }
    for (const auto &s : zr.samples) {
        if (s.t >= zr.tear_off_time) break;
        EXPECT_NEAR(s.rho_v, s.force, 1e-10);
    }
}
