#include <gtest/gtest.h>

#include <cmath>

#include "schedmix/continuum.hpp"

using namespace schedmix;

namespace {

TwoDegreeSystem game_system(double vs = 0.25) { return TwoDegreeSystem::make(25, 55, 0.85, 1000, vs); }

// Independent RK4 for the pure LDF pair, written out from the ODE.
std::pair<double, double> ldf_oracle(const TwoDegreeSystem& s, double n, double h)
{
    double y1 = s.p1_boundary, y2 = s.p1_boundary;
    auto f = [&](double a, double b) {
        const double th = s.q1 * a + s.q2 * b;
        return std::pair{s.k1 * s.contact_scale * th * (1 - a) * (1 - a), s.k2 * s.contact_scale * th * (1 - b) * (1 - b)};
    };
    for (double x = 1.0; x < n - 1e-12; x += h) {
        auto [a1, a2] = f(y1, y2);
        auto [b1, b2] = f(y1 + h / 2 * a1, y2 + h / 2 * a2);
        auto [c1, c2] = f(y1 + h / 2 * b1, y2 + h / 2 * b2);
        auto [d1, d2] = f(y1 + h * c1, y2 + h * c2);
        y1 += h / 6 * (a1 + 2 * b1 + 2 * c1 + d1);
        y2 += h / 6 * (a2 + 2 * b2 + 2 * c2 + d2);
    }
    return {y1, y2};
}

} // namespace

TEST(TwoDegreeSystem, DerivedWeights)
{
    const auto s = game_system();
    EXPECT_NEAR(s.q1, 25 * 0.85 / (25 * 0.85 + 55 * 0.15), 1e-15);
    EXPECT_NEAR(s.q1 + s.q2, 1.0, 1e-12);
    EXPECT_NEAR(s.r(), 25.0 / 55.0, 1e-15);
    EXPECT_THROW(TwoDegreeSystem::make(55, 25, 0.85, 1000, 0.25), InvalidParameter);
    EXPECT_THROW(TwoDegreeSystem::make(25, 55, 1.0, 1000, 0.25), InvalidParameter);
}

TEST(PureLdf, MatchesIndependentIntegrator)
{
    const auto s = game_system();
    const auto t = integrate_pure_ldf(s, 40.0);
    const auto [y1, y2] = ldf_oracle(s, 40.0, 0.01);
    EXPECT_NEAR(t.y1_end(), y1, 1e-9);
    EXPECT_NEAR(t.y2_end(), y2, 1e-9);
}

TEST(PureLdf, EqualDegreesGiveEqualCurves)
{
    const auto s = TwoDegreeSystem::make(30, 30, 0.6, 1000, 0.1);
    const auto t = integrate_pure_ldf(s, 20.0);
    for (std::size_t i = 0; i < t.size(); ++i) EXPECT_NEAR(t.y1[i], t.y2[i], 1e-12);
}

TEST(PureLdf, StrongAheadAndMonotone)
{
    const auto t = integrate_pure_ldf(game_system(), 40.0);
    for (std::size_t i = 1; i < t.size(); ++i) {
        EXPECT_GE(t.y2[i] + 1e-15, t.y1[i]);
        EXPECT_GE(t.y1[i], t.y1[i - 1]);
        EXPECT_GE(t.y2[i], t.y2[i - 1]);
        EXPECT_GE(t.y[i], t.y[i - 1]);
        EXPECT_LE(t.y2[i], 1.0);
    }
}

TEST(ExactRelation, Substitutions)
{
    EXPECT_DOUBLE_EQ(exact_ldf_relation(1.0, 0.3), 1.0);
    EXPECT_DOUBLE_EQ(exact_ldf_relation(0.37, 1.0), 0.37);
    EXPECT_NEAR(exact_ldf_relation(0.5, 0.5), 2.0 / 3.0, 1e-15);
}

TEST(ExactRelation, HoldsAlongTrajectoriesInTheLargeSwarmLimit)
{
    const auto s = TwoDegreeSystem::make_with_boundary(25, 55, 0.85, 1e-12, 0.25);
    const auto t = integrate_pure_ldf(s, 40.0);
    for (std::size_t i = 0; i < t.size(); ++i) EXPECT_NEAR(t.y2[i], exact_ldf_relation(t.y1[i], s.r()), 1e-6);
}

TEST(ExactRelation, FiniteSwarmForm)
{
    const auto s = game_system();
    const auto t = integrate_pure_ldf(s, 40.0);
    for (std::size_t i = 0; i < t.size(); ++i)
        EXPECT_NEAR(t.y2[i], exact_ldf_relation_finite(t.y1[i], 25, 55, s.p1_boundary), 1e-6);
}

TEST(BufferRequirement, AgreesWithOdeCrossing)
{
    const auto s = game_system();
    for (double eps : {0.05, 0.1, 0.2}) {
        const double formula = ldf_buffer_requirement(s, eps, s.p1_boundary).n1;
        const double ode = ldf_crossing_position(s, eps, 0.001);
        EXPECT_LE(std::abs(formula - ode) / ode, 0.02) << "eps1=" << eps << " formula " << formula << " ode " << ode;
    }
}

TEST(BufferRequirement, Sensitivities)
{
    const auto s = game_system();
    const auto r = ldf_buffer_requirement(s, 0.1, s.p1_boundary);
    EXPECT_LT(r.dn1_deps1, 0.0);
    EXPECT_LT(r.dn1_dp1, 0.0);
}

TEST(BufferRequirement, DomainErrors)
{
    const auto s = game_system();
    EXPECT_THROW(ldf_buffer_requirement(s, 0.0, 1e-3), DomainError);
    EXPECT_THROW(ldf_buffer_requirement(s, 0.999, 1e-2), DomainError);
}

TEST(Mixed, SingularAtHighContactScale)
{
    EXPECT_THROW(integrate_mixed(game_system(0.25), 40.0), ContinuumSingularity);
}

TEST(Mixed, BeatsPureLdfWithCrossoverAtLowContactScale)
{
    const auto s = game_system(0.03);
    const auto mixed = integrate_mixed(s, 40.0);
    const auto ldf = integrate_pure_ldf(s, 40.0);
    EXPECT_GT(mixed.y_end(), ldf.y_end());
    const auto x = weak_over_strong_crossover(mixed);
    ASSERT_TRUE(x.has_value());
    EXPECT_LE(*x, 40.0);
    EXPECT_LE(std::abs(1.0 - mixed.y1_end() - mixed.eps1), 1e-9);
}

TEST(Mixed, ApproximationUnderestimatesWeakPeers)
{
    const auto s = game_system(0.03);
    const auto t = integrate_mixed(s, 40.0);
    for (std::size_t i = 0; i < t.size(); i += 10) {
        if (t.y2[i] >= 1.0) break;
        EXPECT_LE(mixed_approx_y1(t.y2[i], s, t.eps1, s.p1_boundary), t.y1[i] + 1e-9) << "x=" << t.x[i];
    }
}

TEST(Mixed, SimplifiedRelationLimits)
{
    EXPECT_NEAR(mixed_simplified_y1(1.0 - 1e-9, 0.45, 1e-3), 1.0, 1e-12);
    EXPECT_NEAR(mixed_simplified_y1(1e-3, 0.45, 1e-3), 1e-3, 1e-9);
    const auto z = mixed_crossover_prediction(25.0 / 55.0, 1e-3);
    ASSERT_TRUE(z.has_value());
    EXPECT_GT(*z, 0.5);
    EXPECT_LT(*z, 1.0);
}

TEST(Mixed, ApproximateRelationPassesThroughBoundary)
{
    const auto s = game_system(0.03);
    const double p1 = s.p1_boundary, eps = 0.05;
    EXPECT_NEAR(mixed_approx_relation(p1, s, eps, p1), p1, 1e-12);
    EXPECT_NEAR(mixed_approx_y1(p1, s, eps, p1), p1, 1e-12);
}

TEST(Stability, PureLdfDoublyDegenerate)
{
    const auto rep = stability_jacobian(game_system(), OdeKind::PureLdf, 1.0, 1.0);
    for (const auto& e : rep.eigenvalues) EXPECT_NEAR(std::abs(e), 0.0, 1e-12);
}

TEST(Stability, MixedSinglyDegenerate)
{
    const auto s = game_system();
    const double eps1 = 0.05;
    const auto rep = stability_jacobian(s, OdeKind::Mixed, 1.0, 1.0, eps1);
    const double y0 = s.p1_boundary - eps1;
    EXPECT_NEAR(rep.y0, y0, 1e-15);
    std::array<double, 2> re{rep.eigenvalues[0].real(), rep.eigenvalues[1].real()};
    std::sort(re.begin(), re.end());
    EXPECT_NEAR(re[0], -25 * 0.25 * (1.0 - y0), 1e-9);
    EXPECT_NEAR(re[1], 0.0, 1e-9);
}

TEST(Stability, JacobianMatchesFiniteDifferences)
{
    const auto s = game_system(0.03);
    for (auto kind : {OdeKind::PureLdf, OdeKind::Mixed}) {
        const auto rep = stability_jacobian(s, kind, 0.5, 0.6, 0.05);
        const double h = 1e-6;
        for (int j = 0; j < 2; ++j) {
            const double dy1 = j == 0 ? h : 0.0, dy2 = j == 1 ? h : 0.0;
            const auto fp = ode_rhs(s, kind, 0.5 + dy1, 0.6 + dy2, 0.05);
            const auto fm = ode_rhs(s, kind, 0.5 - dy1, 0.6 - dy2, 0.05);
            for (int i = 0; i < 2; ++i) EXPECT_NEAR(rep.jacobian[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)],
                                                    (fp[static_cast<std::size_t>(i)] - fm[static_cast<std::size_t>(i)]) / (2 * h), 1e-6);
        }
    }
}
