#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

#include "schedmix/game.hpp"

using namespace schedmix;

namespace {

bool contains(const std::vector<std::array<Strategy, 2>>& v, Strategy w, Strategy s)
{
    return std::find(v.begin(), v.end(), std::array<Strategy, 2>{w, s}) != v.end();
}

PayoffTable filled(double uw[2][2], double us[2][2])
{
    PayoffTable t;
    for (int w = 0; w < 2; ++w)
        for (int s = 0; s < 2; ++s) {
            auto& c = t.cells[static_cast<std::size_t>(w)][static_cast<std::size_t>(s)];
            c.weak = kStrategies[static_cast<std::size_t>(w)];
            c.strong = kStrategies[static_cast<std::size_t>(s)];
            c.valid = true;
            c.u_weak = uw[w][s];
            c.u_strong = us[w][s];
            c.global = 0.5 * (uw[w][s] + us[w][s]);
        }
    return t;
}

} // namespace

TEST(Nash, UniversalIndifference)
{
    double u[2][2] = {{0.7, 0.7}, {0.7, 0.7}};
    EXPECT_EQ(nash_equilibria(filled(u, u)).size(), 4U);
}

TEST(Nash, HandBuiltCoordinationGame)
{
    // weak/strong both prefer matching strategies -> the two diagonal cells
    double uw[2][2] = {{1.0, 0.0}, {0.0, 0.8}};
    double us[2][2] = {{1.0, 0.0}, {0.0, 0.8}};
    const auto eq = nash_equilibria(filled(uw, us));
    EXPECT_EQ(eq.size(), 2U);
    EXPECT_TRUE(contains(eq, Strategy::LDF, Strategy::LDF));
    EXPECT_TRUE(contains(eq, Strategy::EDF, Strategy::EDF));
    const auto opt = global_optimum(filled(uw, us));
    EXPECT_EQ(opt[0], Strategy::LDF);
    EXPECT_EQ(opt[1], Strategy::LDF);
}

TEST(Nash, IncompleteTableRejected)
{
    PayoffTable t;
    EXPECT_THROW(nash_equilibria(t), DomainError);
    EXPECT_THROW(global_optimum(t), DomainError);
}

TEST(PayoffTable, SymmetricPlayersHaveEqualUtilities)
{
    const auto sys = TwoDegreeSystem::make(30, 30, 0.5, 1000, 0.02);
    for (auto backend : {GameBackend::MeanField, GameBackend::Continuum}) {
        const auto t = build_payoff_table(sys, 20, backend);
        ASSERT_TRUE(t.complete());
        for (const auto& row : t.cells)
            for (const auto& c : row)
                if (c.weak == c.strong) {
                    EXPECT_NEAR(c.u_weak, c.u_strong, 1e-9);
                }
        // swapping the roles swaps the utilities
        EXPECT_NEAR(t.at(Strategy::LDF, Strategy::EDF).u_weak, t.at(Strategy::EDF, Strategy::LDF).u_strong, 1e-7);
    }
}

TEST(PayoffTable, HighContactScaleMarksEdfCellsInvalid)
{
    const auto sys = TwoDegreeSystem::make(25, 55, 0.85, 1000, 0.25);
    const auto t = build_payoff_table(sys, 40, GameBackend::MeanField);
    EXPECT_TRUE(t.at(Strategy::LDF, Strategy::LDF).valid);
    EXPECT_FALSE(t.at(Strategy::EDF, Strategy::LDF).valid);
    EXPECT_FALSE(t.at(Strategy::EDF, Strategy::LDF).error.empty());
    EXPECT_FALSE(t.complete());
}

TEST(PayoffTable, LowContactScaleEquilibria)
{
    const auto sys = TwoDegreeSystem::make(25, 55, 0.85, 1000, 0.02);
    const auto t = build_payoff_table(sys, 40, GameBackend::Continuum);
    ASSERT_TRUE(t.complete());
    const auto eq = nash_equilibria(t);
    EXPECT_TRUE(contains(eq, Strategy::EDF, Strategy::LDF));
    EXPECT_TRUE(contains(eq, Strategy::LDF, Strategy::EDF));
    const auto opt = global_optimum(t);
    EXPECT_EQ(opt[0], Strategy::EDF);
    EXPECT_EQ(opt[1], Strategy::LDF);
}

TEST(PayoffTable, GlobalIsShareWeighted)
{
    const auto sys = TwoDegreeSystem::make(25, 55, 0.85, 1000, 0.02);
    const auto t = build_payoff_table(sys, 40, GameBackend::MeanField);
    for (const auto& row : t.cells)
        for (const auto& c : row)
            if (c.valid) {
                EXPECT_NEAR(c.global, 0.85 * c.u_weak + 0.15 * c.u_strong, 1e-10);
            }
}

TEST(PayoffTable, CsvHasFourRows)
{
    const auto t = build_payoff_table(TwoDegreeSystem::make(25, 55, 0.85, 1000, 0.25), 40);
    std::ostringstream os;
    write_payoff_csv(os, t);
    const auto s = os.str();
    EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 5);
    EXPECT_NE(s.find("EDF,LDF,,,,0"), std::string::npos);
}

TEST(Backend, Parse)
{
    EXPECT_EQ(parse_backend("continuum"), GameBackend::Continuum);
    EXPECT_THROW(parse_backend("monte_carlo"), InvalidParameter);
}
