#pragma once

// Two-player scheduling game: weak and strong peers each pick LDF or EDF, and
// their utility is the playback continuity p(n) of their class.

#include <array>
#include <ostream>
#include <string>
#include <vector>

#include "schedmix/common.hpp"
#include "schedmix/continuum.hpp"
#include "schedmix/mean_field.hpp"

namespace schedmix {

enum class GameBackend { MeanField, Continuum };

inline std::string_view to_string(GameBackend b) { return b == GameBackend::MeanField ? "mean_field" : "continuum"; }

inline GameBackend parse_backend(std::string_view s)
{
    if (s == "mean_field") return GameBackend::MeanField;
    if (s == "continuum") return GameBackend::Continuum;
    throw InvalidParameter("unknown backend '" + std::string(s) + "'");
}

struct PayoffCell {
    Strategy weak = Strategy::LDF;
    Strategy strong = Strategy::LDF;
    bool valid = false;
    std::string error; // solver failure when !valid
    double u_weak = 0.0;
    double u_strong = 0.0;
    double global = 0.0;
};

struct PayoffTable {
    TwoDegreeSystem sys;
    int buffer_len = 0;
    GameBackend backend = GameBackend::MeanField;
    // cells[w][s], index 0 = LDF, 1 = EDF
    std::array<std::array<PayoffCell, 2>, 2> cells{};

    static int idx(Strategy s) { return s == Strategy::LDF ? 0 : 1; }
    const PayoffCell& at(Strategy weak, Strategy strong) const { return cells[idx(weak)][idx(strong)]; }
    PayoffCell& at(Strategy weak, Strategy strong) { return cells[idx(weak)][idx(strong)]; }

    bool complete() const
    {
        for (const auto& row : cells)
            for (const auto& c : row)
                if (!c.valid) return false;
        return true;
    }
};

inline constexpr std::array<Strategy, 2> kStrategies{Strategy::LDF, Strategy::EDF};

/// Solves all four strategy vectors. A failing solver marks its cell invalid
/// instead of aborting the table.
inline PayoffTable build_payoff_table(const TwoDegreeSystem& sys, int n, GameBackend backend = GameBackend::MeanField)
{
    sys.validate();
    require(n >= 2, "payoff table: n must be >= 2");
    PayoffTable t;
    t.sys = sys;
    t.buffer_len = n;
    t.backend = backend;
    for (Strategy w : kStrategies)
        for (Strategy s : kStrategies) {
            PayoffCell& c = t.at(w, s);
            c.weak = w;
            c.strong = s;
            try {
                if (backend == GameBackend::MeanField) {
                    const auto cfg = sys.mean_field_config(n, w, s);
                    const auto tab = solve_fixed_point(cfg);
                    c.u_weak = tab.p[0].back();
                    c.u_strong = tab.p[1].back();
                    c.global = tab.p_global.back();
                } else {
                    const auto tr = solve_profile(sys, w, s, static_cast<double>(n));
                    c.u_weak = tr.y1_end();
                    c.u_strong = tr.y2_end();
                    c.global = tr.y_end();
                }
                c.valid = true;
            } catch (const Error& e) {
                c.valid = false;
                c.error = e.what();
            }
        }
    return t;
}

/// Strategy vectors where neither player gains more than `tol` by deviating alone.
inline std::vector<std::array<Strategy, 2>> nash_equilibria(const PayoffTable& t, double tol = 1e-9)
{
    if (!t.complete()) throw DomainError("nash_equilibria: payoff table has invalid cells");
    std::vector<std::array<Strategy, 2>> out;
    auto other = [](Strategy s) { return s == Strategy::LDF ? Strategy::EDF : Strategy::LDF; };
    for (Strategy w : kStrategies)
        for (Strategy s : kStrategies) {
            const auto& c = t.at(w, s);
            const bool weak_ok = c.u_weak + tol >= t.at(other(w), s).u_weak;
            const bool strong_ok = c.u_strong + tol >= t.at(w, other(s)).u_strong;
            if (weak_ok && strong_ok) out.push_back({w, s});
        }
    return out;
}

/// Strategy vector with the largest global utility among valid cells.
inline std::array<Strategy, 2> global_optimum(const PayoffTable& t)
{
    const PayoffCell* best = nullptr;
    for (const auto& row : t.cells)
        for (const auto& c : row)
            if (c.valid && (!best || c.global > best->global)) best = &c;
    if (!best) throw DomainError("global_optimum: no valid cells");
    return {best->weak, best->strong};
}

inline void write_payoff_csv(std::ostream& os, const PayoffTable& t)
{
    os << "weak_strategy,strong_strategy,u_weak,u_strong,global,valid\n";
    os.precision(12);
    for (const auto& row : t.cells)
        for (const auto& c : row) {
            os << to_string(c.weak) << ',' << to_string(c.strong) << ',';
            if (c.valid)
                os << c.u_weak << ',' << c.u_strong << ',' << c.global << ",1\n";
            else
                os << ",,,0\n";
        }
}

} // namespace schedmix
