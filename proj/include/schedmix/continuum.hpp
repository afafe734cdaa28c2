#pragma once

// Continuous-index ODE approximation of the two-degree system.
//
// y1, y2 are the buffer probabilities of weak (degree k1) and strong (k2 > k1)
// peers as functions of the buffer position x in [1, n]; theta = q1 y1 + q2 y2.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "schedmix/common.hpp"
#include "schedmix/mean_field.hpp"

namespace schedmix {

struct TwoDegreeSystem {
    int k1 = 25;
    int k2 = 55;
    double pi1 = 0.85;
    double pi2 = 0.15;
    double q1 = 0.0;
    double q2 = 0.0;
    double contact_scale = 0.25;
    double p1_boundary = 1e-3;

    static TwoDegreeSystem make(int k1, int k2, double pi1, double peer_count, double contact_scale)
    {
        return make_with_boundary(k1, k2, pi1, 1.0 / peer_count, contact_scale);
    }

    static TwoDegreeSystem make_with_boundary(int k1, int k2, double pi1, double p1_boundary, double contact_scale)
    {
        TwoDegreeSystem s;
        s.k1 = k1;
        s.k2 = k2;
        s.pi1 = pi1;
        s.pi2 = 1.0 - pi1;
        const double mean = k1 * pi1 + k2 * s.pi2;
        s.q1 = k1 * pi1 / mean;
        s.q2 = 1.0 - s.q1;
        s.contact_scale = contact_scale;
        s.p1_boundary = p1_boundary;
        s.validate();
        return s;
    }

    double r() const { return static_cast<double>(k1) / k2; }
    double peer_count() const { return 1.0 / p1_boundary; }

    /// Equal degrees are allowed so that symmetric games can be posed.
    void validate() const
    {
        require(k1 >= 1 && k1 <= k2, "two-degree system: need 1 <= k1 <= k2");
        require(pi1 > 0.0 && pi1 < 1.0 && std::abs(pi1 + pi2 - 1.0) <= 1e-12, "two-degree system: bad shares");
        require(std::abs(q1 + q2 - 1.0) <= 1e-12, "two-degree system: bad edge weights");
        require(contact_scale > 0.0, "two-degree system: contact scale must be positive");
        require(p1_boundary > 0.0 && p1_boundary < 1.0, "two-degree system: boundary must lie in (0,1)");
    }

    /// Equivalent discrete configuration (two classes, or one when k1 == k2).
    MeanFieldConfig mean_field_config(int buffer_len, Strategy weak, Strategy strong) const
    {
        MeanFieldConfig cfg;
        cfg.buffer_len = buffer_len;
        cfg.peer_count = peer_count();
        cfg.contact_scale = contact_scale;
        cfg.classes = {{k1, pi1, weak}, {k2, pi2, strong}};
        return cfg;
    }
};

struct Trajectory {
    std::vector<double> x, y1, y2, y;
    double eps1 = 0.0; // self-consistent 1 - y1(n) for EDF weak peers (0 when unused)
    double eps2 = 0.0;
    int shooting_iterations = 0;

    std::size_t size() const { return x.size(); }
    double y1_end() const { return y1.back(); }
    double y2_end() const { return y2.back(); }
    double y_end() const { return y.back(); }
};

inline void write_trajectory_csv(std::ostream& os, const Trajectory& t)
{
    os << "x,y1,y2,y\n";
    os.precision(12);
    for (std::size_t i = 0; i < t.size(); ++i) os << t.x[i] << ',' << t.y1[i] << ',' << t.y2[i] << ',' << t.y[i] << '\n';
}

/// The mixed right-hand side hits 1 - k vs theta (1 - y) <= 1e-9.
class ContinuumSingularity : public DomainError {
public:
    ContinuumSingularity(double x, double denominator)
        : DomainError("continuum: EDF denominator " + std::to_string(denominator) + " vanishes at x=" + std::to_string(x)),
          x(x)
    {
    }
    double x;
};

inline constexpr double kContinuumSingularTol = 1e-9;

namespace detail {

using Vec2 = std::array<double, 2>;

// dy_c/dx for class c: LDF  k vs theta (1-y)^2
//                      EDF  k vs theta (1-y)(y - p1 + eps) / (1 - k vs theta (1-y))
struct ProfileRhs {
    const TwoDegreeSystem& sys;
    std::array<Strategy, 2> strat;
    Vec2 eps;

    Vec2 operator()(double x, const Vec2& y) const
    {
        const double theta = sys.q1 * y[0] + sys.q2 * y[1];
        const std::array<int, 2> k{sys.k1, sys.k2};
        Vec2 out{};
        for (int c = 0; c < 2; ++c) {
            const double a = k[c] * sys.contact_scale * theta * (1.0 - y[c]);
            if (strat[c] == Strategy::LDF) {
                out[c] = a * (1.0 - y[c]);
            } else {
                const double den = 1.0 - a;
                if (den <= kContinuumSingularTol) throw ContinuumSingularity(x, den);
                out[c] = a * (y[c] - sys.p1_boundary + eps[c]) / den;
            }
        }
        return out;
    }
};

template <class Rhs>
Trajectory rk4(const Rhs& f, const TwoDegreeSystem& sys, double n, double step)
{
    require(step > 0.0, "continuum: step must be positive");
    require(n >= 1.0, "continuum: n must be >= 1");
    const auto steps = std::max<long>(1, std::lround((n - 1.0) / step));
    const double h = (n - 1.0) / static_cast<double>(steps);
    Trajectory t;
    t.x.reserve(static_cast<std::size_t>(steps) + 1);
    Vec2 y{sys.p1_boundary, sys.p1_boundary};
    auto record = [&](double x) {
        t.x.push_back(x);
        t.y1.push_back(y[0]);
        t.y2.push_back(y[1]);
        t.y.push_back(sys.pi1 * y[0] + sys.pi2 * y[1]);
    };
    record(1.0);
    for (long s = 0; s < steps; ++s) {
        const double x = 1.0 + static_cast<double>(s) * h;
        const Vec2 a = f(x, y);
        const Vec2 b = f(x + h / 2, {y[0] + h / 2 * a[0], y[1] + h / 2 * a[1]});
        const Vec2 c = f(x + h / 2, {y[0] + h / 2 * b[0], y[1] + h / 2 * b[1]});
        const Vec2 d = f(x + h, {y[0] + h * c[0], y[1] + h * c[1]});
        for (int j = 0; j < 2; ++j) y[j] += h / 6.0 * (a[j] + 2 * b[j] + 2 * c[j] + d[j]);
        record(1.0 + static_cast<double>(s + 1) * h);
    }
    return t;
}

} // namespace detail

inline constexpr double kDefaultContinuumStep = 0.01;

/// Pure LDF: dy_c/dx = k_c vs theta (1 - y_c)^2, y_c(1) = p1_boundary.
inline Trajectory integrate_pure_ldf(const TwoDegreeSystem& sys, double n, double step = kDefaultContinuumStep)
{
    sys.validate();
    detail::ProfileRhs f{sys, {Strategy::LDF, Strategy::LDF}, {0.0, 0.0}};
    return detail::rk4(f, sys, n, step);
}

/// Integrates an arbitrary per-class strategy profile with fixed eps values.
inline Trajectory integrate_profile(const TwoDegreeSystem& sys, Strategy weak, Strategy strong, double n, double eps1,
                                    double eps2, double step = kDefaultContinuumStep)
{
    sys.validate();
    detail::ProfileRhs f{sys, {weak, strong}, {eps1, eps2}};
    auto t = detail::rk4(f, sys, n, step);
    t.eps1 = eps1;
    t.eps2 = eps2;
    return t;
}

struct ShootingOptions {
    double tol = 1e-9;
    double damping = 0.5;
    double initial_eps = 0.5;
    int max_iter = 20000;
    // halve the damping whenever the mismatch grows
    bool adaptive_damping = true;
    double min_damping = 1e-6;
};

/// Solves a profile with self-consistent eps_c = 1 - y_c(n) for every EDF class
/// by damped shooting. Pure LDF needs no shooting.
inline Trajectory solve_profile(const TwoDegreeSystem& sys, Strategy weak, Strategy strong, double n,
                                double step = kDefaultContinuumStep, const ShootingOptions& opt = {})
{
    sys.validate();
    const std::array<Strategy, 2> strat{weak, strong};
    if (weak == Strategy::LDF && strong == Strategy::LDF) return integrate_pure_ldf(sys, n, step);
    std::array<double, 2> eps{opt.initial_eps, opt.initial_eps};
    double damping = opt.damping;
    double prev = INFINITY;
    for (int it = 1; it <= opt.max_iter; ++it) {
        auto t = integrate_profile(sys, weak, strong, n, eps[0], eps[1], step);
        const std::array<double, 2> target{1.0 - t.y1_end(), 1.0 - t.y2_end()};
        double mismatch = 0.0;
        for (int c = 0; c < 2; ++c)
            if (strat[c] == Strategy::EDF) mismatch = std::max(mismatch, std::abs(target[c] - eps[c]));
        if (mismatch < opt.tol) {
            t.shooting_iterations = it;
            return t;
        }
        if (opt.adaptive_damping && mismatch > prev) damping = std::max(damping * 0.5, opt.min_damping);
        prev = mismatch;
        for (int c = 0; c < 2; ++c)
            if (strat[c] == Strategy::EDF) eps[c] = (1.0 - damping) * eps[c] + damping * target[c];
    }
    throw ConvergenceError("continuum: shooting for eps did not converge");
}

/// Mixed strategy: weak peers EDF, strong peers LDF.
inline Trajectory integrate_mixed(const TwoDegreeSystem& sys, double n, double step = kDefaultContinuumStep,
                                  double shoot_tol = 1e-9)
{
    ShootingOptions opt;
    opt.tol = shoot_tol;
    return solve_profile(sys, Strategy::EDF, Strategy::LDF, n, step, opt);
}

/// First x where y1 reaches `level` (linear interpolation on the grid), if any.
inline std::optional<double> first_crossing(const Trajectory& t, double level)
{
    for (std::size_t i = 1; i < t.size(); ++i)
        if (t.y1[i] >= level && t.y1[i - 1] < level) {
            const double f = (level - t.y1[i - 1]) / (t.y1[i] - t.y1[i - 1]);
            return t.x[i - 1] + f * (t.x[i] - t.x[i - 1]);
        }
    if (!t.y1.empty() && t.y1.front() >= level) return t.x.front();
    return std::nullopt;
}

/// First grid position where weak peers lead strong peers, if any.
inline std::optional<double> weak_over_strong_crossover(const Trajectory& t)
{
    for (std::size_t i = 1; i < t.size(); ++i)
        if (t.y1[i] > t.y2[i]) return t.x[i];
    return std::nullopt;
}

/// Pure-LDF first integral in the large-population limit:
/// y2 = y1 / (1 - (1 - r)(1 - y1)).
inline double exact_ldf_relation(double y1, double r)
{
    require(y1 >= 0.0 && y1 <= 1.0, "exact_ldf_relation: y1 outside [0,1]");
    require(r > 0.0 && r <= 1.0, "exact_ldf_relation: r outside (0,1]");
    return y1 / (1.0 - (1.0 - r) * (1.0 - y1));
}

/// Same first integral with the boundary y1 = y2 = p1 at x = 1 kept exactly:
/// 1/(k1 (1-y1)) - 1/(k2 (1-y2)) = C with C = (1/k1 - 1/k2) / (1 - p1),
/// i.e. C = M/(M-1) (1/k1 - 1/k2) for p1 = 1/M.
inline double exact_ldf_relation_finite(double y1, int k1, int k2, double p1_boundary)
{
    require(y1 >= 0.0 && y1 <= 1.0, "exact_ldf_relation_finite: y1 outside [0,1]");
    require(k1 >= 1 && k1 <= k2, "exact_ldf_relation_finite: need 1 <= k1 <= k2");
    require(p1_boundary >= 0.0 && p1_boundary < 1.0, "exact_ldf_relation_finite: bad boundary");
    const double r = static_cast<double>(k1) / k2;
    const double ck1 = k1 * (1.0 / k1 - 1.0 / k2) / (1.0 - p1_boundary);
    return (1.0 - (ck1 + r) * (1.0 - y1)) / (1.0 - ck1 * (1.0 - y1));
}

/// Partial-fraction pieces of the LDF buffer-requirement integral
///   n1 = 1 + int_{p1}^{1-eps1} g(y) dy,
///   g(y) = (r + (1-r) y) / (K y (1-y)^2 (1 + E y)),  K = k1 vs s, s = q1 r + q2,
/// g = a/y + b/(1-y) + c/(1-y)^2 + d/(1+E y).
struct BufferRequirementTerms {
    double s, K, E, a, b, c, d;
};

inline BufferRequirementTerms buffer_requirement_terms(const TwoDegreeSystem& sys)
{
    sys.validate();
    require(sys.k1 < sys.k2, "buffer requirement: needs k1 < k2");
    BufferRequirementTerms t{};
    const double r = sys.r();
    t.s = sys.q1 * r + sys.q2;
    t.K = sys.k1 * sys.contact_scale * t.s;
    t.E = sys.q1 * (1.0 - r) / t.s;
    t.a = r / t.K;
    t.c = 1.0 / (sys.k1 * sys.contact_scale);
    const double ym = -1.0 / t.E;
    t.d = (r + (1.0 - r) * ym) / (t.K * ym * (1.0 - ym) * (1.0 - ym));
    t.b = ((1.0 + 2.0 * t.E) - (1.0 - r) * (1.0 + t.E)) / (t.K * (1.0 + t.E) * (1.0 + t.E));
    return t;
}

struct BufferRequirement {
    double n1 = 0.0;
    double dn1_deps1 = 0.0;
    double dn1_dp1 = 0.0;
};

namespace detail {

inline double buffer_requirement_value(const TwoDegreeSystem& sys, double eps1, double p1)
{
    if (!(eps1 > 0.0 && eps1 < 1.0 && p1 > 0.0 && p1 < 1.0 && eps1 < 1.0 - p1))
        throw DomainError("buffer requirement: need 0 < eps1 < 1 - p1 < 1");
    const auto t = buffer_requirement_terms(sys);
    return 1.0 + t.a * std::log((1.0 - eps1) / p1) + t.b * std::log((1.0 - p1) / eps1) +
           t.c * (1.0 / eps1 - 1.0 / (1.0 - p1)) + t.d / t.E * std::log((1.0 + t.E * (1.0 - eps1)) / (1.0 + t.E * p1));
}

inline double buffer_requirement_printed_value(const TwoDegreeSystem& sys, double eps1, double p1)
{
    if (!(eps1 > 0.0 && eps1 < 1.0 && p1 > 0.0 && p1 < 1.0 && eps1 < 1.0 - p1))
        throw DomainError("buffer requirement: need 0 < eps1 < 1 - p1 < 1");
    const double r = sys.r(), q1 = sys.q1, q2 = sys.q2, vs = sys.contact_scale;
    const double k1 = sys.k1;
    const double s = q1 * r + q2;
    const double A = r / s;
    const double B = r / (k1 * vs * s) * (1.0 / (1.0 - r) + q1 * q1 * q2 * r * (1.0 - r) / (1.0 + q1 * r)) +
                     1.0 / (k1 * vs * r) * (1.0 - (1.0 - r * r) / (1.0 + q1 * r));
    const double C = 1.0 / (k1 * vs);
    const double D = q1 * q1 * q2 * std::pow(1.0 - r, 3) / (k1 * vs * s);
    const double E = q1 * (1.0 - r) / s;
    return A / k1 * std::log((1.0 - eps1) / p1) + B * std::log((1.0 - p1) / eps1) + C / eps1 +
           D / (q1 * (1.0 - r)) * std::log((1.0 + E * (1.0 - eps1)) / (1.0 + E * (1.0 - p1))) -
           (C - 1.0 + p1) / (1.0 - p1);
}

template <class F>
BufferRequirement with_sensitivities(F value, double eps1, double p1)
{
    BufferRequirement out;
    out.n1 = value(eps1, p1);
    const double he = 1e-6 * std::min(eps1, 1.0 - p1 - eps1);
    const double hp = 1e-6 * std::min(p1, 1.0 - p1 - eps1);
    out.dn1_deps1 = (value(eps1 + he, p1) - value(eps1 - he, p1)) / (2 * he);
    out.dn1_dp1 = (value(eps1, p1 + hp) - value(eps1, p1 - hp)) / (2 * hp);
    return out;
}

} // namespace detail

/// Buffer length at which LDF weak peers reach continuity 1 - eps1, from the
/// exact first integral integrated in closed form; sensitivities by central
/// differences.
inline BufferRequirement ldf_buffer_requirement(const TwoDegreeSystem& sys, double eps1, double p1)
{
    return detail::with_sensitivities(
        [&](double e, double p) { return detail::buffer_requirement_value(sys, e, p); }, eps1, p1);
}

/// The closed form with the A..E constants exactly as originally published.
/// Kept for comparison: its coefficients do not match the partial fractions of
/// the integrand and it drifts from the ODE crossing as eps1 grows.
inline BufferRequirement ldf_buffer_requirement_published(const TwoDegreeSystem& sys, double eps1, double p1)
{
    sys.validate();
    require(sys.k1 < sys.k2, "buffer requirement: needs k1 < k2");
    return detail::with_sensitivities(
        [&](double e, double p) { return detail::buffer_requirement_printed_value(sys, e, p); }, eps1, p1);
}

/// Integrates pure LDF until y1 reaches 1 - eps1 and returns the crossing position.
inline double ldf_crossing_position(const TwoDegreeSystem& sys, double eps1, double step = kDefaultContinuumStep,
                                    double max_x = 1e5)
{
    detail::ProfileRhs f{sys, {Strategy::LDF, Strategy::LDF}, {0.0, 0.0}};
    detail::Vec2 y{sys.p1_boundary, sys.p1_boundary};
    const double level = 1.0 - eps1;
    double x = 1.0;
    while (x < max_x) {
        const detail::Vec2 a = f(x, y);
        const detail::Vec2 b = f(x, {y[0] + step / 2 * a[0], y[1] + step / 2 * a[1]});
        const detail::Vec2 c = f(x, {y[0] + step / 2 * b[0], y[1] + step / 2 * b[1]});
        const detail::Vec2 d = f(x, {y[0] + step * c[0], y[1] + step * c[1]});
        detail::Vec2 nxt{};
        for (int j = 0; j < 2; ++j) nxt[j] = y[j] + step / 6.0 * (a[j] + 2 * b[j] + 2 * c[j] + d[j]);
        if (nxt[0] >= level) return x + step * (level - y[0]) / (nxt[0] - y[0]);
        y = nxt;
        x += step;
    }
    throw ConvergenceError("ldf_crossing_position: level not reached");
}

/// Constant of the approximate mixed first integral
///   1/(1 - y2) = ln((y1 - p1 + eps1)/(1 - y1)) / (r (1 - p1 + eps1)) - C,
/// fixed by y1 = y2 = p1 at x = 1. `published` drops the 1/r on the log term,
/// as in the originally printed constant.
inline double mixed_approx_constant(double r, double eps1, double p1, bool published = false)
{
    if (!(eps1 > 0.0 && p1 > 0.0 && p1 < 1.0)) throw DomainError("mixed approximation: need eps1 > 0, 0 < p1 < 1");
    const double scale = published ? 1.0 : 1.0 / r;
    return scale * std::log(eps1 / (1.0 - p1)) / (1.0 - p1 + eps1) - 1.0 / (1.0 - p1);
}

/// y2 as a function of y1 under the first-order approximation of the weak
/// (EDF) peers' growth.
inline double mixed_approx_relation(double y1, const TwoDegreeSystem& sys, double eps1, double p1, bool published = false)
{
    const double r = sys.r();
    if (!(y1 - p1 + eps1 > 0.0 && y1 < 1.0)) throw DomainError("mixed approximation: y1 outside the log domain");
    const double L = std::log((y1 - p1 + eps1) / (1.0 - y1)) / (r * (1.0 - p1 + eps1));
    const double inv = L - mixed_approx_constant(r, eps1, p1, published);
    if (!(inv > 0.0)) throw DomainError("mixed approximation: 1/(1-y2) not positive");
    return 1.0 - 1.0 / inv;
}

/// Inverse of mixed_approx_relation: the approximate y1 reached when strong
/// peers are at y2.
inline double mixed_approx_y1(double y2, const TwoDegreeSystem& sys, double eps1, double p1)
{
    if (!(y2 < 1.0)) throw DomainError("mixed approximation: y2 must be < 1");
    const double r = sys.r();
    const double L = r * (1.0 - p1 + eps1) * (1.0 / (1.0 - y2) + mixed_approx_constant(r, eps1, p1));
    const double e = std::exp(L);
    if (!std::isfinite(e)) return 1.0;
    return (e + p1 - eps1) / (1.0 + e);
}

/// Simplified relation (eps1 = p1): y1 = 1 / (1 + exp(-r (1/(1-y2) + C0))).
inline double mixed_simplified_y1(double y2, double r, double p1)
{
    if (!(y2 < 1.0 && p1 > 0.0 && p1 < 1.0)) throw DomainError("mixed simplified relation: need y2 < 1, 0 < p1 < 1");
    const double c0 = std::log(p1 / (1.0 - p1)) / r - 1.0 / (1.0 - p1);
    return 1.0 / (1.0 + std::exp(-r * (1.0 / (1.0 - y2) + c0)));
}

/// Smallest grid point z in (p1,1) with z f2(z) < 1, f2(z) = 1 + exp(-r(1/(1-z) + C0)):
/// the predicted point where weak peers overtake strong ones. Both curves start
/// at p1 (equality there), and below p1 the relation has no physical meaning.
inline std::optional<double> mixed_crossover_prediction(double r, double p1, int grid = 100000)
{
    if (!(r > 0.0 && p1 > 0.0 && p1 < 1.0)) throw DomainError("crossover prediction: need r > 0, 0 < p1 < 1");
    const double c0 = std::log(p1 / (1.0 - p1)) / r - 1.0 / (1.0 - p1);
    for (int i = 1; i < grid; ++i) {
        const double z = static_cast<double>(i) / grid;
        if (z <= p1) continue;
        const double f2 = 1.0 + std::exp(-r * (1.0 / (1.0 - z) + c0));
        if (z * f2 < 1.0) return z;
    }
    return std::nullopt;
}

enum class OdeKind { PureLdf, Mixed };

struct StabilityReport {
    std::array<std::array<double, 2>, 2> jacobian{};
    std::array<std::complex<double>, 2> eigenvalues{};
    // mixed case: the equilibrium offset y0 = p1 - eps1 inside the EDF numerator
    double y0 = 0.0;
};

inline std::array<std::complex<double>, 2> eigenvalues_2x2(const std::array<std::array<double, 2>, 2>& J)
{
    const double tr = J[0][0] + J[1][1];
    const double det = J[0][0] * J[1][1] - J[0][1] * J[1][0];
    const std::complex<double> disc = std::sqrt(std::complex<double>(tr * tr / 4.0 - det));
    return {tr / 2.0 + disc, tr / 2.0 - disc};
}

/// Right-hand side of the chosen ODE (weak EDF with offset eps1 in the mixed case).
inline std::array<double, 2> ode_rhs(const TwoDegreeSystem& sys, OdeKind kind, double y1, double y2, double eps1 = 0.0)
{
    detail::ProfileRhs f{sys, {kind == OdeKind::Mixed ? Strategy::EDF : Strategy::LDF, Strategy::LDF}, {eps1, 0.0}};
    return f(0.0, {y1, y2});
}

/// Analytic Jacobian of the ODE right-hand side at (y1, y2).
inline StabilityReport stability_jacobian(const TwoDegreeSystem& sys, OdeKind kind, double y1, double y2,
                                          double eps1 = 0.0)
{
    sys.validate();
    require(y1 >= 0.0 && y1 <= 1.0 && y2 >= 0.0 && y2 <= 1.0, "stability_jacobian: point outside [0,1]^2");
    const double vs = sys.contact_scale;
    const double theta = sys.q1 * y1 + sys.q2 * y2;
    StabilityReport rep;
    auto& J = rep.jacobian;
    // strong peers run LDF in both cases: f2 = k2 vs theta (1-y2)^2
    J[1][0] = sys.k2 * vs * sys.q1 * (1.0 - y2) * (1.0 - y2);
    J[1][1] = sys.k2 * vs * (sys.q2 * (1.0 - y2) * (1.0 - y2) - 2.0 * theta * (1.0 - y2));
    if (kind == OdeKind::PureLdf) {
        J[0][0] = sys.k1 * vs * (sys.q1 * (1.0 - y1) * (1.0 - y1) - 2.0 * theta * (1.0 - y1));
        J[0][1] = sys.k1 * vs * sys.q2 * (1.0 - y1) * (1.0 - y1);
    } else {
        // f1 = a g / (1 - a), a = k1 vs theta (1-y1), g = y1 - p1 + eps1
        const double a = sys.k1 * vs * theta * (1.0 - y1);
        const double den = 1.0 - a;
        if (den <= kContinuumSingularTol) throw ContinuumSingularity(0.0, den);
        const double g = y1 - sys.p1_boundary + eps1;
        const double da1 = sys.k1 * vs * (sys.q1 * (1.0 - y1) - theta);
        const double da2 = sys.k1 * vs * sys.q2 * (1.0 - y1);
        J[0][0] = (da1 * g + a * den) / (den * den);
        J[0][1] = da2 * g / (den * den);
        rep.y0 = sys.p1_boundary - eps1;
    }
    rep.eigenvalues = eigenvalues_2x2(J);
    return rep;
}

} // namespace schedmix
