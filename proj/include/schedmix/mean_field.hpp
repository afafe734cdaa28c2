#pragma once

// Stationary mean-field buffer probabilities for a population split into
// degree classes, each running LDF or EDF.
//
// Buffer indices in the public API are 1-based: index 1 is server-fed,
// index n is the playback position.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <ostream>
#include <string>
#include <optional>
#include <vector>

#include "schedmix/common.hpp"
#include "schedmix/degree_graph.hpp"

namespace schedmix {

struct DegreeClass {
    int degree = 1;
    double share = 1.0;
    Strategy strategy = Strategy::LDF;
};

struct MeanFieldConfig {
    int buffer_len = 40;
    double peer_count = 1000;
    double contact_scale = 0.25;
    std::vector<DegreeClass> classes;

    void validate() const
    {
        require(buffer_len >= 2, "mean field: buffer_len must be >= 2");
        require(peer_count >= 1, "mean field: peer_count must be positive");
        require(contact_scale >= 0.0 && std::isfinite(contact_scale), "mean field: contact_scale must be >= 0");
        require(!classes.empty(), "mean field: no degree classes");
        double total = 0.0;
        for (std::size_t a = 0; a < classes.size(); ++a) {
            require(classes[a].degree >= 1, "mean field: degrees must be >= 1");
            require(classes[a].share >= 0.0, "mean field: negative share");
            total += classes[a].share;
        }
        require(std::abs(total - 1.0) <= 1e-12, "mean field: shares do not sum to 1");
    }

    /// Size-biased weights q(k) aligned with `classes`.
    std::vector<double> edge_weights() const
    {
        double mean = 0.0;
        for (const auto& c : classes) mean += c.degree * c.share;
        if (!(mean > 0.0)) throw DomainError("mean field: zero mean degree");
        std::vector<double> q;
        for (const auto& c : classes) q.push_back(c.degree * c.share / mean);
        return q;
    }

    double mean_degree() const
    {
        double m = 0.0;
        for (const auto& c : classes) m += c.degree * c.share;
        return m;
    }

    int max_degree() const
    {
        int m = 0;
        for (const auto& c : classes) m = std::max(m, c.degree);
        return m;
    }
};

/// Builds a configuration from a degree distribution and a degree -> strategy rule.
inline MeanFieldConfig make_mean_field_config(const DegreeDistribution& d, int buffer_len, double peer_count,
                                              double contact_scale, const std::function<Strategy(int)>& rule)
{
    MeanFieldConfig cfg;
    cfg.buffer_len = buffer_len;
    cfg.peer_count = peer_count;
    cfg.contact_scale = contact_scale;
    for (std::size_t i = 0; i < d.size(); ++i) cfg.classes.push_back({d.support()[i], d.mass()[i], rule(d.support()[i])});
    return cfg;
}

struct BufferTable {
    std::vector<int> degrees;
    std::vector<std::vector<double>> p; // p[class][i-1]
    std::vector<double> theta;          // theta[i-1]
    std::vector<double> p_global;       // p_global[i-1]
    long iterations = 0;

    int buffer_len() const { return theta.empty() ? 0 : static_cast<int>(theta.size()); }
    double at(std::size_t cls, int index) const { return p.at(cls).at(static_cast<std::size_t>(index - 1)); }
};

/// Raised when the implicit EDF step has a non-positive denominator: the
/// mean-field equations have no admissible solution for this (k, contact scale).
class EdfBreakdown : public DomainError {
public:
    EdfBreakdown(int degree, int index, double denominator)
        : DomainError("EDF step denominator " + std::to_string(denominator) + " <= 0 at degree " +
                      std::to_string(degree) + ", buffer index " + std::to_string(index)),
          degree(degree), index(index)
    {
    }
    int degree;
    int index;
};

inline void check_index(const std::vector<double>& p, int i, int hi)
{
    if (i < 1 || i > hi || static_cast<std::size_t>(hi) > p.size())
        throw InvalidParameter("buffer index " + std::to_string(i) + " out of range [1, " + std::to_string(hi) + "]");
}

/// Rarest-first selection probability s_k(i) = 1 - p_k(i).
inline double chunk_selection_ldf(const std::vector<double>& pk, int i)
{
    check_index(pk, i, static_cast<int>(pk.size()));
    return 1.0 - pk[static_cast<std::size_t>(i - 1)];
}

/// Greedy selection probability s_k(i) = 1 - p_k(1) - p_k(n) + p_k(i+1), 1 <= i <= n-1.
/// Returned raw (possibly outside [0,1] away from a fixed point).
inline double chunk_selection_edf(const std::vector<double>& pk, int i)
{
    const int n = static_cast<int>(pk.size());
    check_index(pk, i, n - 1);
    return 1.0 - pk[0] - pk[static_cast<std::size_t>(n - 1)] + pk[static_cast<std::size_t>(i)];
}

namespace detail {

// probability that index j neither holds the chunk nor triggers a download
inline double pass_factor(double pj, double k_vs, double theta_j) { return pj + (1.0 - pj) * (1.0 - k_vs * theta_j); }

} // namespace detail

/// LDF selection probability from the independence product over indices 1..i-1.
inline double chunk_selection_ldf_product(const std::vector<double>& pk, const std::vector<double>& theta, int degree,
                                          double contact_scale, int i)
{
    check_index(pk, i, static_cast<int>(pk.size()));
    const double kvs = degree * contact_scale;
    double s = 1.0 - pk[0];
    for (int j = 1; j <= i - 1; ++j) s *= detail::pass_factor(pk[j - 1], kvs, theta[j - 1]);
    return s;
}

/// EDF selection probability from the independence product over indices i+1..n-1.
inline double chunk_selection_edf_product(const std::vector<double>& pk, const std::vector<double>& theta, int degree,
                                          double contact_scale, int i)
{
    const int n = static_cast<int>(pk.size());
    check_index(pk, i, n - 1);
    const double kvs = degree * contact_scale;
    double s = 1.0 - pk[0];
    for (int j = i + 1; j <= n - 1; ++j) s *= detail::pass_factor(pk[j - 1], kvs, theta[j - 1]);
    return s;
}

struct SolverOptions {
    double damping = 0.5;
    double tol = 1e-10;
    long max_iter = 100000;
    // several EDF classes: halve the damping whenever the residual grows
    bool adaptive_damping = true;
    double min_damping = 1e-6;
};

namespace detail {

inline void finish_table(const MeanFieldConfig& cfg, const std::vector<double>& q, BufferTable& t)
{
    const auto n = static_cast<std::size_t>(cfg.buffer_len);
    t.theta.assign(n, 0.0);
    t.p_global.assign(n, 0.0);
    for (std::size_t c = 0; c < cfg.classes.size(); ++c)
        for (std::size_t i = 0; i < n; ++i) {
            t.theta[i] += q[c] * t.p[c][i];
            t.p_global[i] += cfg.classes[c].share * t.p[c][i];
        }
}

// One forward pass of the recurrence. EDF steps are solved implicitly in
// p_k(i+1); the p_k(n) they need comes from `tail` (indexed by class).
inline void sweep(const MeanFieldConfig& cfg, const std::vector<double>& q, const std::vector<double>& tail,
                  std::vector<std::vector<double>>& p)
{
    const auto K = cfg.classes.size();
    const auto n = static_cast<std::size_t>(cfg.buffer_len);
    const double p1 = 1.0 / cfg.peer_count;
    for (auto& row : p) row.assign(n, p1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        double theta = 0.0;
        for (std::size_t c = 0; c < K; ++c) theta += q[c] * p[c][i];
        for (std::size_t c = 0; c < K; ++c) {
            const double pi = p[c][i];
            const double a = cfg.classes[c].degree * cfg.contact_scale * theta * (1.0 - pi);
            double v;
            if (cfg.classes[c].strategy == Strategy::LDF) {
                v = pi + a * (1.0 - pi);
            } else {
                const double den = 1.0 - a;
                if (den <= 1e-12) throw EdfBreakdown(cfg.classes[c].degree, static_cast<int>(i + 1), den);
                v = (pi + a * (1.0 - p1 - tail[c])) / den;
            }
            // large k vs can overshoot 1 in a single step
            p[c][i + 1] = std::clamp(v, 0.0, 1.0);
        }
    }
}

} // namespace detail

/// Stationary solution of the recurrence
///   p_k(i+1) = p_k(i) + k vs theta_i (1 - p_k(i)) s_k(i),  p_k(1) = 1/M.
/// A forward sweep is fully determined by the p_k(n) of the EDF classes, so
/// the fixed point is sought on that vector only: bracketing for one EDF
/// class (the sweep output is nonincreasing in p_k(n)), damped iteration for
/// several. Without EDF classes one sweep is exact.
inline BufferTable solve_fixed_point(const MeanFieldConfig& cfg, const SolverOptions& opt = {})
{
    cfg.validate();
    require(opt.damping > 0.0 && opt.damping <= 1.0, "solve_fixed_point: damping must lie in (0,1]");
    require(opt.tol > 0.0, "solve_fixed_point: tol must be positive");
    const auto K = cfg.classes.size();
    const auto n = static_cast<std::size_t>(cfg.buffer_len);
    const auto q = cfg.edge_weights();
    std::vector<std::size_t> edf;
    for (std::size_t c = 0; c < K; ++c)
        if (cfg.classes[c].strategy == Strategy::EDF) edf.push_back(c);

    std::vector<std::vector<double>> p(K);
    std::vector<double> tail(K, 0.0);
    auto done = [&](long it) {
        BufferTable t;
        for (const auto& c : cfg.classes) t.degrees.push_back(c.degree);
        t.p = std::move(p);
        t.iterations = it;
        detail::finish_table(cfg, q, t);
        return t;
    };
    // residual of the guess in tail: largest |p_k(n) - tail_k| after a sweep
    auto evaluate = [&]() {
        detail::sweep(cfg, q, tail, p);
        double r = 0.0;
        for (auto c : edf) r = std::max(r, std::abs(p[c][n - 1] - tail[c]));
        return r;
    };

    if (edf.empty()) {
        evaluate();
        return done(1);
    }
    if (edf.size() == 1) {
        const auto c = edf[0];
        // a breakdown means the guess for p_k(n) is too small: growth runs away
        double lo = 0.0, hi = 1.0;
        std::optional<EdfBreakdown> last_breakdown;
        for (long it = 1; it <= opt.max_iter; ++it) {
            tail[c] = 0.5 * (lo + hi);
            double r = INFINITY;
            bool broke = false;
            try {
                r = evaluate();
                last_breakdown.reset();
            } catch (const EdfBreakdown& e) {
                broke = true;
                last_breakdown = e;
            }
            if (r < opt.tol) return done(it);
            if (hi - lo < 1e-15) {
                if (last_breakdown) throw *last_breakdown;
                break; // bracket collapsed on a jump
            }
            (broke || p[c][n - 1] > tail[c] ? lo : hi) = tail[c];
        }
        throw ConvergenceError("solve_fixed_point: no fixed point found for the EDF class of degree " +
                               std::to_string(cfg.classes[c].degree) + " within " + std::to_string(opt.max_iter) +
                               " sweeps");
    }
    // start from full tails, where EDF steps cannot break down, and back off
    // the damping whenever a step leads into a breakdown
    double damping = opt.damping;
    double prev = INFINITY;
    for (auto c : edf) tail[c] = 1.0;
    std::vector<double> last_tail = tail, step(K, 0.0);
    for (long it = 1; it <= opt.max_iter; ++it) {
        double r;
        try {
            r = evaluate();
        } catch (const EdfBreakdown&) {
            if (it == 1 || damping <= opt.min_damping) throw;
            damping = std::max(damping * 0.5, opt.min_damping);
            for (auto c : edf) tail[c] = last_tail[c] + damping * step[c];
            continue;
        }
        if (r < opt.tol) return done(it);
        if (opt.adaptive_damping && r > prev) damping = std::max(damping * 0.5, opt.min_damping);
        prev = r;
        last_tail = tail;
        for (auto c : edf) {
            step[c] = p[c][n - 1] - tail[c];
            tail[c] += damping * step[c];
        }
    }
    throw ConvergenceError("solve_fixed_point: no convergence within " + std::to_string(opt.max_iter) + " iterations");
}

/// Largest |p_k(i+1) - clamp(p_k(i) + k vs theta_i (1-p_k(i)) s_k(i))| over the
/// table, using the closed-form selection functions; the clamp to [0,1] is the
/// same one the solver applies.
inline double recurrence_residual(const MeanFieldConfig& cfg, const BufferTable& t)
{
    double worst = 0.0;
    const int n = cfg.buffer_len;
    for (std::size_t c = 0; c < cfg.classes.size(); ++c) {
        const auto& pk = t.p[c];
        for (int i = 1; i <= n - 1; ++i) {
            const double s = cfg.classes[c].strategy == Strategy::LDF ? chunk_selection_ldf(pk, i)
                                                                      : chunk_selection_edf(pk, i);
            const double rhs = pk[i - 1] + cfg.classes[c].degree * cfg.contact_scale * t.theta[i - 1] *
                                               (1.0 - pk[i - 1]) * s;
            worst = std::max(worst, std::abs(pk[i] - std::clamp(rhs, 0.0, 1.0)));
        }
    }
    return worst;
}

struct StartupLatency {
    std::vector<double> per_degree;
    double global = 0.0;
    std::vector<double> per_degree_normalized;
    double global_normalized = 0.0;
    double normalizer = 0.0; // n * k_max * vs
};

/// Mean-field start-up latency k vs sum_i p_k(i), and E[k] vs sum_i p(i) globally.
/// The normalized variants divide by n k_max vs so they fall in [0,1].
inline StartupLatency startup_latency(const MeanFieldConfig& cfg, const BufferTable& t)
{
    StartupLatency out;
    out.normalizer = cfg.buffer_len * cfg.max_degree() * cfg.contact_scale;
    auto norm = [&](double v) { return out.normalizer > 0.0 ? v / out.normalizer : 0.0; };
    for (std::size_t c = 0; c < cfg.classes.size(); ++c) {
        double sum = 0.0;
        for (double v : t.p[c]) sum += v;
        out.per_degree.push_back(cfg.classes[c].degree * cfg.contact_scale * sum);
        out.per_degree_normalized.push_back(norm(out.per_degree.back()));
    }
    double sum = 0.0;
    for (double v : t.p_global) sum += v;
    out.global = cfg.mean_degree() * cfg.contact_scale * sum;
    out.global_normalized = norm(out.global);
    return out;
}

/// Rate-equation oracle: evolves the full distribution over buffer states of
/// every degree class and marginalizes. Buffers carry n+1 slots: slot 1 is the
/// pre-shift server slot, so slot j+1 holds what the recurrence calls index j.
/// Selection functions use the independence products, so the only mean-field
/// assumptions are the ones the recurrence itself makes.
inline BufferTable integrate_full_rate_equation(const MeanFieldConfig& cfg, double horizon = 2000.0, double dt = 0.05,
                                                double stationarity_tol = 1e-9)
{
    cfg.validate();
    require(cfg.buffer_len <= 8, "full rate equation: buffer_len must be <= 8");
    require(cfg.classes.size() <= 2, "full rate equation: at most two degree classes");
    require(dt > 0.0 && horizon > 0.0, "full rate equation: horizon and dt must be positive");
    const int n = cfg.buffer_len;
    const int bits = n + 1;
    const std::size_t states = std::size_t{1} << bits;
    const std::size_t full_mask = states - 1;
    const auto K = cfg.classes.size();
    const auto q = cfg.edge_weights();
    const double inv_m = 1.0 / cfg.peer_count;

    using Dist = std::vector<std::vector<double>>;
    Dist w(K, std::vector<double>(states, 0.0));
    for (auto& wc : w) wc[0] = 1.0; // everyone starts empty

    // marginal of recurrence index i (1..n) = slot i+1 = bit i
    auto marginals = [&](const Dist& d) {
        std::vector<std::vector<double>> p(K, std::vector<double>(static_cast<std::size_t>(n), 0.0));
        for (std::size_t c = 0; c < K; ++c)
            for (std::size_t u = 0; u < states; ++u) {
                if (d[c][u] == 0.0) continue;
                for (int i = 1; i <= n; ++i)
                    if (u >> i & 1U) p[c][static_cast<std::size_t>(i - 1)] += d[c][u];
            }
        return p;
    };

    auto derivative = [&](const Dist& d, Dist& out) {
        auto p = marginals(d);
        std::vector<double> theta(static_cast<std::size_t>(n), 0.0);
        for (std::size_t c = 0; c < K; ++c)
            for (int i = 0; i < n; ++i) theta[static_cast<std::size_t>(i)] += q[c] * p[c][static_cast<std::size_t>(i)];
        for (std::size_t c = 0; c < K; ++c) {
            // per-slot download rate; slot 0 is the server slot
            std::vector<double> rate(static_cast<std::size_t>(bits), 0.0);
            rate[0] = inv_m;
            const double kvs = cfg.classes[c].degree * cfg.contact_scale;
            for (int i = 1; i <= n - 1; ++i) {
                const double s = cfg.classes[c].strategy == Strategy::LDF
                                     ? chunk_selection_ldf_product(p[c], theta, cfg.classes[c].degree, cfg.contact_scale, i)
                                     : chunk_selection_edf_product(p[c], theta, cfg.classes[c].degree, cfg.contact_scale, i);
                rate[static_cast<std::size_t>(i)] = kvs * s * theta[static_cast<std::size_t>(i - 1)];
            }
            auto& o = out[c];
            std::fill(o.begin(), o.end(), 0.0);
            for (std::size_t v = 0; v < states; ++v) {
                const double wv = d[c][v];
                o[v] -= wv;
                if (wv == 0.0) continue;
                // pre-shift state v plus its download flows, then shifted
                o[(v << 1) & full_mask] += wv;
                for (int b = 0; b < bits; ++b) {
                    if (v >> b & 1U) continue;
                    const double f = rate[static_cast<std::size_t>(b)] * wv;
                    if (f == 0.0) continue;
                    o[(v << 1) & full_mask] -= f;
                    o[((v | (std::size_t{1} << b)) << 1) & full_mask] += f;
                }
            }
        }
    };

    Dist k1(K, std::vector<double>(states)), k2 = k1, k3 = k1, k4 = k1, tmp = k1;
    auto axpy = [&](const Dist& base, const Dist& dir, double h, Dist& res) {
        for (std::size_t c = 0; c < K; ++c)
            for (std::size_t u = 0; u < states; ++u) res[c][u] = base[c][u] + h * dir[c][u];
    };
    const auto steps = static_cast<long>(std::ceil(horizon / dt));
    for (long s = 0; s < steps; ++s) {
        derivative(w, k1);
        double norm = 0.0;
        for (const auto& dc : k1)
            for (double x : dc) norm = std::max(norm, std::abs(x));
        if (norm < stationarity_tol) {
            BufferTable t;
            for (const auto& c : cfg.classes) t.degrees.push_back(c.degree);
            t.p = marginals(w);
            t.iterations = s;
            detail::finish_table(cfg, q, t);
            return t;
        }
        axpy(w, k1, dt / 2, tmp);
        derivative(tmp, k2);
        axpy(w, k2, dt / 2, tmp);
        derivative(tmp, k3);
        axpy(w, k3, dt, tmp);
        derivative(tmp, k4);
        for (std::size_t c = 0; c < K; ++c)
            for (std::size_t u = 0; u < states; ++u)
                w[c][u] += dt / 6.0 * (k1[c][u] + 2 * k2[c][u] + 2 * k3[c][u] + k4[c][u]);
    }
    throw ConvergenceError("full rate equation: horizon exhausted before stationarity");
}

/// CSV rows (degree, buffer_index, p, theta, p_global).
inline void write_buffer_table_csv(std::ostream& os, const BufferTable& t)
{
    os << "degree,buffer_index,p,theta,p_global\n";
    os.precision(12);
    for (std::size_t c = 0; c < t.p.size(); ++c)
        for (std::size_t i = 0; i < t.theta.size(); ++i)
            os << t.degrees[c] << ',' << i + 1 << ',' << t.p[c][i] << ',' << t.theta[i] << ',' << t.p_global[i] << '\n';
}

} // namespace schedmix
