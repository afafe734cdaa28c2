#pragma once

// When does aggregating peers by (degree, buffer state) shrink the state space?
//
// The aggregated space is counted via nonnegative contingency tables with row
// sums R (peers per degree) and column sums C (peers per buffer state), whose
// number is bracketed by the variational bound chi(R, C).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "schedmix/common.hpp"

namespace schedmix {

/// ln |Omega| = ln M + M (n-1) ln 2.
inline double omega_log_size(long long M, int n)
{
    require(M >= 2 && n >= 2, "omega_log_size: need M >= 2, n >= 2");
    return std::log(static_cast<double>(M)) + static_cast<double>(M) * (n - 1) * std::log(2.0);
}

inline double log_binomial(double a, double b)
{
    return std::lgamma(a + 1.0) - std::lgamma(b + 1.0) - std::lgamma(a - b + 1.0);
}

/// ln |C| = (n-1) ln 2 + ln binom(M - 2 + 2^{n-1}, M - 1).
inline double column_set_log_size(long long M, int n)
{
    require(M >= 2 && n >= 2 && n <= 60, "column_set_log_size: need M >= 2, 2 <= n <= 60");
    const double half = std::ldexp(1.0, n - 1);
    return (n - 1) * std::log(2.0) + log_binomial(static_cast<double>(M) - 2.0 + half, static_cast<double>(M) - 1.0);
}

inline constexpr std::uint64_t kDefaultEnumerationBudget = 10'000'000;

/// Exact number of nonnegative integer matrices with row sums R and column sums C,
/// by recursive enumeration of rows. Throws DomainError past `budget` candidate rows.
inline std::uint64_t count_contingency_bruteforce(const std::vector<long long>& R, const std::vector<long long>& C,
                                                  std::uint64_t budget = kDefaultEnumerationBudget)
{
    for (auto v : R) require(v >= 0, "contingency count: negative row sum");
    for (auto v : C) require(v >= 0, "contingency count: negative column sum");
    require(std::accumulate(R.begin(), R.end(), 0LL) == std::accumulate(C.begin(), C.end(), 0LL),
            "contingency count: row and column totals differ");
    if (R.empty() || C.empty()) return 1;
    std::vector<long long> remaining = C;
    std::uint64_t visited = 0;
    std::uint64_t count = 0;

    // fills row `row` column by column
    std::function<void(std::size_t, std::size_t, long long)> fill = [&](std::size_t row, std::size_t col, long long left) {
        if (row + 1 == R.size()) {
            // last row is forced to take whatever the columns still need
            ++visited;
            ++count;
            return;
        }
        if (col + 1 == C.size()) {
            if (left > remaining[col]) return;
            if (++visited > budget) throw DomainError("contingency count: enumeration budget exceeded");
            remaining[col] -= left;
            fill(row + 1, 0, R[row + 1]);
            remaining[col] += left;
            return;
        }
        const long long hi = std::min(left, remaining[col]);
        for (long long v = 0; v <= hi; ++v) {
            remaining[col] -= v;
            fill(row, col + 1, left - v);
            remaining[col] += v;
        }
    };
    fill(0, 0, R[0]);
    return count;
}

/// ln F in the coordinates x_i = e^{-x'_i}, y_j = e^{-y'_j}:
///   F'(x', y') = sum_i n_i x'_i + sum_j c_j y'_j - sum_{i,j} ln(1 - e^{-x'_i - y'_j}).
/// Returns +inf outside the domain x'_i + y'_j > 0.
inline double chi_objective(const std::vector<double>& R, const std::vector<double>& C, const std::vector<double>& xp,
                            const std::vector<double>& yp)
{
    double f = 0.0;
    for (std::size_t i = 0; i < R.size(); ++i) f += R[i] * xp[i];
    for (std::size_t j = 0; j < C.size(); ++j) f += C[j] * yp[j];
    for (double xi : xp)
        for (double yj : yp) {
            const double s = xi + yj;
            if (!(s > 0.0)) return std::numeric_limits<double>::infinity();
            f -= std::log1p(-std::exp(-s));
        }
    return f;
}

inline void chi_gradient(const std::vector<double>& R, const std::vector<double>& C, const std::vector<double>& xp,
                         const std::vector<double>& yp, std::vector<double>& gx, std::vector<double>& gy)
{
    gx.assign(R.begin(), R.end());
    gy.assign(C.begin(), C.end());
    for (std::size_t i = 0; i < xp.size(); ++i)
        for (std::size_t j = 0; j < yp.size(); ++j) {
            const double w = 1.0 / std::expm1(xp[i] + yp[j]);
            gx[i] -= w;
            gy[j] -= w;
        }
}

struct ChiResult {
    double log_chi = 0.0;
    std::vector<double> x_prime; // aligned with the nonzero rows
    std::vector<double> y_prime; // aligned with the nonzero columns
    std::vector<double> rows;
    std::vector<double> cols;
    long iterations = 0;
    double gradient_norm = 0.0;
};

struct ChiOptions {
    double tol = 1e-10;
    long max_iter = 200000;
};

/// ln chi(R, C): minimum of F' by gradient descent with Barzilai-Borwein trial
/// steps and Armijo backtracking. Zero rows and columns are dropped (their
/// factors tend to 1 at the infimum). F' is invariant under x' + t, y' - t, so
/// the minimizer is shifted into the positive orthant before returning.
inline ChiResult chi(const std::vector<long long>& R_in, const std::vector<long long>& C_in, const ChiOptions& opt = {})
{
    for (auto v : R_in) require(v >= 0, "chi: negative row sum");
    for (auto v : C_in) require(v >= 0, "chi: negative column sum");
    require(std::accumulate(R_in.begin(), R_in.end(), 0LL) == std::accumulate(C_in.begin(), C_in.end(), 0LL),
            "chi: row and column totals differ");
    ChiResult res;
    for (auto v : R_in)
        if (v > 0) res.rows.push_back(static_cast<double>(v));
    for (auto v : C_in)
        if (v > 0) res.cols.push_back(static_cast<double>(v));
    if (res.rows.empty()) return res; // empty table: chi = 1
    const auto& R = res.rows;
    const auto& C = res.cols;
    std::vector<double> xp(R.size(), 1.0), yp(C.size(), 1.0), gx, gy;
    std::vector<double> nx, ny, ngx, ngy;
    chi_gradient(R, C, xp, yp, gx, gy);
    double f = chi_objective(R, C, xp, yp);
    double alpha = 0.1;
    auto sq = [](const std::vector<double>& a) {
        double s = 0.0;
        for (double v : a) s += v * v;
        return s;
    };
    bool stalled = false;
    for (long it = 0; it < opt.max_iter && !stalled; ++it) {
        const double gnorm = std::sqrt(sq(gx) + sq(gy));
        res.gradient_norm = gnorm;
        res.iterations = it;
        if (gnorm < opt.tol) break;
        double step = alpha;
        double nf = f;
        for (int bt = 0;; ++bt) {
            nx = xp;
            ny = yp;
            for (std::size_t i = 0; i < nx.size(); ++i) nx[i] -= step * gx[i];
            for (std::size_t j = 0; j < ny.size(); ++j) ny[j] -= step * gy[j];
            nf = chi_objective(R, C, nx, ny);
            if (nf <= f - 1e-4 * step * gnorm * gnorm && nf < f) break;
            // below the resolution of f, judge the step by the gradient instead
            if (std::isfinite(nf) && std::abs(nf - f) <= 1e-13 * std::max(1.0, std::abs(f))) {
                chi_gradient(R, C, nx, ny, ngx, ngy);
                if (std::sqrt(sq(ngx) + sq(ngy)) < gnorm) break;
            }
            step *= 0.5;
            if (bt > 60) {
                // no decrease representable in floating point: the gradient is at its noise floor
                stalled = true;
                break;
            }
        }
        if (stalled) break;
        chi_gradient(R, C, nx, ny, ngx, ngy);
        // Barzilai-Borwein step for the next trial
        double sy = 0.0, ss = 0.0;
        for (std::size_t i = 0; i < nx.size(); ++i) {
            ss += (nx[i] - xp[i]) * (nx[i] - xp[i]);
            sy += (nx[i] - xp[i]) * (ngx[i] - gx[i]);
        }
        for (std::size_t j = 0; j < ny.size(); ++j) {
            ss += (ny[j] - yp[j]) * (ny[j] - yp[j]);
            sy += (ny[j] - yp[j]) * (ngy[j] - gy[j]);
        }
        alpha = sy > 0.0 ? ss / sy : step * 2.0;
        xp.swap(nx);
        yp.swap(ny);
        gx.swap(ngx);
        gy.swap(ngy);
        f = nf;
    }
    if (res.gradient_norm >= opt.tol && !(stalled && res.gradient_norm < 1e-7))
        throw ConvergenceError("chi: gradient norm " + std::to_string(res.gradient_norm) + " above tolerance");
    // move into the positive orthant along the invariant direction
    const double mx = *std::min_element(xp.begin(), xp.end());
    const double my = *std::min_element(yp.begin(), yp.end());
    const double shift = (my - mx) / 2.0; // afterwards min x' = min y' = (mx + my)/2 > 0
    for (auto& v : xp) v += shift;
    for (auto& v : yp) v -= shift;
    res.x_prime = xp;
    res.y_prime = yp;
    res.log_chi = chi_objective(R, C, xp, yp);
    return res;
}

/// All column-sum vectors over the 2^n buffer states: exactly one peer in a
/// state with bit 1 set, M - 1 peers in states with bit 1 clear. State x is
/// encoded with its first buffer slot in the lowest bit.
inline std::vector<std::vector<long long>> enumerate_column_set(long long M, int n,
                                                                std::uint64_t budget = kDefaultEnumerationBudget)
{
    require(M >= 2 && n >= 2 && n <= 20, "enumerate_column_set: need M >= 2, 2 <= n <= 20");
    const double log_size = column_set_log_size(M, n);
    if (log_size > std::log(static_cast<double>(budget))) throw DomainError("enumerate_column_set: budget exceeded");
    const std::size_t states = std::size_t{1} << n;
    std::vector<std::size_t> with1, without1;
    for (std::size_t x = 0; x < states; ++x) (x & 1U ? with1 : without1).push_back(x);
    std::vector<std::vector<long long>> out;
    std::vector<long long> c(states, 0);
    // distribute M - 1 over the x1 = 0 states
    std::function<void(std::size_t, long long)> place = [&](std::size_t idx, long long left) {
        if (idx + 1 == without1.size()) {
            c[without1[idx]] = left;
            for (std::size_t s : with1) {
                c[s] = 1;
                out.push_back(c);
                c[s] = 0;
            }
            c[without1[idx]] = 0;
            return;
        }
        for (long long v = 0; v <= left; ++v) {
            c[without1[idx]] = v;
            place(idx + 1, left - v);
        }
        c[without1[idx]] = 0;
    };
    place(0, M - 1);
    return out;
}

struct ReductionInstance {
    long long M = 0;
    int n = 2;
    std::vector<long long> R; // peers per degree class
    double a0 = 1.0;

    void validate() const
    {
        require(M >= 2 && n >= 2, "reduction instance: need M >= 2, n >= 2");
        require(!R.empty(), "reduction instance: empty R");
        for (auto v : R) require(v >= 1, "reduction instance: every n_k must be >= 1");
        require(std::accumulate(R.begin(), R.end(), 0LL) == M, "reduction instance: sum of R must equal M");
        require(a0 > 0.0, "reduction instance: a0 must be positive");
    }
};

struct ReductionReport {
    double log_omega = 0.0;
    double log_column_set_size = 0.0;
    long long column_set_count = 0; // enumerated |C|
    double min_log_chi = 0.0;
    double max_log_chi = 0.0;
    std::vector<double> log_chi_per_column; // in enumeration order
    double log_upsilon_lower = 0.0;
    double log_upsilon_upper = 0.0;
    double necessary_lhs = 0.0; // ln(M 2^{(M-1)(n-1)})
    double necessary_rhs = 0.0;
    double sufficient_rhs = 0.0;
    bool necessary_holds = false;
    bool sufficient_holds = false;
    // exact |Upsilon| by brute force when it fits the budget, otherwise -1
    double log_upsilon_exact = -1.0;
};

/// Enumerates the column set, evaluates chi on each member and tests both
/// reduction conditions in log space.
inline ReductionReport check_reduction_conditions(const ReductionInstance& inst, bool count_exact = true,
                                                  std::uint64_t budget = kDefaultEnumerationBudget)
{
    inst.validate();
    ReductionReport rep;
    const double lnM = std::log(static_cast<double>(inst.M));
    rep.log_omega = omega_log_size(inst.M, inst.n);
    rep.log_column_set_size = column_set_log_size(inst.M, inst.n);
    const auto columns = enumerate_column_set(inst.M, inst.n, budget);
    rep.column_set_count = static_cast<long long>(columns.size());
    rep.min_log_chi = std::numeric_limits<double>::infinity();
    rep.max_log_chi = -std::numeric_limits<double>::infinity();
    double exact = 0.0;
    bool exact_ok = count_exact;
    for (const auto& C : columns) {
        const double lc = chi(inst.R, C).log_chi;
        rep.log_chi_per_column.push_back(lc);
        rep.min_log_chi = std::min(rep.min_log_chi, lc);
        rep.max_log_chi = std::max(rep.max_log_chi, lc);
        if (exact_ok) {
            try {
                exact += static_cast<double>(count_contingency_bruteforce(inst.R, C, budget));
            } catch (const DomainError&) {
                exact_ok = false;
            }
        }
    }
    const double penalty = inst.a0 * (static_cast<double>(inst.R.size()) + std::ldexp(1.0, inst.n)) * lnM;
    rep.log_upsilon_lower = rep.log_column_set_size + rep.min_log_chi - penalty;
    rep.log_upsilon_upper = rep.log_column_set_size + rep.max_log_chi;
    rep.necessary_lhs = lnM + static_cast<double>(inst.M - 1) * (inst.n - 1) * std::log(2.0);
    const double log_binom = rep.log_column_set_size - (inst.n - 1) * std::log(2.0);
    rep.necessary_rhs = log_binom + rep.min_log_chi - penalty;
    rep.sufficient_rhs = log_binom + rep.max_log_chi;
    rep.necessary_holds = rep.necessary_lhs >= rep.necessary_rhs;
    rep.sufficient_holds = rep.necessary_lhs >= rep.sufficient_rhs;
    if (exact_ok) rep.log_upsilon_exact = std::log(exact);
    return rep;
}

} // namespace schedmix
