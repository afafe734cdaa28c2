#pragma once

// Monte Carlo simulation of the buffer/shifting contact process on a graph.
//
// Time advances in unit steps. In each step the server feeds index 1 of one
// peer, every other peer makes Poisson(deg * vs) contacts (all contacts of the
// step are executed in one global random order), and then buffers shift one
// slot toward playback. Buffers are bitmasks: bit i-1 holds buffer index i.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "schedmix/common.hpp"
#include "schedmix/degree_graph.hpp"

namespace schedmix {

enum class Shifting { Deterministic, Exponential };

inline std::string_view to_string(Shifting s) { return s == Shifting::Deterministic ? "deterministic" : "exponential"; }

inline Shifting parse_shifting(std::string_view s)
{
    if (s == "deterministic") return Shifting::Deterministic;
    if (s == "exponential") return Shifting::Exponential;
    throw InvalidParameter("unknown shifting '" + std::string(s) + "'");
}

struct AssignmentRule {
    enum class Kind { PureLdf, PureEdf, Mixed } kind = Kind::Mixed;
    double quantile = 0.2; // mixed: share of top-degree peers that run LDF (before ties)

    static AssignmentRule pure_ldf() { return {Kind::PureLdf, 0.2}; }
    static AssignmentRule pure_edf() { return {Kind::PureEdf, 0.2}; }
    static AssignmentRule mixed(double q = 0.2) { return {Kind::Mixed, q}; }

    std::string name() const
    {
        switch (kind) {
        case Kind::PureLdf: return "pure_ldf";
        case Kind::PureEdf: return "pure_edf";
        default: return "mixed";
        }
    }
};

inline AssignmentRule parse_assignment(std::string_view s, double quantile = 0.2)
{
    if (s == "pure_ldf" || s == "ldf") return AssignmentRule::pure_ldf();
    if (s == "pure_edf" || s == "edf") return AssignmentRule::pure_edf();
    if (s == "mixed") return AssignmentRule::mixed(quantile);
    throw InvalidParameter("unknown strategy assignment '" + std::string(s) + "'");
}

/// Degree at the (1 - q) empirical quantile: the largest degree d such that at
/// least ceil(q M) nodes have degree >= d.
inline int strong_degree_threshold(const SwarmGraph& g, double q)
{
    require(q > 0.0 && q <= 1.0, "strategy assignment: quantile must lie in (0,1]");
    auto d = g.degrees();
    std::sort(d.begin(), d.end());
    const auto M = d.size();
    const auto top = static_cast<std::size_t>(std::ceil(q * static_cast<double>(M) - 1e-9));
    const std::size_t pos = M - std::max<std::size_t>(top, 1);
    return d[pos];
}

/// Per-node strategies. Mixed: LDF for degree >= the (1-q) quantile degree, so
/// every node tied at the threshold degree plays LDF.
inline std::vector<Strategy> assign_strategies(const SwarmGraph& g, const AssignmentRule& rule)
{
    std::vector<Strategy> out(g.node_count(), Strategy::LDF);
    if (rule.kind == AssignmentRule::Kind::PureEdf) std::fill(out.begin(), out.end(), Strategy::EDF);
    if (rule.kind != AssignmentRule::Kind::Mixed) return out;
    const int threshold = strong_degree_threshold(g, rule.quantile);
    for (NodeId v = 0; v < g.node_count(); ++v) out[v] = g.degree(v) >= threshold ? Strategy::LDF : Strategy::EDF;
    return out;
}

struct SimConfig {
    SwarmGraph graph;
    int buffer_len = 40;
    double contact_scale = 0.25;
    double breakage_prob = 0.01;
    Shifting shifting = Shifting::Deterministic;
    AssignmentRule assignment = AssignmentRule::mixed();
    long horizon = 4000;
    long burn_in = 2000;
    std::uint64_t seed = 1;
    double init_fill = 0.5;
    int batches = 20; // batch means for within-run standard errors
    // peers with degree >= this quantile degree form the "strong" group in the
    // group metrics; defaults to the mixed-rule threshold
    double strong_quantile = 0.2;

    void validate() const
    {
        require(graph.node_count() >= 2, "sim: graph needs at least 2 nodes");
        require(buffer_len >= 2 && buffer_len <= 64, "sim: buffer_len must lie in [2, 64]");
        require(contact_scale >= 0.0, "sim: contact_scale must be >= 0");
        require(breakage_prob >= 0.0 && breakage_prob <= 1.0, "sim: breakage_prob outside [0,1]");
        require(horizon > 0 && burn_in >= 0 && burn_in < horizon, "sim: need 0 <= burn_in < horizon");
        require(init_fill >= 0.0 && init_fill <= 1.0, "sim: init_fill outside [0,1]");
        require(batches >= 2 && horizon - burn_in >= batches, "sim: need at least one sample per batch");
    }
};

struct SwarmState {
    std::vector<std::uint64_t> buffers;
    NodeId served_peer = 0;
    long clock = 0;

    bool has(NodeId v, int index) const { return buffers[v] >> (index - 1) & 1U; }
};

struct SimMetrics {
    std::vector<int> degrees;                      // distinct degrees, ascending
    std::vector<long> degree_counts;               // nodes per degree
    std::vector<std::vector<double>> buffer_prob;  // [degree class][i-1]
    std::vector<std::vector<double>> buffer_prob_stderr;
    std::vector<double> buffer_prob_global;
    std::vector<double> buffer_prob_global_stderr;
    // [0] weak group (degree below the strong threshold), [1] strong group
    std::array<std::vector<double>, 2> group_prob;
    std::array<std::vector<double>, 2> group_prob_stderr;
    std::array<long, 2> group_size{};
    int strong_threshold = 0;
    double ldf_fraction = 0.0;
    double continuity = 0.0;
    double continuity_stderr = 0.0;
    std::vector<double> startup_latency;            // per degree class, raw
    std::vector<double> startup_latency_normalized; // per degree class
    double startup_latency_global = 0.0;
    double startup_latency_global_normalized = 0.0;
    double latency_normalizer = 0.0;
    std::vector<long> served_steps; // per node, steps spent attached to the server
    long samples = 0;
    long contacts = 0;
    long downloads = 0;
};

/// One contact: `peer` asks a uniformly chosen neighbour for a chunk it lacks
/// (index 1 is server-only). LDF takes the smallest such index, EDF the largest.
/// Returns the downloaded 1-based index.
template <class Rng>
std::optional<int> execute_contact(SwarmState& state, const SwarmGraph& g, NodeId peer, Strategy strategy,
                                   std::uint64_t mask, Rng& rng)
{
    const auto& nb = g.neighbors(peer);
    std::uniform_int_distribution<std::size_t> pick(0, nb.size() - 1);
    const NodeId other = nb[pick(rng)];
    const std::uint64_t avail = ~state.buffers[peer] & state.buffers[other] & mask & ~std::uint64_t{1};
    if (avail == 0) return std::nullopt;
    const int bit = strategy == Strategy::LDF ? std::countr_zero(avail) : 63 - std::countl_zero(avail);
    state.buffers[peer] |= std::uint64_t{1} << bit;
    return bit + 1;
}

namespace detail {

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};

inline MeanSe batch_stats(const std::vector<double>& batch_means)
{
    MeanSe r;
    const double B = static_cast<double>(batch_means.size());
    for (double v : batch_means) r.mean += v;
    r.mean /= B;
    double ss = 0.0;
    for (double v : batch_means) ss += (v - r.mean) * (v - r.mean);
    r.se = B > 1 ? std::sqrt(ss / (B - 1) / B) : 0.0;
    return r;
}

} // namespace detail

inline SimMetrics run_simulation(const SimConfig& cfg)
{
    cfg.validate();
    const SwarmGraph& g = cfg.graph;
    const auto M = g.node_count();
    const int n = cfg.buffer_len;
    const std::uint64_t mask = n == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << n) - 1;
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::uniform_int_distribution<NodeId> any_node(0, static_cast<NodeId>(M - 1));

    const auto strategies = assign_strategies(g, cfg.assignment);

    // degree classes
    SimMetrics out;
    std::map<int, std::size_t> class_of_degree;
    for (NodeId v = 0; v < M; ++v) class_of_degree.emplace(g.degree(v), 0);
    for (auto& [deg, idx] : class_of_degree) {
        idx = out.degrees.size();
        out.degrees.push_back(deg);
    }
    const std::size_t K = out.degrees.size();
    out.degree_counts.assign(K, 0);
    std::vector<std::size_t> node_class(M);
    out.strong_threshold = strong_degree_threshold(g, cfg.strong_quantile);
    std::vector<int> node_group(M);
    long ldf_nodes = 0;
    for (NodeId v = 0; v < M; ++v) {
        node_class[v] = class_of_degree[g.degree(v)];
        ++out.degree_counts[node_class[v]];
        node_group[v] = g.degree(v) >= out.strong_threshold ? 1 : 0;
        ++out.group_size[static_cast<std::size_t>(node_group[v])];
        if (strategies[v] == Strategy::LDF) ++ldf_nodes;
    }
    out.ldf_fraction = static_cast<double>(ldf_nodes) / static_cast<double>(M);

    // initial state
    SwarmState st;
    st.buffers.assign(M, 0);
    st.served_peer = any_node(rng);
    std::bernoulli_distribution fill(cfg.init_fill);
    for (NodeId v = 0; v < M; ++v)
        for (int i = 2; i <= n; ++i)
            if (fill(rng)) st.buffers[v] |= std::uint64_t{1} << (i - 1);

    std::vector<std::poisson_distribution<int>> contact_dist;
    for (int d : out.degrees) contact_dist.emplace_back(std::max(d * cfg.contact_scale, 1e-300));
    std::poisson_distribution<int> shift_dist(1.0);

    const long sample_steps = cfg.horizon - cfg.burn_in;
    const auto B = static_cast<std::size_t>(cfg.batches);
    const auto N = static_cast<std::size_t>(n);
    // per-batch accumulators of bit counts
    std::vector<std::vector<double>> acc_class(B, std::vector<double>(K * N, 0.0));
    std::vector<long> batch_steps(B, 0);
    out.served_steps.assign(M, 0);

    std::vector<NodeId> contacts;
    contacts.reserve(static_cast<std::size_t>(static_cast<double>(M) * 2.0 * cfg.contact_scale * 8.0) + 16);

    for (long t = 0; t < cfg.horizon; ++t) {
        // (a) link breakage: the server may attach to a new peer
        if (unif(rng) < cfg.breakage_prob) {
            st.buffers[st.served_peer] &= ~std::uint64_t{1};
            st.served_peer = any_node(rng);
        }
        st.buffers[st.served_peer] |= 1U;
        ++out.served_steps[st.served_peer];

        // (b) contact draws, (c) one global random order
        contacts.clear();
        if (cfg.contact_scale > 0.0)
            for (NodeId v = 0; v < M; ++v) {
                if (v == st.served_peer) continue;
                const int c = contact_dist[node_class[v]](rng);
                for (int j = 0; j < c; ++j) contacts.push_back(v);
            }
        std::shuffle(contacts.begin(), contacts.end(), rng);
        for (NodeId v : contacts) {
            // the server may not reattach mid-step, so v stays non-served
            if (execute_contact(st, g, v, strategies[v], mask, rng)) ++out.downloads;
        }
        out.contacts += static_cast<long>(contacts.size());

        // sample after exchanges, before the shift
        if (t >= cfg.burn_in) {
            const auto b = static_cast<std::size_t>((t - cfg.burn_in) * static_cast<long>(B) / sample_steps);
            ++batch_steps[b];
            auto& acc = acc_class[b];
            for (NodeId v = 0; v < M; ++v) {
                std::uint64_t bits = st.buffers[v];
                double* row = &acc[node_class[v] * N];
                while (bits) {
                    row[std::countr_zero(bits)] += 1.0;
                    bits &= bits - 1;
                }
            }
        }

        // (d) shift
        if (cfg.shifting == Shifting::Deterministic) {
            for (auto& b : st.buffers) b = (b << 1) & mask;
        } else {
            for (auto& b : st.buffers) {
                const int k = shift_dist(rng);
                b = k >= 64 ? 0 : (b << k) & mask;
            }
            // only the served peer may hold index 1
            for (NodeId v = 0; v < M; ++v)
                if (v != st.served_peer) st.buffers[v] &= ~std::uint64_t{1};
        }
        st.clock = t + 1;
    }
    out.samples = sample_steps;

    // reduce batches
    auto reduce = [&](auto weight_of_class, double denom) {
        std::vector<double> mean(N), se(N);
        std::vector<double> bm(B);
        for (std::size_t i = 0; i < N; ++i) {
            for (std::size_t b = 0; b < B; ++b) {
                double s = 0.0;
                for (std::size_t c = 0; c < K; ++c) s += weight_of_class(c) * acc_class[b][c * N + i];
                bm[b] = s / denom / static_cast<double>(batch_steps[b]);
            }
            const auto ms = detail::batch_stats(bm);
            mean[i] = ms.mean;
            se[i] = ms.se;
        }
        return std::make_pair(mean, se);
    };
    for (std::size_t c = 0; c < K; ++c) {
        auto [m, s] = reduce([&](std::size_t cc) { return cc == c ? 1.0 : 0.0; }, static_cast<double>(out.degree_counts[c]));
        out.buffer_prob.push_back(std::move(m));
        out.buffer_prob_stderr.push_back(std::move(s));
    }
    {
        auto [m, s] = reduce([](std::size_t) { return 1.0; }, static_cast<double>(M));
        out.buffer_prob_global = std::move(m);
        out.buffer_prob_global_stderr = std::move(s);
    }
    for (int grp = 0; grp < 2; ++grp) {
        const long size = out.group_size[static_cast<std::size_t>(grp)];
        if (size == 0) {
            out.group_prob[static_cast<std::size_t>(grp)].assign(N, 0.0);
            out.group_prob_stderr[static_cast<std::size_t>(grp)].assign(N, 0.0);
            continue;
        }
        auto in_group = [&](std::size_t c) {
            return ((out.degrees[c] >= out.strong_threshold) ? 1 : 0) == grp ? 1.0 : 0.0;
        };
        auto [m, s] = reduce(in_group, static_cast<double>(size));
        out.group_prob[static_cast<std::size_t>(grp)] = std::move(m);
        out.group_prob_stderr[static_cast<std::size_t>(grp)] = std::move(s);
    }
    out.continuity = out.buffer_prob_global[N - 1];
    out.continuity_stderr = out.buffer_prob_global_stderr[N - 1];

    // start-up latency k vs sum_i p_k(i), normalized by n k_max vs
    const int kmax = out.degrees.back();
    out.latency_normalizer = n * kmax * cfg.contact_scale;
    auto norm = [&](double v) { return out.latency_normalizer > 0.0 ? v / out.latency_normalizer : 0.0; };
    double mean_deg = 0.0;
    for (std::size_t c = 0; c < K; ++c) {
        double s = 0.0;
        for (double v : out.buffer_prob[c]) s += v;
        out.startup_latency.push_back(out.degrees[c] * cfg.contact_scale * s);
        out.startup_latency_normalized.push_back(norm(out.startup_latency.back()));
        mean_deg += out.degrees[c] * static_cast<double>(out.degree_counts[c]) / static_cast<double>(M);
    }
    double sg = 0.0;
    for (double v : out.buffer_prob_global) sg += v;
    out.startup_latency_global = mean_deg * cfg.contact_scale * sg;
    out.startup_latency_global_normalized = norm(out.startup_latency_global);
    return out;
}

/// Index (1-based) where the weak group first exceeds the strong group, if any.
inline std::optional<int> weak_over_strong_index(const SimMetrics& m)
{
    for (std::size_t i = 1; i < m.group_prob[0].size(); ++i)
        if (m.group_prob[0][i] > m.group_prob[1][i]) return static_cast<int>(i + 1);
    return std::nullopt;
}

} // namespace schedmix
