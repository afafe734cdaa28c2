#pragma once

// Random contact graphs for the swarm and their degree distributions.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <queue>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "schedmix/common.hpp"

namespace schedmix {

using NodeId = std::uint32_t;

/// Probability mass over node degrees on an explicit finite support.
class DegreeDistribution {
public:
    DegreeDistribution() = default;

    DegreeDistribution(std::vector<int> support, std::vector<double> mass)
        : support_(std::move(support)), mass_(std::move(mass))
    {
        require(support_.size() == mass_.size(), "degree distribution: support/mass size mismatch");
        require(!support_.empty(), "degree distribution: empty support");
        std::vector<std::size_t> order(support_.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](auto a, auto b) { return support_[a] < support_[b]; });
        std::vector<int> s;
        std::vector<double> m;
        for (auto i : order) {
            s.push_back(support_[i]);
            m.push_back(mass_[i]);
        }
        support_ = std::move(s);
        mass_ = std::move(m);
        double total = 0.0;
        for (std::size_t i = 0; i < support_.size(); ++i) {
            require(support_[i] >= 1, "degree distribution: degrees must be >= 1");
            require(i == 0 || support_[i] != support_[i - 1], "degree distribution: duplicate degree");
            require(mass_[i] >= 0.0 && mass_[i] <= 1.0, "degree distribution: mass outside [0,1]");
            total += mass_[i];
        }
        require(std::abs(total - 1.0) <= 1e-12, "degree distribution: masses do not sum to 1");
    }

    static DegreeDistribution point_mass(int degree) { return DegreeDistribution({degree}, {1.0}); }

    const std::vector<int>& support() const { return support_; }
    const std::vector<double>& mass() const { return mass_; }
    std::size_t size() const { return support_.size(); }

    double mass_of(int degree) const
    {
        auto it = std::lower_bound(support_.begin(), support_.end(), degree);
        if (it == support_.end() || *it != degree) return 0.0;
        return mass_[static_cast<std::size_t>(it - support_.begin())];
    }

    double mean() const
    {
        double m = 0.0;
        for (std::size_t i = 0; i < support_.size(); ++i) m += support_[i] * mass_[i];
        return m;
    }

    int max_degree() const { return support_.back(); }

private:
    std::vector<int> support_;
    std::vector<double> mass_;
};

/// Size-biased transform q(k) = k pi(k) / sum_j j pi(j): the degree seen at the
/// end of a uniformly chosen edge.
inline DegreeDistribution size_biased(const DegreeDistribution& d)
{
    const double mean = d.mean();
    if (!(mean > 0.0)) throw DomainError("size_biased: zero mean degree");
    std::vector<double> q(d.size());
    double total = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        q[i] = d.support()[i] * d.mass()[i] / mean;
        total += q[i];
    }
    // renormalise the rounding residue so the invariant holds to 1e-12
    for (auto& v : q) v /= total;
    return DegreeDistribution(d.support(), std::move(q));
}

/// Connected simple undirected graph with sorted adjacency lists.
class SwarmGraph {
public:
    SwarmGraph() = default;

    /// Builds from an edge list; rejects self-loops, duplicates, and disconnected input.
    SwarmGraph(std::size_t node_count, const std::vector<std::pair<NodeId, NodeId>>& edges)
        : adjacency_(node_count)
    {
        require(node_count >= 1, "graph: node count must be positive");
        for (auto [u, v] : edges) {
            require(u < node_count && v < node_count, "graph: node id out of range");
            require(u != v, "graph: self-loop");
            adjacency_[u].push_back(v);
            adjacency_[v].push_back(u);
        }
        for (auto& a : adjacency_) {
            std::sort(a.begin(), a.end());
            require(std::adjacent_find(a.begin(), a.end()) == a.end(), "graph: parallel edge");
        }
        require(is_connected(adjacency_), "graph: not connected");
    }

    std::size_t node_count() const { return adjacency_.size(); }
    const std::vector<NodeId>& neighbors(NodeId v) const { return adjacency_[v]; }
    int degree(NodeId v) const { return static_cast<int>(adjacency_[v].size()); }

    std::vector<int> degrees() const
    {
        std::vector<int> d(adjacency_.size());
        for (std::size_t v = 0; v < adjacency_.size(); ++v) d[v] = static_cast<int>(adjacency_[v].size());
        return d;
    }

    std::size_t edge_count() const
    {
        std::size_t twice = 0;
        for (const auto& a : adjacency_) twice += a.size();
        return twice / 2;
    }

    /// Edges with u < v in ascending lexicographic order.
    std::vector<std::pair<NodeId, NodeId>> edges() const
    {
        std::vector<std::pair<NodeId, NodeId>> out;
        out.reserve(edge_count());
        for (NodeId u = 0; u < adjacency_.size(); ++u)
            for (NodeId v : adjacency_[u])
                if (u < v) out.emplace_back(u, v);
        return out;
    }

    bool operator==(const SwarmGraph& other) const { return adjacency_ == other.adjacency_; }

    static bool is_connected(const std::vector<std::vector<NodeId>>& adjacency)
    {
        if (adjacency.empty()) return false;
        std::vector<char> seen(adjacency.size(), 0);
        std::queue<NodeId> frontier;
        frontier.push(0);
        seen[0] = 1;
        std::size_t reached = 1;
        while (!frontier.empty()) {
            NodeId u = frontier.front();
            frontier.pop();
            for (NodeId v : adjacency[u]) {
                if (!seen[v]) {
                    seen[v] = 1;
                    ++reached;
                    frontier.push(v);
                }
            }
        }
        return reached == adjacency.size();
    }

private:
    std::vector<std::vector<NodeId>> adjacency_;
};

inline constexpr int kDefaultConnectivityRetries = 100;

namespace detail {

inline bool connected_edges(std::size_t n, const std::vector<std::pair<NodeId, NodeId>>& edges)
{
    std::vector<std::vector<NodeId>> adj(n);
    for (auto [u, v] : edges) {
        adj[u].push_back(v);
        adj[v].push_back(u);
    }
    return SwarmGraph::is_connected(adj);
}

} // namespace detail

/// Erdos-Renyi G(M, mean_degree/M), resampled until connected.
inline SwarmGraph generate_er(std::size_t node_count, double mean_degree, std::uint64_t seed,
                              int retry_budget = kDefaultConnectivityRetries)
{
    require(node_count >= 2, "generate_er: need at least 2 nodes");
    require(mean_degree > 0.0 && mean_degree < static_cast<double>(node_count),
            "generate_er: mean degree must lie in (0, M)");
    const double p = mean_degree / static_cast<double>(node_count);
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution coin(p);
    for (int attempt = 0; attempt < retry_budget; ++attempt) {
        std::vector<std::pair<NodeId, NodeId>> edges;
        for (NodeId u = 0; u < node_count; ++u)
            for (NodeId v = u + 1; v < node_count; ++v)
                if (coin(rng)) edges.emplace_back(u, v);
        if (detail::connected_edges(node_count, edges)) return SwarmGraph(node_count, edges);
    }
    throw ConvergenceError("generate_er: no connected sample within " + std::to_string(retry_budget) +
                           " attempts; parameters too sparse");
}

/// Barabasi-Albert preferential attachment seeded with a complete graph on
/// m_attach+1 nodes; every newcomer links to m_attach distinct nodes chosen
/// proportionally to their current degree.
inline SwarmGraph generate_ba(std::size_t node_count, int m_attach, std::uint64_t seed)
{
    require(m_attach >= 1, "generate_ba: m_attach must be >= 1");
    require(node_count > static_cast<std::size_t>(m_attach), "generate_ba: need M > m_attach");
    std::mt19937_64 rng(seed);
    const auto m = static_cast<std::size_t>(m_attach);
    std::vector<std::pair<NodeId, NodeId>> edges;
    std::vector<NodeId> endpoints; // each node appears once per incident edge
    for (NodeId u = 0; u <= m; ++u)
        for (NodeId v = u + 1; v <= m; ++v) {
            edges.emplace_back(u, v);
            endpoints.push_back(u);
            endpoints.push_back(v);
        }
    for (NodeId w = static_cast<NodeId>(m + 1); w < node_count; ++w) {
        std::set<NodeId> targets;
        std::uniform_int_distribution<std::size_t> pick(0, endpoints.size() - 1);
        while (targets.size() < m) targets.insert(endpoints[pick(rng)]);
        for (NodeId t : targets) {
            edges.emplace_back(t, w);
            endpoints.push_back(t);
            endpoints.push_back(w);
        }
    }
    return SwarmGraph(node_count, edges);
}

/// Watts-Strogatz small world: ring lattice with ring_degree/2 neighbours per
/// side; each lattice edge (u, u+j) is rewired with probability rewire_prob to
/// a uniformly chosen non-neighbour of u. Resampled until connected.
inline SwarmGraph generate_ws(std::size_t node_count, int ring_degree, double rewire_prob, std::uint64_t seed,
                              int retry_budget = kDefaultConnectivityRetries)
{
    require(ring_degree >= 2 && ring_degree % 2 == 0, "generate_ws: ring degree must be even and positive");
    require(node_count > static_cast<std::size_t>(ring_degree), "generate_ws: need M > ring_degree");
    require(rewire_prob >= 0.0 && rewire_prob <= 1.0, "generate_ws: rewire probability outside [0,1]");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::uniform_int_distribution<NodeId> any_node(0, static_cast<NodeId>(node_count - 1));
    const int half = ring_degree / 2;
    for (int attempt = 0; attempt < retry_budget; ++attempt) {
        std::vector<std::set<NodeId>> adj(node_count);
        for (NodeId u = 0; u < node_count; ++u)
            for (int j = 1; j <= half; ++j) {
                NodeId v = static_cast<NodeId>((u + static_cast<std::size_t>(j)) % node_count);
                adj[u].insert(v);
                adj[v].insert(u);
            }
        for (int j = 1; j <= half; ++j)
            for (NodeId u = 0; u < node_count; ++u) {
                NodeId v = static_cast<NodeId>((u + static_cast<std::size_t>(j)) % node_count);
                if (!(unif(rng) < rewire_prob)) continue;
                if (!adj[u].count(v)) continue; // already rewired away
                if (adj[u].size() + 1 >= node_count) continue; // u adjacent to everyone
                NodeId w;
                do {
                    w = any_node(rng);
                } while (w == u || adj[u].count(w));
                adj[u].erase(v);
                adj[v].erase(u);
                adj[u].insert(w);
                adj[w].insert(u);
            }
        std::vector<std::pair<NodeId, NodeId>> edges;
        for (NodeId u = 0; u < node_count; ++u)
            for (NodeId v : adj[u])
                if (u < v) edges.emplace_back(u, v);
        if (detail::connected_edges(node_count, edges)) return SwarmGraph(node_count, edges);
    }
    throw ConvergenceError("generate_ws: no connected sample within " + std::to_string(retry_budget) + " attempts");
}

inline DegreeDistribution empirical_degree_distribution(const SwarmGraph& g)
{
    std::map<int, std::size_t> counts;
    for (NodeId v = 0; v < g.node_count(); ++v) ++counts[g.degree(v)];
    std::vector<int> support;
    std::vector<double> mass;
    const double total = static_cast<double>(g.node_count());
    double sum = 0.0;
    for (auto [k, c] : counts) {
        support.push_back(k);
        mass.push_back(static_cast<double>(c) / total);
        sum += mass.back();
    }
    for (auto& m : mass) m /= sum;
    return DegreeDistribution(std::move(support), std::move(mass));
}

/// Edge-list text format: "M E" then E lines "u v" (0-based, u < v, ascending).
inline void write_edge_list(std::ostream& os, const SwarmGraph& g)
{
    auto edges = g.edges();
    os << g.node_count() << ' ' << edges.size() << '\n';
    for (auto [u, v] : edges) os << u << ' ' << v << '\n';
}

inline SwarmGraph read_edge_list(std::istream& is)
{
    std::size_t m = 0, e = 0;
    if (!(is >> m >> e)) throw InvalidParameter("edge list: malformed header");
    std::vector<std::pair<NodeId, NodeId>> edges;
    edges.reserve(e);
    for (std::size_t i = 0; i < e; ++i) {
        long long u = -1, v = -1;
        if (!(is >> u >> v)) throw InvalidParameter("edge list: truncated at edge " + std::to_string(i));
        require(u >= 0 && v >= 0 && u < v, "edge list: expected 0 <= u < v");
        edges.emplace_back(static_cast<NodeId>(u), static_cast<NodeId>(v));
    }
    require(std::is_sorted(edges.begin(), edges.end()), "edge list: edges not in ascending order");
    return SwarmGraph(m, edges);
}

} // namespace schedmix
