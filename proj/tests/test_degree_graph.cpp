#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "schedmix/degree_graph.hpp"

using namespace schedmix;

namespace {

double mean_degree(const SwarmGraph& g)
{
    double s = 0.0;
    for (NodeId v = 0; v < g.node_count(); ++v) s += g.degree(v);
    return s / static_cast<double>(g.node_count());
}

// Independent structural checks straight from the adjacency lists.
void expect_simple_connected(const SwarmGraph& g)
{
    std::set<std::pair<NodeId, NodeId>> seen;
    for (NodeId v = 0; v < g.node_count(); ++v) {
        for (NodeId u : g.neighbors(v)) {
            EXPECT_NE(u, v);
            const auto& back = g.neighbors(u);
            EXPECT_TRUE(std::find(back.begin(), back.end(), v) != back.end());
            EXPECT_TRUE(seen.insert({v, u}).second) << "parallel edge " << v << "-" << u;
        }
    }
    std::vector<char> vis(g.node_count(), 0);
    std::vector<NodeId> stack{0};
    vis[0] = 1;
    std::size_t count = 1;
    while (!stack.empty()) {
        NodeId v = stack.back();
        stack.pop_back();
        for (NodeId u : g.neighbors(v))
            if (!vis[u]) {
                vis[u] = 1;
                ++count;
                stack.push_back(u);
            }
    }
    EXPECT_EQ(count, g.node_count());
}

} // namespace

TEST(DegreeDistribution, RejectsBadInput)
{
    EXPECT_THROW(DegreeDistribution({1, 2}, {0.5, 0.4}), InvalidParameter);
    EXPECT_THROW(DegreeDistribution({0}, {1.0}), InvalidParameter);
    EXPECT_THROW(DegreeDistribution({3, 3}, {0.5, 0.5}), InvalidParameter);
    EXPECT_THROW(DegreeDistribution({}, {}), InvalidParameter);
}

TEST(DegreeDistribution, SortsSupport)
{
    DegreeDistribution d({5, 2}, {0.25, 0.75});
    EXPECT_EQ(d.support().front(), 2);
    EXPECT_DOUBLE_EQ(d.mass_of(5), 0.25);
    EXPECT_DOUBLE_EQ(d.mass_of(7), 0.0);
    EXPECT_DOUBLE_EQ(d.mean(), 2 * 0.75 + 5 * 0.25);
}

TEST(SizeBiased, PointMassIsFixed)
{
    auto q = size_biased(DegreeDistribution::point_mass(7));
    EXPECT_DOUBLE_EQ(q.mass_of(7), 1.0);
}

TEST(SizeBiased, TwoPointExample)
{
    auto q = size_biased(DegreeDistribution({1, 3}, {0.5, 0.5}));
    EXPECT_NEAR(q.mass_of(1), 0.25, 1e-15);
    EXPECT_NEAR(q.mass_of(3), 0.75, 1e-15);
}

TEST(SizeBiased, PowerLawShiftsExponentByOne)
{
    const double gamma = 2.5;
    std::vector<int> k;
    std::vector<double> m;
    double z = 0.0;
    for (int d = 1; d <= 200; ++d) z += std::pow(d, -gamma);
    for (int d = 1; d <= 200; ++d) {
        k.push_back(d);
        m.push_back(std::pow(d, -gamma) / z);
    }
    double total = 0.0;
    for (double v : m) total += v;
    m.back() += 1.0 - total;
    const auto q = size_biased(DegreeDistribution(k, m));
    // q(k) / q(1) must equal k^{-(gamma-1)} for every k
    for (int d = 2; d < 200; ++d)
        EXPECT_NEAR(q.mass_of(d) / q.mass_of(1), std::pow(d, -(gamma - 1.0)), 1e-9) << d;
}

TEST(SwarmGraph, RejectsInvalidEdgeLists)
{
    EXPECT_THROW(SwarmGraph(3, {{0, 0}, {1, 2}}), InvalidParameter);
    EXPECT_THROW(SwarmGraph(3, {{0, 1}, {1, 0}, {1, 2}}), InvalidParameter);
    EXPECT_THROW(SwarmGraph(4, {{0, 1}, {2, 3}}), InvalidParameter);
}

TEST(GenerateEr, TwoNodesGiveTheSingleEdge)
{
    for (std::uint64_t seed : {1ULL, 2ULL, 99ULL}) {
        auto g = generate_er(2, 1.9, seed);
        EXPECT_EQ(g.edge_count(), 1U);
    }
}

TEST(GenerateEr, MeanDegreeNearTarget)
{
    auto g = generate_er(1000, 8.0, 1);
    EXPECT_NEAR(mean_degree(g), 8.0, 0.8);
    expect_simple_connected(g);
}

TEST(GenerateEr, ZeroMeanDegreeFails) { EXPECT_THROW(generate_er(2, 0.0, 1), Error); }

TEST(GenerateEr, SparseParametersExhaustRetries) { EXPECT_THROW(generate_er(500, 1.0, 3, 5), ConvergenceError); }

TEST(GenerateBa, ThreeNodesTwoAttachIsTriangle)
{
    auto g = generate_ba(3, 2, 11);
    EXPECT_EQ(g.edge_count(), 3U);
    for (NodeId v = 0; v < 3; ++v) EXPECT_EQ(g.degree(v), 2);
}

TEST(GenerateBa, RejectsAttachAtLeastM) { EXPECT_THROW(generate_ba(2, 2, 1), InvalidParameter); }

TEST(GenerateBa, PowerLawTail)
{
    auto g = generate_ba(5000, 3, 7);
    expect_simple_connected(g);
    // least squares on the log complementary CDF over k >= 10; the pmf slope is one lower
    std::map<int, long> count;
    for (NodeId v = 0; v < g.node_count(); ++v) ++count[g.degree(v)];
    std::vector<double> xs, ys;
    long tail = 0;
    for (auto it = count.rbegin(); it != count.rend(); ++it) {
        tail += it->second;
        if (it->first >= 10 && tail >= 5) {
            xs.push_back(std::log(it->first));
            ys.push_back(std::log(static_cast<double>(tail) / 5000.0));
        }
    }
    ASSERT_GE(xs.size(), 5U);
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= xs.size();
    my /= xs.size();
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    const double pmf_slope = sxy / sxx - 1.0;
    EXPECT_GE(pmf_slope, -3.5);
    EXPECT_LE(pmf_slope, -2.0);
}

TEST(GenerateWs, NoRewiringIsRingLattice)
{
    auto g = generate_ws(20, 4, 0.0, 1);
    for (NodeId v = 0; v < 20; ++v) {
        EXPECT_EQ(g.degree(v), 4);
        const auto& nb = g.neighbors(v);
        for (int d : {1, 2}) {
            EXPECT_TRUE(std::find(nb.begin(), nb.end(), (v + d) % 20) != nb.end());
            EXPECT_TRUE(std::find(nb.begin(), nb.end(), (v + 20 - d) % 20) != nb.end());
        }
    }
}

TEST(GenerateWs, RewiringPreservesEdgeCount)
{
    auto g = generate_ws(2000, 8, 0.2, 3);
    EXPECT_EQ(g.edge_count(), 8000U);
    EXPECT_DOUBLE_EQ(mean_degree(g), 8.0);
}

TEST(GenerateWs, FullRewiringStaysSimpleAndConnected)
{
    auto g = generate_ws(10, 4, 1.0, 5);
    EXPECT_EQ(g.edge_count(), 20U);
    expect_simple_connected(g);
}

TEST(GenerateWs, RejectsOddRingDegree) { EXPECT_THROW(generate_ws(10, 3, 0.1, 1), InvalidParameter); }

TEST(EmpiricalDistribution, TriangleAndRing)
{
    EXPECT_DOUBLE_EQ(empirical_degree_distribution(generate_ba(3, 2, 1)).mass_of(2), 1.0);
    EXPECT_DOUBLE_EQ(empirical_degree_distribution(generate_ws(30, 4, 0.0, 1)).mass_of(4), 1.0);
}

TEST(EmpiricalDistribution, SumsToOne)
{
    auto d = empirical_degree_distribution(generate_ba(400, 2, 9));
    double s = 0.0;
    for (double m : d.mass()) s += m;
    EXPECT_NEAR(s, 1.0, 1e-12);
}

TEST(Generators, SameSeedSameGraph)
{
    auto a = generate_ws(300, 6, 0.3, 42), b = generate_ws(300, 6, 0.3, 42);
    EXPECT_EQ(a.edges(), b.edges());
    auto c = generate_ba(300, 2, 42), d = generate_ba(300, 2, 42);
    EXPECT_EQ(c.edges(), d.edges());
}

TEST(EdgeList, RoundTrip)
{
    auto g = generate_ws(50, 4, 0.5, 2);
    std::stringstream ss;
    write_edge_list(ss, g);
    auto h = read_edge_list(ss);
    EXPECT_EQ(g.edges(), h.edges());
    std::stringstream bad("3 2\n0 1\n");
    EXPECT_THROW(read_edge_list(bad), InvalidParameter);
}
