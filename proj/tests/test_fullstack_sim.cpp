#include <gtest/gtest.h>

#include <random>

#include "schedmix/fullstack_sim.hpp"

using namespace schedmix;

namespace {

FullStackConfig small(FullStackStrategy s = FullStackStrategy::Mixed, std::uint64_t seed = 1)
{
    FullStackConfig c;
    c.classes = {{"Low", 10, 5.0, 26.0}, {"Medium", 6, 4.5, 60.0}, {"High", 4, 56.0, 134.0}};
    c.ldf_peer_count = 4;
    c.sim_duration_s = 320.0;
    c.strategy = s;
    c.seed = seed;
    return c;
}

} // namespace

TEST(Tracker, FirstPeerGetsEmptyList)
{
    Tracker t;
    std::mt19937_64 rng(1);
    const auto r = join_procedure(7, t, 30, rng);
    EXPECT_TRUE(r.first_registrant);
    EXPECT_TRUE(r.candidates.empty());
    EXPECT_TRUE(t.contains(7));
}

TEST(Tracker, ListExcludesRequesterAndIsCapped)
{
    Tracker t;
    std::mt19937_64 rng(1);
    for (int v = 0; v < 50; ++v) join_procedure(v, t, 30, rng);
    const auto r = join_procedure(50, t, 30, rng);
    EXPECT_FALSE(r.first_registrant);
    EXPECT_EQ(r.candidates.size(), 30U);
    for (int v : r.candidates) {
        EXPECT_NE(v, 50);
        EXPECT_LT(v, 50);
    }
    const auto again = join_procedure(50, t, 30, rng);
    EXPECT_EQ(t.registered().size(), 51U);
    EXPECT_EQ(std::count(again.candidates.begin(), again.candidates.end(), 50), 0);
}

TEST(AcceptRule, FreeSlotAccepts)
{
    std::mt19937_64 rng(1);
    const auto d = decide_connection_request({true}, 2, false, 0.0, 0.0, rng);
    EXPECT_TRUE(d.accept);
    EXPECT_EQ(d.victim, -1);
}

TEST(AcceptRule, FullAndNoReplacementRejects)
{
    std::mt19937_64 rng(1);
    EXPECT_FALSE(decide_connection_request({false, false}, 2, true, 0.0, 0.0, rng).accept);
    EXPECT_FALSE(decide_connection_request({false, false}, 2, false, 1.0, 0.0, rng).accept);
}

TEST(AcceptRule, StrongRequesterDisplacesOnlyNonStrong)
{
    std::mt19937_64 rng(1);
    for (int rep = 0; rep < 50; ++rep) {
        const auto d = decide_connection_request({true, false, true}, 3, true, 1.0, 0.0, rng);
        EXPECT_TRUE(d.accept);
        EXPECT_EQ(d.victim, 1);
    }
    EXPECT_FALSE(decide_connection_request({true, true}, 2, true, 1.0, 0.0, rng).accept);
}

TEST(AcceptRule, ReplacementFrequencies)
{
    std::mt19937_64 rng(9);
    int strong_hits = 0, weak_hits = 0;
    const int N = 64000;
    for (int i = 0; i < N; ++i) {
        strong_hits += decide_connection_request({false, false}, 2, true, 1.0 / 16, 1.0 / 64, rng).accept;
        weak_hits += decide_connection_request({false, false}, 2, false, 1.0 / 16, 1.0 / 64, rng).accept;
    }
    EXPECT_NEAR(strong_hits / double(N), 1.0 / 16, 0.005);
    EXPECT_NEAR(weak_hits / double(N), 1.0 / 64, 0.003);
}

TEST(FullStackConfig, SlotCapsAndValidation)
{
    FullStackConfig c;
    EXPECT_EQ(c.slot_cap(12.5), 7);
    EXPECT_EQ(c.slot_cap(5.0), 3);
    EXPECT_EQ(c.slot_cap(26.0), 15);
    EXPECT_EQ(c.slot_cap(56.0), 33);
    EXPECT_EQ(c.peer_count(), 100);
    EXPECT_NEAR(c.chunk_bits(), 187500.0, 1e-9);
    EXPECT_NO_THROW(c.validate());
    auto bad = c;
    bad.req_win = 60;
    EXPECT_THROW(bad.validate(), InvalidParameter);
    bad = c;
    bad.ldf_peer_count = 21;
    EXPECT_THROW(bad.validate(), InvalidParameter);
    bad = c;
    bad.sim_duration_s = 200;
    EXPECT_THROW(bad.validate(), InvalidParameter);
    EXPECT_THROW(parse_fullstack_strategy("rarest"), InvalidParameter);
}

TEST(RunFullStack, Invariants)
{
    for (auto s : {FullStackStrategy::PureEdf, FullStackStrategy::PureLdf, FullStackStrategy::Mixed}) {
        const auto m = run_fullstack(small(s));
        EXPECT_TRUE(m.time_monotone);
        EXPECT_TRUE(m.caps_respected);
        EXPECT_TRUE(m.requested_only_missing);
        EXPECT_EQ(m.chunk_requests_sent, m.chunk_requests_received + m.chunk_requests_in_flight);
        EXPECT_GE(m.continuity, 0.0);
        EXPECT_LE(m.continuity, 1.0);
        EXPECT_GT(m.deliveries, 0);
        EXPECT_FALSE(m.samples.empty());
        EXPECT_EQ(m.buffer_profile.size(), 50U);
        for (double p : m.buffer_profile) {
            EXPECT_GE(p, 0.0);
            EXPECT_LE(p, 1.0);
        }
    }
}

TEST(RunFullStack, StarvedSourceGivesNoContinuity)
{
    auto c = small();
    c.source_upload_mbps = 1.0; // below the video bitrate: zero upload slots
    const auto m = run_fullstack(c);
    EXPECT_NEAR(m.continuity, 0.0, 1e-12);
}

TEST(RunFullStack, StrongPeersAttractMoreSuppliers)
{
    const auto m = run_fullstack(small());
    EXPECT_GT(m.mean_in_degree_by_class.at("High"), m.mean_in_degree_by_class.at("Low"));
}

TEST(RunFullStack, Deterministic)
{
    const auto a = run_fullstack(small(FullStackStrategy::Mixed, 3));
    const auto b = run_fullstack(small(FullStackStrategy::Mixed, 3));
    EXPECT_EQ(a.continuity, b.continuity);
    EXPECT_EQ(a.events, b.events);
    EXPECT_EQ(a.buffer_profile, b.buffer_profile);
}
