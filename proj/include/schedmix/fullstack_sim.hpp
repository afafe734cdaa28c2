#pragma once

// Protocol-level discrete-event simulation of a mesh-pull live stream:
// tracker join, bandwidth-limited connection slots, request windows, and
// playback against deadlines.
//
// Connections are directed: a connection from Y to X means Y uploads to X.
// X requests chunks only over its in-connections. Each connection is one slot
// on the sender's upload side and one on the receiver's download side and
// serves queued chunks FIFO at the smaller of the two per-slot rates.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "schedmix/common.hpp"

namespace schedmix {

struct PeerClass {
    std::string name;
    int count = 0;
    double upload_mbps = 0.0;
    double download_mbps = 0.0;
};

/// Broadband access mix used by default: 50 low, 30 medium, 20 high peers.
inline std::vector<PeerClass> default_peer_classes()
{
    return {{"Low", 50, 5.0, 26.0}, {"Medium", 30, 4.5, 60.0}, {"High", 20, 56.0, 134.0}};
}

enum class FullStackStrategy { PureEdf, PureLdf, Mixed };

inline std::string_view to_string(FullStackStrategy s)
{
    switch (s) {
    case FullStackStrategy::PureEdf: return "pure_edf";
    case FullStackStrategy::PureLdf: return "pure_ldf";
    default: return "mixed";
    }
}

inline FullStackStrategy parse_fullstack_strategy(std::string_view s)
{
    if (s == "pure_edf" || s == "edf") return FullStackStrategy::PureEdf;
    if (s == "pure_ldf" || s == "ldf") return FullStackStrategy::PureLdf;
    if (s == "mixed") return FullStackStrategy::Mixed;
    throw InvalidParameter("unknown full-stack strategy '" + std::string(s) + "'");
}

struct FullStackConfig {
    std::vector<PeerClass> classes = default_peer_classes();
    std::string strong_class = "High";
    double video_bitrate_kbps = 1500.0;
    double chunk_rate = 8.0;
    int buffer_chunks = 50;
    double buffer_len_s = 4.0; // playback delay after tracker contact
    double t_base = 1.0;
    int req_win = 20;
    int tracker_list_size = 30;
    int max_parallel_connect = 10;
    double blacklist_s = 60.0;
    double strong_replace_prob = 1.0 / 16.0;
    double random_replace_prob = 1.0 / 64.0;
    double source_upload_mbps = 12.5;
    double source_download_mbps = 12.5;
    FullStackStrategy strategy = FullStackStrategy::Mixed;
    int ldf_peer_count = 20; // strong peers running LDF under the mixed strategy
    double arrival_rate = 1.0; // peers per second
    double latency_s = 0.05;
    double tracker_retry_s = 5.0; // wait before re-querying the tracker
    double stabilization_s = 120.0;
    double measure_interval_s = 60.0;
    double sim_duration_s = 900.0;
    std::uint64_t seed = 1;

    int peer_count() const
    {
        int n = 0;
        for (const auto& c : classes) n += c.count;
        return n;
    }

    double chunk_bits() const { return video_bitrate_kbps * 1000.0 / chunk_rate; }

    int slot_cap(double mbps) const
    {
        return static_cast<int>(std::floor(0.9 * mbps * 1000.0 / video_bitrate_kbps + 1e-9));
    }

    double last_join_time() const { return peer_count() / arrival_rate; }

    void validate() const
    {
        require(!classes.empty() && peer_count() >= 1, "fullstack: no peers");
        for (const auto& c : classes)
            require(c.count >= 0 && c.upload_mbps > 0.0 && c.download_mbps > 0.0, "fullstack: bad peer class " + c.name);
        require(video_bitrate_kbps > 0.0 && chunk_rate > 0.0, "fullstack: bitrate and chunk rate must be positive");
        require(buffer_chunks >= 1, "fullstack: buffer must hold at least one chunk");
        require(std::abs(buffer_len_s * chunk_rate - std::round(buffer_len_s * chunk_rate)) < 1e-9,
                "fullstack: buffer_len_s * chunk_rate must be an integer");
        require(req_win >= 1 && req_win <= buffer_chunks, "fullstack: need 1 <= req_win <= buffer chunks");
        require(t_base > 0.0, "fullstack: t_base must be positive");
        require(tracker_list_size >= 1 && max_parallel_connect >= 1, "fullstack: tracker/connect limits must be >= 1");
        require(strong_replace_prob >= 0.0 && strong_replace_prob <= 1.0 && random_replace_prob >= 0.0 &&
                    random_replace_prob <= 1.0,
                "fullstack: replacement probabilities outside [0,1]");
        require(source_upload_mbps > 0.0, "fullstack: source upload must be positive");
        require(ldf_peer_count >= 0, "fullstack: ldf_peer_count must be >= 0");
        require(arrival_rate > 0.0 && latency_s >= 0.0 && tracker_retry_s > 0.0, "fullstack: bad timing parameters");
        require(measure_interval_s > 0.0 && stabilization_s >= 0.0, "fullstack: bad measurement parameters");
        require(sim_duration_s > last_join_time() + stabilization_s + measure_interval_s,
                "fullstack: duration too short for one measurement interval");
        int strong = 0;
        for (const auto& c : classes)
            if (c.name == strong_class) strong += c.count;
        require(strategy != FullStackStrategy::Mixed || ldf_peer_count <= strong,
                "fullstack: ldf_peer_count exceeds the strong class size");
    }
};

struct FullStackSample {
    double time = 0.0;
    std::string peer_class;
    double continuity = 0.0;
    double requests_per_s = 0.0;
    double in_degree = 0.0;
};

struct FullStackMetrics {
    double continuity = 0.0; // pooled over all measured playback deadlines
    std::map<std::string, double> continuity_by_class;
    double continuity_edf_peers = 0.0;
    double continuity_ldf_peers = 0.0;
    double requests_per_s = 0.0; // chunk requests per peer per second
    double requests_per_s_edf_peers = 0.0;
    double requests_per_s_ldf_peers = 0.0;
    std::map<std::string, double> mean_in_degree_by_class;
    std::vector<double> buffer_profile; // index 1 = newest slot, buffer_chunks = playback slot
    std::vector<FullStackSample> samples;
    // bookkeeping for invariant checks
    long chunk_requests_sent = 0;
    long chunk_requests_received = 0;
    long chunk_requests_in_flight = 0;
    long events = 0;
    bool time_monotone = true;
    bool caps_respected = true;
    bool requested_only_missing = true;
    long deliveries = 0;
    long negative_replies = 0;
    long connection_replacements = 0;
    long tracker_queries = 0;
    double source_strong_share = 0.0; // share of the source's out-connections feeding strong peers, at the end
};

/// Registry of joined nodes handing out uniform random candidate lists.
class Tracker {
public:
    bool contains(int v) const { return std::find(nodes_.begin(), nodes_.end(), v) != nodes_.end(); }
    void register_node(int v)
    {
        if (!contains(v)) nodes_.push_back(v);
    }
    const std::vector<int>& registered() const { return nodes_; }

    /// Up to `list_size` registered nodes other than `requester`, uniformly.
    template <class Rng>
    std::vector<int> sample(int requester, int list_size, Rng& rng) const
    {
        std::vector<int> pool;
        for (int v : nodes_)
            if (v != requester) pool.push_back(v);
        std::shuffle(pool.begin(), pool.end(), rng);
        if (static_cast<int>(pool.size()) > list_size) pool.resize(static_cast<std::size_t>(list_size));
        return pool;
    }

private:
    std::vector<int> nodes_;
};

struct JoinResult {
    std::vector<int> candidates;
    bool first_registrant = false;
};

/// Tracker side of a join: the candidate list is drawn before the requester
/// is registered, so a peer never receives itself.
template <class Rng>
JoinResult join_procedure(int peer, Tracker& tracker, int list_size, Rng& rng)
{
    JoinResult r;
    r.candidates = tracker.sample(peer, list_size, rng);
    r.first_registrant = tracker.registered().empty();
    tracker.register_node(peer);
    return r;
}

struct AcceptDecision {
    bool accept = false;
    int victim = -1; // index into the acceptor's out-connections to drop, -1 for none
};

/// Acceptor rule: free slot -> accept. Full: a strong requester displaces a
/// random connection to a non-strong peer with probability `strong_p`; any
/// other requester displaces a random connection with probability `random_p`.
template <class Rng>
AcceptDecision decide_connection_request(const std::vector<bool>& out_receivers_strong, int out_cap, bool requester_strong,
                                         double strong_p, double random_p, Rng& rng)
{
    AcceptDecision d;
    if (static_cast<int>(out_receivers_strong.size()) < out_cap) {
        d.accept = true;
        return d;
    }
    if (out_receivers_strong.empty()) return d;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<int> victims;
    if (requester_strong) {
        if (u(rng) < strong_p)
            for (std::size_t i = 0; i < out_receivers_strong.size(); ++i)
                if (!out_receivers_strong[i]) victims.push_back(static_cast<int>(i));
    } else if (u(rng) < random_p) {
        for (std::size_t i = 0; i < out_receivers_strong.size(); ++i) victims.push_back(static_cast<int>(i));
    }
    if (victims.empty()) return d;
    d.accept = true;
    d.victim = victims[std::uniform_int_distribution<std::size_t>(0, victims.size() - 1)(rng)];
    return d;
}

namespace detail {

class FullStackSim {
public:
    explicit FullStackSim(const FullStackConfig& cfg) : cfg_(cfg), rng_(cfg.seed) { cfg_.validate(); }

    FullStackMetrics run()
    {
        setup();
        while (!queue_.empty()) {
            std::pop_heap(queue_.begin(), queue_.end(), EventLater{});
            Event ev = std::move(queue_.back());
            queue_.pop_back();
            if (ev.t > cfg_.sim_duration_s) break;
            if (ev.t < now_) out_.time_monotone = false;
            now_ = ev.t;
            ++out_.events;
            dispatch(ev);
        }
        finish();
        return out_;
    }

private:
    enum class Ev : std::uint8_t {
        Join,
        TrackerReply,
        TrackerRetry,
        ConnRequest,
        ConnReply,
        Tick,
        ChunkRequest,
        NegativeReply,
        TransferDone,
        ChunkArrive,
        PlayStep,
        Measure
    };

    struct Event {
        double t;
        std::uint64_t seq;
        Ev type;
        int a = -1, b = -1, c = -1;
        std::vector<int> list;
    };

    struct EventLater {
        bool operator()(const Event& x, const Event& y) const
        {
            return x.t != y.t ? x.t > y.t : x.seq > y.seq;
        }
    };

    struct Connection {
        int sender, receiver;
        bool alive = true;
        bool busy = false;
        std::deque<int> queue;
        std::vector<int> pending; // chunks the receiver awaits over this connection
        double seconds_per_chunk = 0.0;
    };

    struct Node {
        int cls = -1; // -1 = source
        bool strong = false;
        Strategy strategy = Strategy::EDF;
        int out_cap = 0, in_cap = 0;
        double up = 0.0, down = 0.0;
        std::vector<int> in_conns, out_conns;
        std::vector<int> candidates;
        std::vector<double> blacklist_until;
        std::vector<char> requested_to; // open connection requests per target
        int open_requests = 0;
        bool tracker_pending = false;
        double contact_time = -1.0;
        long live_at_contact = 0;
        bool playing = false;
        long play = 0;
        std::vector<char> have;
        std::vector<int> pending_conn; // -1 when not pending
        // interval counters
        long plays = 0, hits = 0, requests = 0;
        long total_plays = 0, total_hits = 0, total_requests = 0;
    };

    const FullStackConfig cfg_;
    std::mt19937_64 rng_;
    std::vector<Event> queue_;
    std::uint64_t seq_ = 0;
    double now_ = 0.0;
    std::vector<Node> nodes_; // 0 = source
    std::vector<Connection> conns_;
    Tracker tracker_;
    long total_chunks_ = 0;
    double measure_start_ = 0.0;
    bool measuring_ = false;
    std::vector<double> profile_acc_;
    long profile_samples_ = 0;
    std::vector<double> in_degree_acc_;
    std::vector<long> in_degree_n_;
    FullStackMetrics out_;

    void push(double t, Ev type, int a = -1, int b = -1, int c = -1, std::vector<int> list = {})
    {
        queue_.push_back(Event{t, seq_++, type, a, b, c, std::move(list)});
        std::push_heap(queue_.begin(), queue_.end(), EventLater{});
    }

    std::size_t pick(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }

    long live(double t) const { return static_cast<long>(std::floor(t * cfg_.chunk_rate + 1e-9)); }

    bool node_has(int v, long chunk) const
    {
        if (chunk < 0) return false;
        if (v == 0) return chunk <= live(now_);
        return chunk < total_chunks_ && nodes_[static_cast<std::size_t>(v)].have[static_cast<std::size_t>(chunk)];
    }

    void setup()
    {
        const int P = cfg_.peer_count();
        total_chunks_ = static_cast<long>(std::ceil(cfg_.sim_duration_s * cfg_.chunk_rate)) + 2L * cfg_.buffer_chunks + 16;
        nodes_.resize(static_cast<std::size_t>(P) + 1);
        auto& src = nodes_[0];
        src.up = cfg_.source_upload_mbps;
        src.down = cfg_.source_download_mbps;
        src.out_cap = cfg_.slot_cap(src.up);
        src.in_cap = 0;
        tracker_.register_node(0);
        int id = 1;
        int ldf_left = cfg_.strategy == FullStackStrategy::Mixed ? cfg_.ldf_peer_count : 0;
        for (std::size_t c = 0; c < cfg_.classes.size(); ++c)
            for (int j = 0; j < cfg_.classes[c].count; ++j, ++id) {
                auto& nd = nodes_[static_cast<std::size_t>(id)];
                nd.cls = static_cast<int>(c);
                nd.strong = cfg_.classes[c].name == cfg_.strong_class;
                nd.up = cfg_.classes[c].upload_mbps;
                nd.down = cfg_.classes[c].download_mbps;
                nd.out_cap = cfg_.slot_cap(nd.up);
                nd.in_cap = cfg_.slot_cap(nd.down);
                switch (cfg_.strategy) {
                case FullStackStrategy::PureEdf: nd.strategy = Strategy::EDF; break;
                case FullStackStrategy::PureLdf: nd.strategy = Strategy::LDF; break;
                case FullStackStrategy::Mixed:
                    nd.strategy = nd.strong && ldf_left > 0 ? Strategy::LDF : Strategy::EDF;
                    if (nd.strong && ldf_left > 0) --ldf_left;
                    break;
                }
            }
        for (auto& nd : nodes_) {
            nd.blacklist_until.assign(nodes_.size(), -1.0);
            nd.requested_to.assign(nodes_.size(), 0);
            nd.have.assign(static_cast<std::size_t>(total_chunks_), 0);
            nd.pending_conn.assign(static_cast<std::size_t>(total_chunks_), -1);
        }
        // random join order at a constant arrival rate
        std::vector<int> order(static_cast<std::size_t>(P));
        for (int i = 0; i < P; ++i) order[static_cast<std::size_t>(i)] = i + 1;
        std::shuffle(order.begin(), order.end(), rng_);
        for (int i = 0; i < P; ++i) push((i + 1) / cfg_.arrival_rate, Ev::Join, order[static_cast<std::size_t>(i)]);
        const double m0 = cfg_.last_join_time() + cfg_.stabilization_s;
        for (double t = m0; t <= cfg_.sim_duration_s + 1e-9; t += cfg_.measure_interval_s) push(t, Ev::Measure);
        profile_acc_.assign(static_cast<std::size_t>(cfg_.buffer_chunks), 0.0);
        in_degree_acc_.assign(cfg_.classes.size(), 0.0);
        in_degree_n_.assign(cfg_.classes.size(), 0);
    }

    void dispatch(Event& ev)
    {
        switch (ev.type) {
        case Ev::Join: on_join(ev.a); break;
        case Ev::TrackerReply: on_tracker_reply(ev.a, ev.list, ev.b); break;
        case Ev::TrackerRetry: request_tracker(ev.a); break;
        case Ev::ConnRequest: on_conn_request(ev.a, ev.b); break;
        case Ev::ConnReply: on_conn_reply(ev.a, ev.b, ev.c); break;
        case Ev::Tick: on_tick(ev.a); break;
        case Ev::ChunkRequest: on_chunk_request(ev.a, ev.list); break;
        case Ev::NegativeReply: on_negative(ev.a, ev.list); break;
        case Ev::TransferDone: on_transfer_done(ev.a); break;
        case Ev::ChunkArrive: on_chunk_arrive(ev.a, ev.b); break;
        case Ev::PlayStep: on_play_step(ev.a); break;
        case Ev::Measure: on_measure(); break;
        }
    }

    // --- mesh establishment -------------------------------------------------

    void on_join(int x) { request_tracker(x); }

    void request_tracker(int x)
    {
        auto& nd = nodes_[static_cast<std::size_t>(x)];
        if (nd.tracker_pending) return;
        nd.tracker_pending = true;
        ++out_.tracker_queries;
        // the query reaches the tracker after one latency; it samples candidates
        // then and replies after another
        const double at_tracker = now_ + cfg_.latency_s;
        auto pool = join_procedure(x, tracker_, cfg_.tracker_list_size, rng_).candidates;
        push(at_tracker + cfg_.latency_s, Ev::TrackerReply, x, static_cast<int>(live(at_tracker)), -1, std::move(pool));
    }

    void on_tracker_reply(int x, const std::vector<int>& list, long live_pos)
    {
        auto& nd = nodes_[static_cast<std::size_t>(x)];
        nd.tracker_pending = false;
        if (nd.contact_time < 0.0) {
            nd.contact_time = now_;
            nd.live_at_contact = live_pos;
            nd.play = live_pos;
            push(now_ + cfg_.buffer_len_s, Ev::PlayStep, x);
            push(now_, Ev::Tick, x);
        }
        nd.candidates = list;
        try_connect(x);
    }

    bool connected_from(int x, int y) const
    {
        for (int c : nodes_[static_cast<std::size_t>(x)].in_conns)
            if (conns_[static_cast<std::size_t>(c)].sender == y) return true;
        return false;
    }

    void try_connect(int x)
    {
        auto& nd = nodes_[static_cast<std::size_t>(x)];
        while (nd.open_requests < cfg_.max_parallel_connect &&
               static_cast<int>(nd.in_conns.size()) + nd.open_requests < nd.in_cap && !nd.candidates.empty()) {
            const int y = nd.candidates.front();
            nd.candidates.erase(nd.candidates.begin());
            if (y == x || nd.blacklist_until[static_cast<std::size_t>(y)] > now_ ||
                nd.requested_to[static_cast<std::size_t>(y)] || connected_from(x, y))
                continue;
            nd.requested_to[static_cast<std::size_t>(y)] = 1;
            ++nd.open_requests;
            push(now_ + cfg_.latency_s, Ev::ConnRequest, x, y);
        }
        if (nd.candidates.empty() && nd.open_requests == 0 && static_cast<int>(nd.in_conns.size()) < nd.in_cap &&
            !nd.tracker_pending)
            push(now_ + cfg_.tracker_retry_s, Ev::TrackerRetry, x);
    }

    void on_conn_request(int x, int y)
    {
        auto& acc = nodes_[static_cast<std::size_t>(y)];
        const bool strong_requester = nodes_[static_cast<std::size_t>(x)].strong;
        std::vector<bool> receivers_strong;
        for (int c : acc.out_conns)
            receivers_strong.push_back(nodes_[static_cast<std::size_t>(conns_[static_cast<std::size_t>(c)].receiver)].strong);
        const auto d = decide_connection_request(receivers_strong, acc.out_cap, strong_requester, cfg_.strong_replace_prob,
                                                 cfg_.random_replace_prob, rng_);
        int accepted = -1;
        if (d.victim >= 0) {
            close_connection(acc.out_conns[static_cast<std::size_t>(d.victim)]);
            ++out_.connection_replacements;
        }
        if (d.accept) accepted = open_connection(y, x);
        push(now_ + cfg_.latency_s, Ev::ConnReply, x, y, accepted);
    }

    int open_connection(int sender, int receiver)
    {
        Connection c;
        c.sender = sender;
        c.receiver = receiver;
        const auto& s = nodes_[static_cast<std::size_t>(sender)];
        const auto& r = nodes_[static_cast<std::size_t>(receiver)];
        const double rate = std::min(s.up / std::max(s.out_cap, 1), r.down / std::max(r.in_cap, 1)) * 1e6;
        c.seconds_per_chunk = cfg_.chunk_bits() / rate;
        conns_.push_back(std::move(c));
        const int id = static_cast<int>(conns_.size()) - 1;
        nodes_[static_cast<std::size_t>(sender)].out_conns.push_back(id);
        if (static_cast<int>(nodes_[static_cast<std::size_t>(sender)].out_conns.size()) > s.out_cap)
            out_.caps_respected = false;
        return id;
    }

    void close_connection(int id)
    {
        auto& c = conns_[static_cast<std::size_t>(id)];
        c.alive = false;
        c.queue.clear();
        auto erase = [](std::vector<int>& v, int val) { v.erase(std::remove(v.begin(), v.end(), val), v.end()); };
        erase(nodes_[static_cast<std::size_t>(c.sender)].out_conns, id);
        auto& r = nodes_[static_cast<std::size_t>(c.receiver)];
        const bool was_in = std::find(r.in_conns.begin(), r.in_conns.end(), id) != r.in_conns.end();
        erase(r.in_conns, id);
        for (int chunk : c.pending)
            if (r.pending_conn[static_cast<std::size_t>(chunk)] == id) r.pending_conn[static_cast<std::size_t>(chunk)] = -1;
        c.pending.clear();
        if (was_in) try_connect(c.receiver);
    }

    void on_conn_reply(int x, int y, int conn)
    {
        auto& nd = nodes_[static_cast<std::size_t>(x)];
        --nd.open_requests;
        nd.requested_to[static_cast<std::size_t>(y)] = 0;
        if (conn < 0) {
            nd.blacklist_until[static_cast<std::size_t>(y)] = now_ + cfg_.blacklist_s;
        } else if (conns_[static_cast<std::size_t>(conn)].alive) {
            nd.in_conns.push_back(conn);
            if (static_cast<int>(nd.in_conns.size()) > nd.in_cap) out_.caps_respected = false;
        }
        try_connect(x);
    }

    // --- scheduling -----------------------------------------------------------

    long window_start(const Node& nd) const { return nd.play; }

    long estimated_live(const Node& nd) const
    {
        return nd.live_at_contact + static_cast<long>(std::floor((now_ - nd.contact_time) * cfg_.chunk_rate + 1e-9));
    }

    void on_tick(int x)
    {
        auto& nd = nodes_[static_cast<std::size_t>(x)];
        const std::size_t deg = nd.in_conns.size();
        const double delay = deg > 0 ? cfg_.t_base / static_cast<double>(deg) : cfg_.t_base;
        push(now_ + delay, Ev::Tick, x);
        if (deg == 0) return;
        const long start = window_start(nd);
        const long end = std::min(start + cfg_.buffer_chunks - 1, estimated_live(nd));
        if (end < start) return;
        long lo, hi;
        if (nd.strategy == Strategy::EDF) {
            lo = start;
            hi = std::min(end, start + cfg_.req_win - 1);
        } else {
            hi = end;
            lo = std::max(start, end - cfg_.req_win + 1);
        }
        std::map<int, std::vector<int>> batches; // connection -> chunks
        int taken = 0;
        auto consider = [&](long ch) {
            const auto i = static_cast<std::size_t>(ch);
            if (ch >= total_chunks_ || nd.have[i] || nd.pending_conn[i] >= 0) return;
            const int conn = nd.in_conns[pick(deg)];
            nd.pending_conn[i] = conn;
            conns_[static_cast<std::size_t>(conn)].pending.push_back(static_cast<int>(ch));
            batches[conn].push_back(static_cast<int>(ch));
            ++taken;
        };
        if (nd.strategy == Strategy::EDF)
            for (long ch = lo; ch <= hi && taken < cfg_.req_win; ++ch) consider(ch);
        else
            for (long ch = hi; ch >= lo && taken < cfg_.req_win; --ch) consider(ch);
        for (auto& [conn, chunks] : batches) {
            nd.requests += static_cast<long>(chunks.size());
            nd.total_requests += static_cast<long>(chunks.size());
            out_.chunk_requests_sent += static_cast<long>(chunks.size());
            out_.chunk_requests_in_flight += static_cast<long>(chunks.size());
            push(now_ + cfg_.latency_s, Ev::ChunkRequest, conn, -1, -1, std::move(chunks));
        }
    }

    void on_chunk_request(int conn, const std::vector<int>& chunks)
    {
        out_.chunk_requests_received += static_cast<long>(chunks.size());
        out_.chunk_requests_in_flight -= static_cast<long>(chunks.size());
        auto& c = conns_[static_cast<std::size_t>(conn)];
        if (!c.alive) return; // pending entries were cleared when it closed
        std::vector<int> missing;
        for (int ch : chunks) {
            if (node_has(c.sender, ch))
                c.queue.push_back(ch);
            else
                missing.push_back(ch);
        }
        if (!missing.empty()) {
            out_.negative_replies += static_cast<long>(missing.size());
            push(now_ + cfg_.latency_s, Ev::NegativeReply, conn, -1, -1, std::move(missing));
        }
        start_transfer(conn);
    }

    void release_pending(Connection& c, Node& r, int chunk)
    {
        auto& pc = r.pending_conn[static_cast<std::size_t>(chunk)];
        if (pc >= 0 && &conns_[static_cast<std::size_t>(pc)] == &c) pc = -1;
        auto it = std::find(c.pending.begin(), c.pending.end(), chunk);
        if (it != c.pending.end()) c.pending.erase(it);
    }

    void on_negative(int conn, const std::vector<int>& chunks)
    {
        auto& c = conns_[static_cast<std::size_t>(conn)];
        if (!c.alive) return;
        auto& r = nodes_[static_cast<std::size_t>(c.receiver)];
        for (int ch : chunks) release_pending(c, r, ch);
    }

    void start_transfer(int conn)
    {
        auto& c = conns_[static_cast<std::size_t>(conn)];
        if (!c.alive || c.busy || c.queue.empty()) return;
        c.busy = true;
        push(now_ + c.seconds_per_chunk, Ev::TransferDone, conn);
    }

    void on_transfer_done(int conn)
    {
        auto& c = conns_[static_cast<std::size_t>(conn)];
        c.busy = false;
        if (!c.alive || c.queue.empty()) return;
        const int ch = c.queue.front();
        c.queue.pop_front();
        push(now_ + cfg_.latency_s, Ev::ChunkArrive, conn, ch);
        start_transfer(conn);
    }

    void on_chunk_arrive(int conn, int chunk)
    {
        auto& c = conns_[static_cast<std::size_t>(conn)];
        auto& r = nodes_[static_cast<std::size_t>(c.receiver)];
        r.have[static_cast<std::size_t>(chunk)] = 1;
        ++out_.deliveries;
        if (c.alive) release_pending(c, r, chunk);
    }

    // --- playback and measurement -----------------------------------------------

    void on_play_step(int x)
    {
        auto& nd = nodes_[static_cast<std::size_t>(x)];
        nd.playing = true;
        const bool hit = node_has(x, nd.play);
        if (measuring_) {
            ++nd.plays;
            ++nd.total_plays;
            if (hit) {
                ++nd.hits;
                ++nd.total_hits;
            }
        }
        ++nd.play;
        push(now_ + 1.0 / cfg_.chunk_rate, Ev::PlayStep, x);
    }

    void on_measure()
    {
        if (measuring_) {
            const double dt = now_ - measure_start_;
            for (std::size_t c = 0; c < cfg_.classes.size(); ++c) {
                long plays = 0, hits = 0, reqs = 0, peers = 0;
                double indeg = 0.0;
                for (std::size_t v = 1; v < nodes_.size(); ++v) {
                    const auto& nd = nodes_[v];
                    if (nd.cls != static_cast<int>(c)) continue;
                    plays += nd.plays;
                    hits += nd.hits;
                    reqs += nd.requests;
                    indeg += static_cast<double>(nd.in_conns.size());
                    ++peers;
                }
                if (peers == 0) continue;
                FullStackSample s;
                s.time = now_;
                s.peer_class = cfg_.classes[c].name;
                s.continuity = plays > 0 ? static_cast<double>(hits) / static_cast<double>(plays) : 0.0;
                s.requests_per_s = static_cast<double>(reqs) / static_cast<double>(peers) / dt;
                s.in_degree = indeg / static_cast<double>(peers);
                out_.samples.push_back(s);
                in_degree_acc_[c] += s.in_degree;
                ++in_degree_n_[c];
            }
        }
        // buffer occupancy profile of every playing peer at this instant
        if (measuring_)
            for (std::size_t v = 1; v < nodes_.size(); ++v) {
                const auto& nd = nodes_[v];
                if (!nd.playing) continue;
                for (int j = 0; j < cfg_.buffer_chunks; ++j)
                    if (node_has(static_cast<int>(v), nd.play + j))
                        profile_acc_[static_cast<std::size_t>(cfg_.buffer_chunks - 1 - j)] += 1.0;
                ++profile_samples_;
            }
        for (std::size_t v = 1; v < nodes_.size(); ++v) {
            auto& nd = nodes_[v];
            nd.plays = nd.hits = nd.requests = 0;
        }
        if (!measuring_) {
            measuring_ = true;
            for (std::size_t v = 1; v < nodes_.size(); ++v) nodes_[v].total_requests = 0;
        }
        measure_start_ = now_;
    }

    void finish()
    {
        if (!nodes_[0].out_conns.empty()) {
            int strong = 0;
            for (int c : nodes_[0].out_conns)
                if (nodes_[static_cast<std::size_t>(conns_[static_cast<std::size_t>(c)].receiver)].strong) ++strong;
            out_.source_strong_share = static_cast<double>(strong) / static_cast<double>(nodes_[0].out_conns.size());
        }
        long plays = 0, hits = 0, reqs = 0;
        long e_plays = 0, e_hits = 0, e_reqs = 0, e_n = 0;
        long l_plays = 0, l_hits = 0, l_reqs = 0, l_n = 0;
        std::map<std::string, std::pair<long, long>> by_class;
        for (std::size_t v = 1; v < nodes_.size(); ++v) {
            const auto& nd = nodes_[v];
            plays += nd.total_plays;
            hits += nd.total_hits;
            reqs += nd.total_requests;
            auto& bc = by_class[cfg_.classes[static_cast<std::size_t>(nd.cls)].name];
            bc.first += nd.total_hits;
            bc.second += nd.total_plays;
            if (nd.strategy == Strategy::EDF) {
                e_plays += nd.total_plays;
                e_hits += nd.total_hits;
                e_reqs += nd.total_requests;
                ++e_n;
            } else {
                l_plays += nd.total_plays;
                l_hits += nd.total_hits;
                l_reqs += nd.total_requests;
                ++l_n;
            }
        }
        const double m0 = cfg_.last_join_time() + cfg_.stabilization_s;
        const double last = m0 + std::floor((cfg_.sim_duration_s - m0) / cfg_.measure_interval_s + 1e-9) * cfg_.measure_interval_s;
        const double measured = std::max(last - m0, 1e-9);
        auto ratio = [](long a, long b) { return b > 0 ? static_cast<double>(a) / static_cast<double>(b) : 0.0; };
        const auto P = static_cast<double>(nodes_.size() - 1);
        out_.continuity = ratio(hits, plays);
        out_.continuity_edf_peers = ratio(e_hits, e_plays);
        out_.continuity_ldf_peers = ratio(l_hits, l_plays);
        out_.requests_per_s = static_cast<double>(reqs) / P / measured;
        out_.requests_per_s_edf_peers = e_n > 0 ? static_cast<double>(e_reqs) / static_cast<double>(e_n) / measured : 0.0;
        out_.requests_per_s_ldf_peers = l_n > 0 ? static_cast<double>(l_reqs) / static_cast<double>(l_n) / measured : 0.0;
        for (auto& [name, hp] : by_class) out_.continuity_by_class[name] = ratio(hp.first, hp.second);
        for (std::size_t c = 0; c < cfg_.classes.size(); ++c)
            if (in_degree_n_[c] > 0)
                out_.mean_in_degree_by_class[cfg_.classes[c].name] = in_degree_acc_[c] / static_cast<double>(in_degree_n_[c]);
        out_.buffer_profile.assign(static_cast<std::size_t>(cfg_.buffer_chunks), 0.0);
        if (profile_samples_ > 0)
            for (std::size_t i = 0; i < profile_acc_.size(); ++i)
                out_.buffer_profile[i] = profile_acc_[i] / static_cast<double>(profile_samples_);
    }
};

} // namespace detail

inline FullStackMetrics run_fullstack(const FullStackConfig& cfg) { return detail::FullStackSim(cfg).run(); }

} // namespace schedmix
