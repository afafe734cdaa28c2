#pragma once

// Experiment plumbing: a JSON spec with a "kind" discriminator is turned into
// a campaign (seed fan-out where the kind is stochastic), replications are
// merged, and everything lands in CSV files plus a JSON manifest.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "schedmix/common.hpp"
#include "schedmix/continuum.hpp"
#include "schedmix/degree_graph.hpp"
#include "schedmix/fullstack_sim.hpp"
#include "schedmix/game.hpp"
#include "schedmix/mean_field.hpp"
#include "schedmix/state_space.hpp"
#include "schedmix/stochastic_sim.hpp"

namespace schedmix {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kOutputRootEnv = "SCHEDMIX_OUTPUT_ROOT";

using json = nlohmann::json;

enum class ExperimentKind { MeanField, Continuum, Stochastic, Game, StateSpace, FullStack, FigureRecipe };

inline std::string_view to_string(ExperimentKind k)
{
    switch (k) {
    case ExperimentKind::MeanField: return "mean_field";
    case ExperimentKind::Continuum: return "continuum";
    case ExperimentKind::Stochastic: return "stochastic";
    case ExperimentKind::Game: return "game";
    case ExperimentKind::StateSpace: return "state_space";
    case ExperimentKind::FullStack: return "fullstack";
    default: return "figure_recipe";
    }
}

inline ExperimentKind parse_kind(std::string_view s)
{
    for (auto k : {ExperimentKind::MeanField, ExperimentKind::Continuum, ExperimentKind::Stochastic, ExperimentKind::Game,
                   ExperimentKind::StateSpace, ExperimentKind::FullStack, ExperimentKind::FigureRecipe})
        if (to_string(k) == s) return k;
    throw InvalidParameter("kind: unknown experiment kind '" + std::string(s) + "'");
}

inline bool is_stochastic(ExperimentKind k) { return k == ExperimentKind::Stochastic || k == ExperimentKind::FullStack; }

struct ExperimentSpec {
    ExperimentKind kind = ExperimentKind::MeanField;
    std::string name;
    json parameters = json::object();
    std::vector<std::uint64_t> seeds;
    std::string output_dir = "out";
    int workers = 0; // 0 = available parallelism
};

// --- parameter access --------------------------------------------------------

namespace detail {

template <class T>
T param(const json& p, const char* key, T fallback)
{
    if (!p.contains(key)) return fallback;
    try {
        return p.at(key).get<T>();
    } catch (const json::exception&) {
        throw InvalidParameter(std::string("parameters.") + key + ": wrong type");
    }
}

template <class T>
T param_required(const json& p, const char* key)
{
    if (!p.contains(key)) throw InvalidParameter(std::string("parameters.") + key + ": missing");
    return param<T>(p, key, T{});
}

} // namespace detail

inline ExperimentSpec parse_spec(const json& j)
{
    if (!j.is_object()) throw InvalidParameter("spec: expected a JSON object");
    if (!j.contains("kind") || !j["kind"].is_string()) throw InvalidParameter("kind: missing or not a string");
    ExperimentSpec s;
    s.kind = parse_kind(j["kind"].get<std::string>());
    s.name = j.value("name", std::string(to_string(s.kind)));
    if (j.contains("parameters")) {
        if (!j["parameters"].is_object()) throw InvalidParameter("parameters: expected an object");
        s.parameters = j["parameters"];
    }
    if (j.contains("seeds")) {
        if (!j["seeds"].is_array()) throw InvalidParameter("seeds: expected an array of integers");
        for (const auto& v : j["seeds"]) {
            if (!v.is_number_integer() || v.get<long long>() < 0)
                throw InvalidParameter("seeds: entries must be non-negative integers");
            s.seeds.push_back(v.get<std::uint64_t>());
        }
    }
    if (j.contains("output_dir")) {
        if (!j["output_dir"].is_string()) throw InvalidParameter("output_dir: expected a string");
        s.output_dir = j["output_dir"].get<std::string>();
    }
    s.workers = j.value("workers", 0);
    if (s.workers < 0) throw InvalidParameter("workers: must be >= 0");
    if (is_stochastic(s.kind) && s.seeds.empty()) throw InvalidParameter("seeds: must be non-empty for kind " + std::string(to_string(s.kind)));
    return s;
}

inline json spec_to_json(const ExperimentSpec& s)
{
    return json{{"kind", std::string(to_string(s.kind))},
                {"name", s.name},
                {"parameters", s.parameters},
                {"seeds", s.seeds},
                {"output_dir", s.output_dir},
                {"workers", s.workers}};
}

// --- replication merging -----------------------------------------------------

struct Merged {
    double mean = 0.0;
    double stderr_ = 0.0;
    double weight = 0.0;
};

/// Weighted mean of per-seed values; the standard error comes from the
/// spread across seeds, or from `fallback_se` when there is a single seed.
inline Merged merge_replications(const std::vector<double>& values, const std::vector<double>& weights,
                                 double fallback_se = 0.0)
{
    require(!values.empty() && values.size() == weights.size(), "merge: need matching non-empty inputs");
    Merged m;
    for (std::size_t i = 0; i < values.size(); ++i) {
        m.mean += weights[i] * values[i];
        m.weight += weights[i];
    }
    require(m.weight > 0.0, "merge: total weight must be positive");
    m.mean /= m.weight;
    const auto n = static_cast<double>(values.size());
    if (values.size() < 2) {
        m.stderr_ = fallback_se;
        return m;
    }
    double plain = 0.0;
    for (double v : values) plain += v;
    plain /= n;
    double ss = 0.0;
    for (double v : values) ss += (v - plain) * (v - plain);
    m.stderr_ = std::sqrt(ss / (n - 1.0) / n);
    return m;
}

/// Runs job(i) for i in [0, count) on a bounded pool. Results are written by
/// index, so merge order never depends on scheduling.
inline void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& job)
{
    std::size_t w = workers > 0 ? static_cast<std::size_t>(workers) : std::max(1U, std::thread::hardware_concurrency());
    w = std::min(w, count);
    if (w <= 1) {
        for (std::size_t i = 0; i < count; ++i) job(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex err_mu;
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < w; ++t)
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next++;
                if (i >= count) return;
                try {
                    job(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(err_mu);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

// --- campaign output ---------------------------------------------------------

struct ExperimentOutput {
    std::map<std::string, std::string> files; // file name -> content, CSVs only
    json summary = json::object();
    bool failed = false;
    std::string failure;
};

// --- builders from parameters ------------------------------------------------

inline SwarmGraph build_graph(const json& g, std::uint64_t seed)
{
    const auto model = detail::param<std::string>(g, "model", "ws");
    const auto M = detail::param<std::size_t>(g, "M", 2000);
    if (model == "ws")
        return generate_ws(M, detail::param<int>(g, "ring_degree", 10), detail::param<double>(g, "rewire_prob", 0.2), seed);
    if (model == "ba") return generate_ba(M, detail::param<int>(g, "m_attach", 5), seed);
    if (model == "er") return generate_er(M, detail::param<double>(g, "mean_degree", 10.0), seed);
    throw InvalidParameter("parameters.graph.model: unknown graph model '" + model + "'");
}

inline TwoDegreeSystem build_two_degree(const json& p)
{
    return TwoDegreeSystem::make(detail::param<int>(p, "k1", 25), detail::param<int>(p, "k2", 55),
                                 detail::param<double>(p, "pi1", 0.85), detail::param<double>(p, "peer_count", 1000.0),
                                 detail::param<double>(p, "contact_scale", 0.25));
}

inline MeanFieldConfig build_mean_field(const json& p)
{
    MeanFieldConfig cfg;
    cfg.buffer_len = detail::param<int>(p, "buffer_len", 40);
    cfg.peer_count = detail::param<double>(p, "peer_count", 1000.0);
    cfg.contact_scale = detail::param<double>(p, "contact_scale", 0.25);
    if (!p.contains("classes") || !p["classes"].is_array())
        throw InvalidParameter("parameters.classes: expected an array of {degree, share, strategy}");
    for (const auto& c : p["classes"])
        cfg.classes.push_back({detail::param_required<int>(c, "degree"), detail::param_required<double>(c, "share"),
                               parse_strategy(detail::param<std::string>(c, "strategy", "LDF"))});
    cfg.validate();
    return cfg;
}

inline std::vector<AssignmentRule> stochastic_rules(const json& p)
{
    const double q = detail::param<double>(p, "strong_quantile", 0.2);
    std::vector<std::string> names = detail::param<std::vector<std::string>>(p, "strategies", {"pure_ldf", "pure_edf", "mixed"});
    require(!names.empty(), "parameters.strategies: must not be empty");
    std::vector<AssignmentRule> out;
    for (const auto& n : names) out.push_back(parse_assignment(n, q));
    return out;
}

inline SimConfig build_sim_config(const json& p, SwarmGraph graph, const AssignmentRule& rule, std::uint64_t seed)
{
    SimConfig c;
    c.graph = std::move(graph);
    c.buffer_len = detail::param<int>(p, "buffer_len", 40);
    c.contact_scale = detail::param<double>(p, "contact_scale", 0.25);
    c.breakage_prob = detail::param<double>(p, "breakage_prob", 0.01);
    c.shifting = parse_shifting(detail::param<std::string>(p, "shifting", "deterministic"));
    c.assignment = rule;
    c.horizon = detail::param<long>(p, "horizon", 4000);
    c.burn_in = detail::param<long>(p, "burn_in", 2000);
    c.init_fill = detail::param<double>(p, "init_fill", 0.5);
    c.batches = detail::param<int>(p, "batches", 20);
    c.strong_quantile = detail::param<double>(p, "strong_quantile", 0.2);
    c.seed = seed;
    c.validate();
    return c;
}

inline FullStackConfig build_fullstack(const json& p)
{
    FullStackConfig c;
    if (p.contains("classes")) {
        c.classes.clear();
        for (const auto& k : p["classes"])
            c.classes.push_back({detail::param_required<std::string>(k, "name"), detail::param_required<int>(k, "count"),
                                 detail::param_required<double>(k, "upload_mbps"),
                                 detail::param_required<double>(k, "download_mbps")});
    }
    c.strong_class = detail::param<std::string>(p, "strong_class", c.strong_class);
    c.video_bitrate_kbps = detail::param<double>(p, "video_bitrate_kbps", c.video_bitrate_kbps);
    c.chunk_rate = detail::param<double>(p, "chunk_rate", c.chunk_rate);
    c.buffer_chunks = detail::param<int>(p, "buffer_chunks", c.buffer_chunks);
    c.buffer_len_s = detail::param<double>(p, "buffer_len_s", c.buffer_len_s);
    c.t_base = detail::param<double>(p, "t_base", c.t_base);
    c.req_win = detail::param<int>(p, "req_win", c.req_win);
    c.tracker_list_size = detail::param<int>(p, "tracker_list_size", c.tracker_list_size);
    c.max_parallel_connect = detail::param<int>(p, "max_parallel_connect", c.max_parallel_connect);
    c.blacklist_s = detail::param<double>(p, "blacklist_s", c.blacklist_s);
    c.strong_replace_prob = detail::param<double>(p, "strong_replace_prob", c.strong_replace_prob);
    c.random_replace_prob = detail::param<double>(p, "random_replace_prob", c.random_replace_prob);
    c.source_upload_mbps = detail::param<double>(p, "source_upload_mbps", c.source_upload_mbps);
    c.source_download_mbps = detail::param<double>(p, "source_download_mbps", c.source_download_mbps);
    c.ldf_peer_count = detail::param<int>(p, "ldf_peer_count", c.ldf_peer_count);
    c.arrival_rate = detail::param<double>(p, "arrival_rate", c.arrival_rate);
    c.latency_s = detail::param<double>(p, "latency_s", c.latency_s);
    c.tracker_retry_s = detail::param<double>(p, "tracker_retry_s", c.tracker_retry_s);
    c.stabilization_s = detail::param<double>(p, "stabilization_s", c.stabilization_s);
    c.measure_interval_s = detail::param<double>(p, "measure_interval_s", c.measure_interval_s);
    c.sim_duration_s = detail::param<double>(p, "sim_duration_s", c.sim_duration_s);
    c.validate();
    return c;
}

// --- per-kind campaigns --------------------------------------------------------

namespace detail {

inline void run_mean_field(const ExperimentSpec& s, ExperimentOutput& out)
{
    const auto cfg = build_mean_field(s.parameters);
    const auto solver = param<std::string>(s.parameters, "solver", "fixed_point");
    BufferTable t;
    if (solver == "fixed_point")
        t = solve_fixed_point(cfg);
    else if (solver == "full_state")
        t = integrate_full_rate_equation(cfg);
    else
        throw InvalidParameter("parameters.solver: expected fixed_point or full_state");
    std::ostringstream os;
    os.precision(12);
    os << "degree,strategy,buffer_index,p,theta,p_global,seed\n";
    for (std::size_t c = 0; c < t.p.size(); ++c)
        for (std::size_t i = 0; i < t.theta.size(); ++i)
            os << t.degrees[c] << ',' << to_string(cfg.classes[c].strategy) << ',' << i + 1 << ',' << t.p[c][i] << ','
               << t.theta[i] << ',' << t.p_global[i] << ",analytic\n";
    out.files["buffer_table.csv"] = os.str();
    const auto lat = startup_latency(cfg, t);
    out.summary["continuity"] = t.p_global.back();
    out.summary["iterations"] = t.iterations;
    out.summary["recurrence_residual"] = recurrence_residual(cfg, t);
    out.summary["startup_latency_global"] = lat.global;
    out.summary["startup_latency_global_normalized"] = lat.global_normalized;
    out.summary["latency_normalizer"] = "buffer_len * max_degree * contact_scale";
}

inline void run_continuum(const ExperimentSpec& s, ExperimentOutput& out)
{
    const auto sys = build_two_degree(s.parameters);
    const double n = param<double>(s.parameters, "buffer_len", 40.0);
    const auto weak = parse_strategy(param<std::string>(s.parameters, "weak", "EDF"));
    const auto strong = parse_strategy(param<std::string>(s.parameters, "strong", "LDF"));
    const auto tr = solve_profile(sys, weak, strong, n, param<double>(s.parameters, "step", kDefaultContinuumStep));
    std::ostringstream os;
    os.precision(12);
    os << "x,y1,y2,y,seed\n";
    for (std::size_t i = 0; i < tr.size(); ++i)
        os << tr.x[i] << ',' << tr.y1[i] << ',' << tr.y2[i] << ',' << tr.y[i] << ",analytic\n";
    out.files["trajectory.csv"] = os.str();
    out.summary["y1_end"] = tr.y1_end();
    out.summary["y2_end"] = tr.y2_end();
    out.summary["y_end"] = tr.y_end();
    out.summary["eps1"] = tr.eps1;
    out.summary["eps2"] = tr.eps2;
    if (auto x = weak_over_strong_crossover(tr)) out.summary["weak_over_strong_x"] = *x;
    if (weak == Strategy::LDF && strong == Strategy::LDF && s.parameters.contains("eps1")) {
        const double eps1 = param<double>(s.parameters, "eps1", 0.1);
        const auto req = ldf_buffer_requirement(sys, eps1, sys.p1_boundary);
        out.summary["buffer_requirement_n1"] = req.n1;
        out.summary["buffer_requirement_crossing"] = ldf_crossing_position(sys, eps1);
    }
}

inline void run_game(const ExperimentSpec& s, ExperimentOutput& out)
{
    const auto sys = build_two_degree(s.parameters);
    const int n = param<int>(s.parameters, "buffer_len", 40);
    const auto backend = parse_backend(param<std::string>(s.parameters, "backend", "mean_field"));
    const auto t = build_payoff_table(sys, n, backend);
    std::ostringstream os;
    os.precision(12);
    os << "weak_strategy,strong_strategy,u_weak,u_strong,global,valid,seed\n";
    json errors = json::array();
    for (const auto& row : t.cells)
        for (const auto& c : row) {
            os << to_string(c.weak) << ',' << to_string(c.strong) << ',';
            if (c.valid)
                os << c.u_weak << ',' << c.u_strong << ',' << c.global << ",1,analytic\n";
            else {
                os << ",,,0,analytic\n";
                errors.push_back(std::string(to_string(c.weak)) + "/" + std::string(to_string(c.strong)) + ": " + c.error);
            }
        }
    out.files["payoff.csv"] = os.str();
    out.summary["backend"] = std::string(to_string(backend));
    if (!t.complete()) {
        out.failed = true;
        out.failure = "payoff table incomplete: " + errors.dump();
        return;
    }
    json eq = json::array();
    for (const auto& e : nash_equilibria(t)) eq.push_back({std::string(to_string(e[0])), std::string(to_string(e[1]))});
    out.summary["nash_equilibria"] = eq;
    const auto opt = global_optimum(t);
    out.summary["global_optimum"] = {std::string(to_string(opt[0])), std::string(to_string(opt[1]))};
}

inline void run_state_space(const ExperimentSpec& s, ExperimentOutput& out)
{
    std::vector<ReductionInstance> instances;
    const auto a0s = param<std::vector<double>>(s.parameters, "a0", {1.0});
    if (s.parameters.contains("instances")) {
        for (const auto& j : s.parameters["instances"]) {
            ReductionInstance in;
            in.M = param_required<long long>(j, "M");
            in.n = param<int>(j, "n", 2);
            in.R = param_required<std::vector<long long>>(j, "R");
            for (double a : a0s) {
                in.a0 = a;
                instances.push_back(in);
            }
        }
    } else {
        // every composition of M <= M_max into positive parts
        const long long Mmax = param<long long>(s.parameters, "M_max", 4);
        const int n = param<int>(s.parameters, "n", 2);
        require(Mmax >= 2 && Mmax <= 8, "parameters.M_max: must lie in [2, 8]");
        std::function<void(long long, std::vector<long long>&, long long)> comp = [&](long long left, std::vector<long long>& cur,
                                                                                      long long M) {
            if (left == 0) {
                for (double a : a0s) instances.push_back({M, n, cur, a});
                return;
            }
            for (long long v = 1; v <= left; ++v) {
                cur.push_back(v);
                comp(left - v, cur, M);
                cur.pop_back();
            }
        };
        for (long long M = 2; M <= Mmax; ++M) {
            std::vector<long long> cur;
            comp(M, cur, M);
        }
    }
    std::ostringstream os;
    os.precision(12);
    os << "M,n,R,a0,column_set_count,min_log_chi,max_log_chi,log_upsilon_lower,log_upsilon_upper,log_upsilon_exact,"
          "necessary_holds,sufficient_holds,seed\n";
    long implication_violations = 0;
    for (const auto& in : instances) {
        const auto r = check_reduction_conditions(in);
        std::string R;
        for (std::size_t i = 0; i < in.R.size(); ++i) R += (i ? " " : "") + std::to_string(in.R[i]);
        os << in.M << ',' << in.n << ',' << R << ',' << in.a0 << ',' << r.column_set_count << ',' << r.min_log_chi << ','
           << r.max_log_chi << ',' << r.log_upsilon_lower << ',' << r.log_upsilon_upper << ',' << r.log_upsilon_exact << ','
           << r.necessary_holds << ',' << r.sufficient_holds << ",analytic\n";
        if (r.sufficient_holds && !r.necessary_holds) ++implication_violations;
    }
    out.files["state_space.csv"] = os.str();
    out.summary["instances"] = instances.size();
    out.summary["implication_violations"] = implication_violations;
}

inline void append_curve(std::ostringstream& os, const std::string& strategy, const std::string& shifting,
                         const std::string& cls, const std::vector<double>& p, const std::vector<double>& se,
                         const std::string& seed)
{
    for (std::size_t i = 0; i < p.size(); ++i)
        os << strategy << ',' << shifting << ',' << cls << ',' << i + 1 << ',' << p[i] << ',' << (i < se.size() ? se[i] : 0.0)
           << ',' << seed << '\n';
}

inline void run_stochastic(const ExperimentSpec& s, ExperimentOutput& out)
{
    const json graph_p = s.parameters.value("graph", json::object());
    const auto rules = stochastic_rules(s.parameters);
    const std::string shifting = param<std::string>(s.parameters, "shifting", "deterministic");
    // validate once up front so a bad field fails before any work
    build_sim_config(s.parameters, build_graph(graph_p, s.seeds.front()), rules.front(), s.seeds.front());

    const std::size_t S = s.seeds.size(), R = rules.size();
    std::vector<SimMetrics> res(S * R);
    parallel_for(S * R, s.workers, [&](std::size_t job) {
        const std::size_t si = job / R, ri = job % R;
        auto cfg = build_sim_config(s.parameters, build_graph(graph_p, s.seeds[si]), rules[ri], s.seeds[si]);
        res[job] = run_simulation(cfg);
    });

    json strat_summary = json::object();
    for (std::size_t ri = 0; ri < R; ++ri) {
        const std::string name = rules[ri].name();
        std::ostringstream os;
        os.precision(12);
        os << "strategy,shifting,degree_class,buffer_index,probability,stderr,seed\n";
        const std::size_t n = res[ri].buffer_prob_global.size();
        // merged curves: global, weak and strong group
        auto merge_curve = [&](auto get, auto get_se, auto weight) {
            std::vector<double> mean(n), se(n);
            for (std::size_t i = 0; i < n; ++i) {
                std::vector<double> v, w;
                double fse = 0.0;
                for (std::size_t si = 0; si < S; ++si) {
                    const auto& m = res[si * R + ri];
                    v.push_back(get(m)[i]);
                    w.push_back(weight(m));
                    fse = get_se(m)[i];
                }
                const auto mg = merge_replications(v, w, fse);
                mean[i] = mg.mean;
                se[i] = mg.stderr_;
            }
            return std::pair{mean, se};
        };
        const auto [g_mean, g_se] = merge_curve([](const SimMetrics& m) { return m.buffer_prob_global; },
                                                [](const SimMetrics& m) { return m.buffer_prob_global_stderr; },
                                                [](const SimMetrics& m) { return static_cast<double>(m.samples); });
        append_curve(os, name, shifting, "global", g_mean, g_se, "merged");
        for (int grp = 0; grp < 2; ++grp) {
            const auto [m_, s_] = merge_curve([grp](const SimMetrics& m) { return m.group_prob[grp]; },
                                              [grp](const SimMetrics& m) { return m.group_prob_stderr[grp]; },
                                              [grp](const SimMetrics& m) { return static_cast<double>(m.group_size[grp]); });
            append_curve(os, name, shifting, grp == 0 ? "weak" : "strong", m_, s_, "merged");
        }
        for (std::size_t si = 0; si < S; ++si) {
            const auto& m = res[si * R + ri];
            const std::string seed = std::to_string(s.seeds[si]);
            append_curve(os, name, shifting, "global", m.buffer_prob_global, m.buffer_prob_global_stderr, seed);
            for (std::size_t c = 0; c < m.degrees.size(); ++c)
                append_curve(os, name, shifting, std::to_string(m.degrees[c]), m.buffer_prob[c], m.buffer_prob_stderr[c], seed);
        }
        out.files["stochastic_" + name + ".csv"] = os.str();

        std::vector<double> cont, lat, w;
        double cont_se = 0.0;
        for (std::size_t si = 0; si < S; ++si) {
            const auto& m = res[si * R + ri];
            cont.push_back(m.continuity);
            lat.push_back(m.startup_latency_global_normalized);
            w.push_back(static_cast<double>(m.samples));
            cont_se = m.continuity_stderr;
        }
        const auto mc = merge_replications(cont, w, cont_se);
        const auto ml = merge_replications(lat, w);
        json js{{"continuity", mc.mean},
                {"continuity_stderr", mc.stderr_},
                {"startup_latency_global_normalized", ml.mean},
                {"startup_latency_global_normalized_stderr", ml.stderr_}};
        json per_seed = json::array();
        for (std::size_t si = 0; si < S; ++si) {
            const auto& m = res[si * R + ri];
            json e{{"seed", s.seeds[si]}, {"continuity", m.continuity}, {"ldf_fraction", m.ldf_fraction},
                   {"strong_threshold", m.strong_threshold}};
            if (auto x = weak_over_strong_index(m)) e["weak_over_strong_index"] = *x;
            per_seed.push_back(e);
        }
        js["per_seed"] = per_seed;
        strat_summary[name] = js;
    }
    out.summary["strategies"] = strat_summary;
    out.summary["shifting"] = shifting;
}

inline std::vector<FullStackStrategy> fullstack_strategies(const json& p)
{
    const auto names = param<std::vector<std::string>>(p, "strategies", {"pure_edf", "pure_ldf", "mixed"});
    require(!names.empty(), "parameters.strategies: must not be empty");
    std::vector<FullStackStrategy> out;
    for (const auto& n : names) out.push_back(parse_fullstack_strategy(n));
    return out;
}

inline void run_fullstack_kind(const ExperimentSpec& s, ExperimentOutput& out)
{
    const auto base = build_fullstack(s.parameters);
    const auto strategies = fullstack_strategies(s.parameters);
    const std::size_t S = s.seeds.size(), R = strategies.size();
    std::vector<FullStackMetrics> res(S * R);
    parallel_for(S * R, s.workers, [&](std::size_t job) {
        auto cfg = base;
        cfg.strategy = strategies[job % R];
        cfg.seed = s.seeds[job / R];
        res[job] = run_fullstack(cfg);
    });
    std::ostringstream samples, profile;
    samples.precision(12);
    profile.precision(12);
    samples << "strategy,time,class,continuity,requests_per_s,in_degree,seed\n";
    profile << "strategy,buffer_index,probability,stderr,seed\n";
    json summary = json::object();
    for (std::size_t ri = 0; ri < R; ++ri) {
        const std::string name(to_string(strategies[ri]));
        std::vector<double> cont, req, ones(S, 1.0);
        for (std::size_t si = 0; si < S; ++si) {
            const auto& m = res[si * R + ri];
            for (const auto& x : m.samples)
                samples << name << ',' << x.time << ',' << x.peer_class << ',' << x.continuity << ',' << x.requests_per_s
                        << ',' << x.in_degree << ',' << s.seeds[si] << '\n';
            cont.push_back(m.continuity);
            req.push_back(m.requests_per_s);
        }
        const std::size_t B = res[ri].buffer_profile.size();
        for (std::size_t i = 0; i < B; ++i) {
            std::vector<double> v;
            for (std::size_t si = 0; si < S; ++si) v.push_back(res[si * R + ri].buffer_profile[i]);
            const auto mg = merge_replications(v, ones);
            profile << name << ',' << i + 1 << ',' << mg.mean << ',' << mg.stderr_ << ",merged\n";
        }
        const auto mc = merge_replications(cont, ones);
        const auto mr = merge_replications(req, ones);
        json per_seed = json::array();
        for (std::size_t si = 0; si < S; ++si) {
            const auto& m = res[si * R + ri];
            per_seed.push_back({{"seed", s.seeds[si]},
                                {"continuity", m.continuity},
                                {"requests_per_s", m.requests_per_s},
                                {"continuity_edf_peers", m.continuity_edf_peers},
                                {"continuity_ldf_peers", m.continuity_ldf_peers},
                                {"requests_per_s_edf_peers", m.requests_per_s_edf_peers},
                                {"requests_per_s_ldf_peers", m.requests_per_s_ldf_peers},
                                {"mean_in_degree_by_class", m.mean_in_degree_by_class}});
        }
        summary[name] = {{"continuity", mc.mean},
                         {"continuity_stderr", mc.stderr_},
                         {"requests_per_s", mr.mean},
                         {"requests_per_s_stderr", mr.stderr_},
                         {"per_seed", per_seed}};
    }
    out.files["fullstack_samples.csv"] = samples.str();
    out.files["fullstack_buffer_profile.csv"] = profile.str();
    out.summary["strategies"] = summary;
}

} // namespace detail

// --- recipes -------------------------------------------------------------------

struct Recipe {
    std::string name;
    std::string description;
    std::function<ExperimentSpec()> build;
};

inline const std::vector<Recipe>& recipes()
{
    static const std::vector<Recipe> all = [] {
        std::vector<Recipe> r;
        auto stochastic = [](std::string name, json graph, std::string shifting) {
            ExperimentSpec s;
            s.kind = ExperimentKind::Stochastic;
            s.name = std::move(name);
            s.parameters = {{"graph", std::move(graph)}, {"buffer_len", 40}, {"contact_scale", 0.25},
                            {"shifting", std::move(shifting)}, {"strategies", {"pure_ldf", "pure_edf", "mixed"}}};
            s.seeds = {1, 2, 3, 4, 5};
            return s;
        };
        r.push_back({"ws_buffer_probabilities", "WS graph, M=5000, n=40, contact scale 0.25: pure LDF, pure EDF, mixed",
                     [=] {
                         return stochastic("ws_buffer_probabilities",
                                           {{"model", "ws"}, {"M", 5000}, {"ring_degree", 10}, {"rewire_prob", 0.2}},
                                           "deterministic");
                     }});
        r.push_back({"ws_buffer_probabilities_exp", "as ws_buffer_probabilities with exponential shifting", [=] {
                         return stochastic("ws_buffer_probabilities_exp",
                                           {{"model", "ws"}, {"M", 5000}, {"ring_degree", 10}, {"rewire_prob", 0.2}},
                                           "exponential");
                     }});
        r.push_back({"ba_buffer_probabilities", "BA graph, M=5000, n=40, contact scale 0.25: pure LDF, pure EDF, mixed", [=] {
                         return stochastic("ba_buffer_probabilities", {{"model", "ba"}, {"M", 5000}, {"m_attach", 5}},
                                           "deterministic");
                     }});
        r.push_back({"payoff_table", "scheduling game at n=40, k1=25, k2=55, pi1=0.85, M=1000", [] {
                         ExperimentSpec s;
                         s.kind = ExperimentKind::Game;
                         s.name = "payoff_table";
                         s.parameters = {{"k1", 25}, {"k2", 55}, {"pi1", 0.85}, {"peer_count", 1000},
                                         {"contact_scale", 0.25}, {"buffer_len", 40}, {"backend", "mean_field"}};
                         return s;
                     }});
        r.push_back({"ldf_vs_mixed_ode", "continuum trajectories, pure LDF vs mixed, two-degree system", [] {
                         ExperimentSpec s;
                         s.kind = ExperimentKind::Continuum;
                         s.name = "ldf_vs_mixed_ode";
                         s.parameters = {{"k1", 25}, {"k2", 55}, {"pi1", 0.85}, {"peer_count", 1000},
                                         {"contact_scale", 0.03}, {"buffer_len", 40}, {"weak", "EDF"}, {"strong", "LDF"}};
                         return s;
                     }});
        r.push_back({"homogeneous_ldf", "mean-field LDF on a single degree with contact scale 1/k", [] {
                         ExperimentSpec s;
                         s.kind = ExperimentKind::MeanField;
                         s.name = "homogeneous_ldf";
                         s.parameters = {{"buffer_len", 40}, {"peer_count", 1000}, {"contact_scale", 0.1},
                                         {"classes", json::array({{{"degree", 10}, {"share", 1.0}, {"strategy", "LDF"}}})}};
                         return s;
                     }});
        r.push_back({"state_space_small", "reduction conditions on every instance with M <= 4, n = 2", [] {
                         ExperimentSpec s;
                         s.kind = ExperimentKind::StateSpace;
                         s.name = "state_space_small";
                         s.parameters = {{"M_max", 4}, {"n", 2}, {"a0", {0.5, 1.0, 2.0}}};
                         return s;
                     }});
        r.push_back({"fullstack_default", "protocol-level simulation, 100 peers, pure EDF / pure LDF / mixed", [] {
                         ExperimentSpec s;
                         s.kind = ExperimentKind::FullStack;
                         s.name = "fullstack_default";
                         s.parameters = {{"strategies", {"pure_edf", "pure_ldf", "mixed"}}};
                         s.seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
                         return s;
                     }});
        return r;
    }();
    return all;
}

inline ExperimentSpec expand_recipe(const ExperimentSpec& s)
{
    const auto name = detail::param_required<std::string>(s.parameters, "recipe");
    for (const auto& r : recipes())
        if (r.name == name) {
            auto out = r.build();
            out.output_dir = s.output_dir;
            out.workers = s.workers;
            if (!s.seeds.empty()) out.seeds = s.seeds;
            return out;
        }
    throw InvalidParameter("parameters.recipe: unknown recipe '" + name + "'");
}

// --- running ---------------------------------------------------------------------

/// Executes the campaign in memory. Solver failures are captured in the
/// output (failed + failure) together with whatever files were produced.
inline ExperimentOutput compute_experiment(const ExperimentSpec& spec_in)
{
    const ExperimentSpec spec = spec_in.kind == ExperimentKind::FigureRecipe ? expand_recipe(spec_in) : spec_in;
    if (is_stochastic(spec.kind) && spec.seeds.empty())
        throw InvalidParameter("seeds: must be non-empty for kind " + std::string(to_string(spec.kind)));
    ExperimentOutput out;
    try {
        switch (spec.kind) {
        case ExperimentKind::MeanField: detail::run_mean_field(spec, out); break;
        case ExperimentKind::Continuum: detail::run_continuum(spec, out); break;
        case ExperimentKind::Stochastic: detail::run_stochastic(spec, out); break;
        case ExperimentKind::Game: detail::run_game(spec, out); break;
        case ExperimentKind::StateSpace: detail::run_state_space(spec, out); break;
        case ExperimentKind::FullStack: detail::run_fullstack_kind(spec, out); break;
        case ExperimentKind::FigureRecipe: break;
        }
    } catch (const InvalidParameter&) {
        throw;
    } catch (const Error& e) {
        out.failed = true;
        out.failure = e.what();
    }
    return out;
}

inline std::filesystem::path output_root()
{
    const char* env = std::getenv(kOutputRootEnv);
    return env && *env ? std::filesystem::path(env) : std::filesystem::current_path();
}

struct RunResult {
    int exit_code = 0;
    std::filesystem::path directory;
    std::string message;
};

/// Runs a spec and writes its CSVs and manifest.json. Exit codes: 0 success,
/// 2 validation failure, 3 solver failure (outputs so far kept, plus FAILED).
inline RunResult run_experiment(const json& raw)
{
    RunResult rr;
    ExperimentSpec spec;
    const auto t0 = std::chrono::steady_clock::now();
    ExperimentOutput out;
    try {
        spec = parse_spec(raw);
        out = compute_experiment(spec);
    } catch (const InvalidParameter& e) {
        rr.exit_code = 2;
        rr.message = e.what();
        return rr;
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::filesystem::path dir(spec.output_dir);
    if (dir.is_relative()) dir = output_root() / dir;
    std::filesystem::create_directories(dir);
    rr.directory = dir;
    json files = json::array();
    for (const auto& [name, content] : out.files) {
        std::ofstream(dir / name, std::ios::binary) << content;
        files.push_back(name);
    }
    json manifest = spec_to_json(spec);
    manifest["software_version"] = kVersion;
    manifest["wall_time_s"] = wall;
    manifest["files"] = files;
    manifest["summary"] = out.summary;
    manifest["status"] = out.failed ? "failed" : "ok";
    if (out.failed) {
        manifest["failure"] = out.failure;
        std::ofstream(dir / "FAILED") << out.failure << '\n';
        rr.exit_code = 3;
        rr.message = out.failure;
    } else if (std::filesystem::exists(dir / "FAILED")) {
        std::filesystem::remove(dir / "FAILED");
    }
    std::ofstream(dir / "manifest.json") << manifest.dump(2) << '\n';
    return rr;
}

// --- backend comparison ------------------------------------------------------------

struct ComparisonRow {
    std::uint64_t seed = 0;
    int degree = 0;
    int index = 0;
    double mean_field = 0.0;
    double simulated = 0.0;
    double abs_diff = 0.0;
    double stderr_ = 0.0;
};

struct ComparisonReport {
    std::vector<ComparisonRow> rows;
    long mean_field_monotonicity_violations = 0;
    long simulated_monotonicity_violations = 0; // beyond 3 standard errors
    double max_abs_diff = 0.0;
    double max_z = 0.0; // |diff| / stderr where stderr > 0
};

/// Mean field versus simulation on the same graph: the mean-field degree
/// distribution and strategy rule are taken from each seed's realized graph.
inline ComparisonReport compare_backends(const ExperimentSpec& mf, const ExperimentSpec& st)
{
    require(mf.kind == ExperimentKind::MeanField && st.kind == ExperimentKind::Stochastic,
            "compare: expected one mean_field and one stochastic spec");
    require(!st.seeds.empty(), "seeds: must be non-empty for kind stochastic");
    const int n = detail::param<int>(st.parameters, "buffer_len", 40);
    const double vs = detail::param<double>(st.parameters, "contact_scale", 0.25);
    if (detail::param<int>(mf.parameters, "buffer_len", 40) != n ||
        std::abs(detail::param<double>(mf.parameters, "contact_scale", 0.25) - vs) > 1e-15)
        throw InvalidParameter("compare: mismatched configurations (buffer_len / contact_scale)");
    const auto rules = stochastic_rules(st.parameters);
    if (rules.size() != 1) throw InvalidParameter("compare: the stochastic spec must name exactly one strategy");
    const json graph_p = st.parameters.value("graph", json::object());
    ComparisonReport rep;
    for (auto seed : st.seeds) {
        auto cfg = build_sim_config(st.parameters, build_graph(graph_p, seed), rules[0], seed);
        const auto strategies = assign_strategies(cfg.graph, rules[0]);
        std::map<int, Strategy> by_degree;
        for (NodeId v = 0; v < cfg.graph.node_count(); ++v) by_degree[cfg.graph.degree(v)] = strategies[v];
        const auto dist = empirical_degree_distribution(cfg.graph);
        const auto mcfg = make_mean_field_config(dist, n, static_cast<double>(cfg.graph.node_count()), vs,
                                                 [&](int k) { return by_degree.at(k); });
        const auto tab = solve_fixed_point(mcfg);
        const auto sim = run_simulation(cfg);
        for (std::size_t c = 0; c < sim.degrees.size(); ++c) {
            const auto it = std::find(tab.degrees.begin(), tab.degrees.end(), sim.degrees[c]);
            if (it == tab.degrees.end()) continue;
            const auto tc = static_cast<std::size_t>(it - tab.degrees.begin());
            for (int i = 0; i < n; ++i) {
                ComparisonRow r{seed, sim.degrees[c], i + 1, tab.p[tc][static_cast<std::size_t>(i)],
                                sim.buffer_prob[c][static_cast<std::size_t>(i)], 0.0,
                                sim.buffer_prob_stderr[c][static_cast<std::size_t>(i)]};
                r.abs_diff = std::abs(r.mean_field - r.simulated);
                rep.max_abs_diff = std::max(rep.max_abs_diff, r.abs_diff);
                if (r.stderr_ > 0.0) rep.max_z = std::max(rep.max_z, r.abs_diff / r.stderr_);
                rep.rows.push_back(r);
                if (i > 0) {
                    if (tab.p[tc][static_cast<std::size_t>(i)] < tab.p[tc][static_cast<std::size_t>(i - 1)] - 1e-12)
                        ++rep.mean_field_monotonicity_violations;
                    const double drop = sim.buffer_prob[c][static_cast<std::size_t>(i - 1)] - sim.buffer_prob[c][static_cast<std::size_t>(i)];
                    const double se = std::hypot(sim.buffer_prob_stderr[c][static_cast<std::size_t>(i - 1)],
                                                 sim.buffer_prob_stderr[c][static_cast<std::size_t>(i)]);
                    if (drop > 3.0 * se + 1e-12) ++rep.simulated_monotonicity_violations;
                }
            }
        }
    }
    return rep;
}

inline void write_comparison_csv(std::ostream& os, const ComparisonReport& r)
{
    os.precision(12);
    os << "seed,degree,buffer_index,mean_field,simulated,abs_diff,stderr\n";
    for (const auto& x : r.rows)
        os << x.seed << ',' << x.degree << ',' << x.index << ',' << x.mean_field << ',' << x.simulated << ',' << x.abs_diff
           << ',' << x.stderr_ << '\n';
}

} // namespace schedmix
