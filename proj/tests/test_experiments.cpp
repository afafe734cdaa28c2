#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "schedmix/experiments.hpp"

using namespace schedmix;
namespace fs = std::filesystem;

namespace {

class TempRoot : public ::testing::Test {
protected:
    void SetUp() override
    {
        root_ = fs::temp_directory_path() / ("schedmix_test_" + std::to_string(::getpid()) + "_" +
                                              ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::remove_all(root_);
        fs::create_directories(root_);
        ::setenv(kOutputRootEnv, root_.c_str(), 1);
    }
    void TearDown() override
    {
        ::unsetenv(kOutputRootEnv);
        fs::remove_all(root_);
    }
    fs::path root_;
};

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json mean_field_spec(const std::string& out)
{
    return {{"kind", "mean_field"},
            {"name", "t"},
            {"output_dir", out},
            {"parameters",
             {{"buffer_len", 10},
              {"peer_count", 200},
              {"contact_scale", 0.1},
              {"classes", json::array({{{"degree", 10}, {"share", 1.0}, {"strategy", "LDF"}}})}}}};
}

int run_cli(const std::string& args)
{
    const int rc = std::system((std::string(SCHEDMIX_CLI_PATH) + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

} // namespace

TEST(ParseSpec, Errors)
{
    auto expect_msg = [](const json& j, const std::string& needle) {
        try {
            parse_spec(j);
            FAIL() << "accepted " << j.dump();
        } catch (const InvalidParameter& e) {
            EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
        }
    };
    expect_msg(json::array(), "spec");
    expect_msg({{"name", "x"}}, "kind");
    expect_msg({{"kind", "teleport"}}, "teleport");
    expect_msg({{"kind", "stochastic"}}, "seeds");
    expect_msg({{"kind", "stochastic"}, {"seeds", {1, -2}}}, "seeds");
    expect_msg({{"kind", "game"}, {"workers", -1}}, "workers");
    expect_msg({{"kind", "game"}, {"parameters", 3}}, "parameters");
}

TEST(ParseSpec, RoundTrip)
{
    const json j = {{"kind", "stochastic"}, {"name", "a"}, {"seeds", {3, 1}}, {"output_dir", "o"}, {"workers", 2},
                    {"parameters", {{"buffer_len", 12}}}};
    EXPECT_EQ(spec_to_json(parse_spec(j)), j);
}

TEST(Merge, WeightedMeanAndSpread)
{
    const auto m = merge_replications({1.0, 3.0}, {1.0, 3.0});
    EXPECT_NEAR(m.mean, 2.5, 1e-15);
    EXPECT_NEAR(m.weight, 4.0, 1e-15);
    EXPECT_NEAR(m.stderr_, 1.0, 1e-15); // sd sqrt(2) over sqrt(2)
    EXPECT_NEAR(merge_replications({0.4}, {1.0}, 0.07).stderr_, 0.07, 1e-15);
    EXPECT_THROW(merge_replications({}, {}), InvalidParameter);
}

TEST(ParallelFor, ResultsIndependentOfWorkerCount)
{
    std::vector<int> a(37), b(37);
    parallel_for(37, 1, [&](std::size_t i) { a[i] = static_cast<int>(i * i); });
    parallel_for(37, 4, [&](std::size_t i) { b[i] = static_cast<int>(i * i); });
    EXPECT_EQ(a, b);
    EXPECT_THROW(parallel_for(4, 2, [](std::size_t i) { if (i == 2) throw DomainError("boom"); }), DomainError);
}

TEST_F(TempRoot, SuccessWritesManifestAndCsv)
{
    const auto rr = run_experiment(mean_field_spec("mf"));
    ASSERT_EQ(rr.exit_code, 0) << rr.message;
    const auto manifest = json::parse(slurp(root_ / "mf" / "manifest.json"));
    EXPECT_EQ(manifest["status"], "ok");
    EXPECT_EQ(manifest["software_version"], kVersion);
    EXPECT_TRUE(manifest.contains("wall_time_s"));
    EXPECT_TRUE(fs::exists(root_ / "mf" / "buffer_table.csv"));
    EXPECT_FALSE(fs::exists(root_ / "mf" / "FAILED"));
}

TEST_F(TempRoot, ManifestReplaysByteIdentically)
{
    json spec = {{"kind", "stochastic"},
                 {"output_dir", "a"},
                 {"seeds", {1, 2}},
                 {"workers", 2},
                 {"parameters",
                  {{"graph", {{"model", "ws"}, {"M", 200}, {"ring_degree", 6}, {"rewire_prob", 0.2}}},
                   {"buffer_len", 10},
                   {"horizon", 400},
                   {"burn_in", 100}}}};
    ASSERT_EQ(run_experiment(spec).exit_code, 0);
    auto manifest = json::parse(slurp(root_ / "a" / "manifest.json"));
    manifest["output_dir"] = "b";
    manifest["workers"] = 1;
    ASSERT_EQ(run_experiment(manifest).exit_code, 0);
    for (const auto& f : manifest["files"]) {
        const auto name = f.get<std::string>();
        EXPECT_EQ(slurp(root_ / "a" / name), slurp(root_ / "b" / name)) << name;
    }
}

TEST_F(TempRoot, ValidationFailureIsExitTwo)
{
    auto spec = mean_field_spec("bad");
    spec["parameters"]["classes"][0]["share"] = 0.5;
    const auto rr = run_experiment(spec);
    EXPECT_EQ(rr.exit_code, 2);
    EXPECT_FALSE(rr.message.empty());
    EXPECT_FALSE(fs::exists(root_ / "bad" / "manifest.json"));
}

TEST_F(TempRoot, SolverFailureIsExitThreeWithMarker)
{
    json spec = {{"kind", "mean_field"},
                 {"output_dir", "edf"},
                 {"parameters",
                  {{"buffer_len", 40},
                   {"peer_count", 1000},
                   {"contact_scale", 0.25},
                   {"classes", json::array({{{"degree", 25}, {"share", 0.85}, {"strategy", "EDF"}},
                                            {{"degree", 55}, {"share", 0.15}, {"strategy", "LDF"}}})}}}};
    const auto rr = run_experiment(spec);
    EXPECT_EQ(rr.exit_code, 3);
    EXPECT_TRUE(fs::exists(root_ / "edf" / "FAILED"));
    EXPECT_EQ(json::parse(slurp(root_ / "edf" / "manifest.json"))["status"], "failed");
}

TEST_F(TempRoot, IncompletePayoffTableFails)
{
    json spec = {{"kind", "game"}, {"output_dir", "g"}, {"parameters", {{"contact_scale", 0.25}}}};
    EXPECT_EQ(run_experiment(spec).exit_code, 3);
    EXPECT_TRUE(fs::exists(root_ / "g" / "payoff.csv"));
}

TEST_F(TempRoot, CliExitCodes)
{
    const auto good = root_ / "good.json";
    const auto bad = root_ / "bad.json";
    std::ofstream(good) << mean_field_spec("cli").dump();
    std::ofstream(bad) << R"({"kind": "stochastic"})";
    EXPECT_EQ(run_cli("run " + good.string()), 0);
    EXPECT_EQ(run_cli("run " + bad.string()), 2);
    EXPECT_EQ(run_cli("run " + (root_ / "missing.json").string()), 2);
    EXPECT_EQ(run_cli("list-recipes"), 0);
}

TEST(Recipes, AllExpandToValidSpecs)
{
    ASSERT_FALSE(recipes().empty());
    for (const auto& r : recipes()) {
        ExperimentSpec s;
        s.kind = ExperimentKind::FigureRecipe;
        s.parameters = {{"recipe", r.name}};
        s.output_dir = "x";
        const auto e = expand_recipe(s);
        EXPECT_NE(e.kind, ExperimentKind::FigureRecipe);
        EXPECT_EQ(e.output_dir, "x");
        EXPECT_NO_THROW(parse_spec(spec_to_json(e))) << r.name;
    }
    ExperimentSpec s;
    s.kind = ExperimentKind::FigureRecipe;
    s.parameters = {{"recipe", "nope"}};
    EXPECT_THROW(expand_recipe(s), InvalidParameter);
}

TEST(CompareBackends, RingLatticeWithoutContactsAgrees)
{
    const auto mf = parse_spec({{"kind", "mean_field"},
                                {"parameters",
                                 {{"buffer_len", 8},
                                  {"contact_scale", 0.0},
                                  {"classes", json::array({{{"degree", 4}, {"share", 1.0}}})}}}});
    const auto st = parse_spec({{"kind", "stochastic"},
                                {"seeds", {1}},
                                {"parameters",
                                 {{"graph", {{"model", "ws"}, {"M", 100}, {"ring_degree", 4}, {"rewire_prob", 0.0}}},
                                  {"buffer_len", 8},
                                  {"contact_scale", 0.0},
                                  {"strategies", {"pure_ldf"}},
                                  {"horizon", 300},
                                  {"burn_in", 100}}}});
    const auto rep = compare_backends(mf, st);
    EXPECT_EQ(rep.rows.size(), 8U);
    EXPECT_LT(rep.max_abs_diff, 1e-12);
    EXPECT_EQ(rep.mean_field_monotonicity_violations, 0);
    std::ostringstream os;
    write_comparison_csv(os, rep);
    const auto csv = os.str();
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 9);
}

TEST(CompareBackends, MismatchedConfigurationsRejected)
{
    const auto mf = parse_spec({{"kind", "mean_field"},
                                {"parameters", {{"buffer_len", 10}, {"classes", json::array({{{"degree", 4}, {"share", 1.0}}})}}}});
    const auto st = parse_spec({{"kind", "stochastic"}, {"seeds", {1}}, {"parameters", {{"buffer_len", 8}, {"strategies", {"mixed"}}}}});
    EXPECT_THROW(compare_backends(mf, st), InvalidParameter);
}
