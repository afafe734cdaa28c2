// Command-line runner: run <spec.json>, list-recipes, compare <specA> <specB>.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "schedmix/schedmix.hpp"

namespace {

constexpr const char* kCsvHelp = R"(CSV columns per kind (every row ends with a seed or "analytic" tag):
  mean_field   buffer_table.csv: degree,strategy,buffer_index,p,theta,p_global,seed
  continuum    trajectory.csv: x,y1,y2,y,seed
  game         payoff.csv: weak_strategy,strong_strategy,u_weak,u_strong,global,valid,seed
  state_space  state_space.csv: M,n,R,a0,column_set_count,min_log_chi,max_log_chi,
               log_upsilon_lower,log_upsilon_upper,log_upsilon_exact,necessary_holds,sufficient_holds,seed
  stochastic   stochastic_<strategy>.csv: strategy,shifting,degree_class,buffer_index,probability,stderr,seed
               (degree_class is global/weak/strong for merged rows, a degree for per-seed rows)
  fullstack    fullstack_samples.csv: strategy,time,class,continuity,requests_per_s,in_degree,seed
               fullstack_buffer_profile.csv: strategy,buffer_index,probability,stderr,seed
  compare      comparison.csv: seed,degree,buffer_index,mean_field,simulated,abs_diff,stderr
Every run also writes manifest.json; it is itself a valid spec.
Output root: $SCHEDMIX_OUTPUT_ROOT (default: current directory).
Exit codes: 0 ok, 2 invalid spec, 3 solver failure (partial outputs plus FAILED).)";

nlohmann::json load_json(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw schedmix::InvalidParameter("cannot open " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw schedmix::InvalidParameter(path + ": " + e.what());
    }
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Chunk-scheduling laboratory for mesh-pull live streaming"};
    app.footer(kCsvHelp);
    app.require_subcommand(1);
    app.set_version_flag("--version", schedmix::kVersion);

    std::string spec_path;
    auto* run = app.add_subcommand("run", "run an experiment spec (JSON)");
    run->add_option("spec", spec_path, "spec file")->required();

    app.add_subcommand("list-recipes", "list the built-in figure recipes");

    std::string spec_a, spec_b, compare_out;
    auto* cmp = app.add_subcommand("compare", "mean field vs stochastic simulation on matched configurations");
    cmp->add_option("spec_a", spec_a, "first spec")->required();
    cmp->add_option("spec_b", spec_b, "second spec")->required();
    cmp->add_option("-o,--output", compare_out, "CSV destination (default: stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            const auto r = schedmix::run_experiment(load_json(spec_path));
            if (r.exit_code == 2) {
                std::cerr << "invalid spec: " << r.message << '\n';
            } else {
                std::cout << "outputs in " << r.directory.string() << '\n';
                if (r.exit_code == 3) std::cerr << "solver failure: " << r.message << '\n';
            }
            return r.exit_code;
        }
        if (app.got_subcommand("list-recipes")) {
            for (const auto& r : schedmix::recipes()) std::cout << r.name << "\t" << r.description << '\n';
            return 0;
        }
        if (cmp->parsed()) {
            auto a = schedmix::parse_spec(load_json(spec_a));
            auto b = schedmix::parse_spec(load_json(spec_b));
            if (a.kind != schedmix::ExperimentKind::MeanField) std::swap(a, b);
            const auto rep = schedmix::compare_backends(a, b);
            std::ofstream file;
            if (!compare_out.empty()) file.open(compare_out);
            schedmix::write_comparison_csv(compare_out.empty() ? std::cout : file, rep);
            std::cerr << "max |diff| " << rep.max_abs_diff << ", max z " << rep.max_z << ", monotonicity violations "
                      << rep.mean_field_monotonicity_violations << " (mean field) / "
                      << rep.simulated_monotonicity_violations << " (simulated)\n";
            return 0;
        }
    } catch (const schedmix::InvalidParameter& e) {
        std::cerr << "invalid spec: " << e.what() << '\n';
        return 2;
    } catch (const schedmix::Error& e) {
        std::cerr << "solver failure: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
