#include <string>
#include <vector>

#include <CLI11.hpp>

#include "clove/experiment.hpp"

int main(int argc, char** argv) {
    CLI::App app{"clove - clustered federated learning simulator"};
    app.require_subcommand(1);

    std::string config_path, out_dir, param;
    std::vector<double> values;
    int jobs = 1;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("config", config_path, "experiment config JSON")->required();
        cmd->add_option("--out", out_dir, "output directory (overrides config)");
        cmd->add_option("--jobs", jobs, "parallel worker count")->check(CLI::PositiveNumber);
    };

    CLI::App* run = app.add_subcommand("run", "run the configured experiment per seed");
    add_common(run);

    CLI::App* sweep = app.add_subcommand("sweep", "rerun the experiment over a parameter grid");
    add_common(sweep);
    sweep->add_option("--param", param,
                      "one of: delta, sigma, clients_per_cluster, samples_per_client, "
                      "participation_fraction")
        ->required();
    sweep->add_option("--values", values, "comma-separated list of values")
        ->required()
        ->delimiter(',');

    CLI::App* ablate = app.add_subcommand(
        "ablate", "run default, no-matching, agglomerative and sqrt-loss variants");
    add_common(ablate);

    CLI11_PARSE(app, argc, argv);

    if (run->parsed()) return clove::cmd_run(config_path, out_dir, jobs);
    if (sweep->parsed()) return clove::cmd_sweep(config_path, param, values, out_dir, jobs);
    return clove::cmd_ablate(config_path, out_dir, jobs);
}
