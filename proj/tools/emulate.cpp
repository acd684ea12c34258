// emulate: command-line driver for the emulation pipeline.

#include "emu/error.hpp"
#include "emu/log.hpp"
#include "emu/pipeline.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <omp.h>

#include <functional>
#include <iostream>
#include <map>

namespace {

void print_error(const std::string& command, const std::string& kind, const std::string& detail) {
    nlohmann::json j = {{"command", command}, {"error", kind}, {"detail", detail}};
    std::cerr << j.dump() << '\n';
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Train and evaluate neural emulators of daily simulator outputs"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<double> threshold;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> cluster;
    std::vector<std::string> bundles;
    int jobs = 0;
    bool quiet = false;

    using Command = std::function<emu::CommandResult(const emu::PipelineConfig&, const emu::CommandOptions&)>;
    const std::vector<std::tuple<std::string, std::string, Command>> commands = {
        {"synth", "Generate a synthetic run archive", emu::cmd_synth},
        {"ingest", "Load and validate run files; write a summary", emu::cmd_ingest},
        {"featurize", "Derive feature tables for every run", emu::cmd_featurize},
        {"cluster", "Build C_min matrices and cluster files per threshold", emu::cmd_cluster},
        {"train", "Train the network grid on a cluster", emu::cmd_train},
        {"report", "Evaluate bundles; write metrics and scatter data", emu::cmd_report},
        {"sweep", "Cluster, train and report for every threshold", emu::cmd_sweep},
    };

    std::map<CLI::App*, std::pair<std::string, Command>> by_app;
    for (const auto& [name, help, fn] : commands) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("-c,--config", config_path, "Pipeline config JSON")->required()->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "Override the top-level seed");
        sub->add_option("--jobs", jobs, "Worker cap (0 = all cores)")->check(CLI::NonNegativeNumber);
        sub->add_flag("-q,--quiet", quiet, "Suppress progress output");
        if (name == "cluster" || name == "train" || name == "report" || name == "sweep")
            sub->add_option("--threshold", threshold, "Use only this C_min threshold");
        if (name == "train" || name == "report" || name == "sweep")
            sub->add_option("--cluster", cluster, "Cluster id (default: largest cluster)");
        if (name == "report")
            sub->add_option("--bundle", bundles, "Bundle manifest to evaluate (repeatable)");
        by_app[sub] = {name, fn};
    }

    CLI11_PARSE(app, argc, argv);

    CLI::App* chosen = app.get_subcommands().front();
    const auto& [name, fn] = by_app.at(chosen);
    emu::log_quiet() = quiet;
    if (jobs > 0)
        omp_set_num_threads(jobs);

    try {
        emu::PipelineConfig config = emu::load_config(config_path);
        if (seed)
            config.seed = *seed;
        emu::CommandOptions options;
        options.threshold = threshold;
        options.cluster = cluster;
        options.jobs = jobs;
        for (const auto& b : bundles)
            options.bundles.emplace_back(b);
        const emu::CommandResult result = fn(config, options);
        if (!result.ok()) {
            nlohmann::json j = {{"command", name}, {"error", "PartialFailure"}, {"failures", result.failures}};
            std::cerr << j.dump() << '\n';
            return 1;
        }
        return 0;
    } catch (const emu::Error& e) {
        print_error(name, std::string(emu::to_string(e.kind())), e.detail());
        return 1;
    } catch (const std::exception& e) {
        print_error(name, "Internal", e.what());
        return 2;
    }
}
