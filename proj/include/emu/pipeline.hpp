/**
 * @file pipeline.hpp
 * @brief Subcommands behind the command-line tool
 *
 * Output layout under PipelineConfig::output_dir:
 *
 *     runs/                         synthetic archive (default data_dir)
 *     ingest/summary.json
 *     features/<run>.csv
 *     clusters/<group>.matrix.csv
 *     clusters/clusters_<t>.json
 *     models/t<t>/<cluster>/<cell>.{json,bin,log.csv}
 *     models/t<t>/<cluster>/leaderboard.json
 *     report/metrics.json, report/report_details.json
 *     report/scatter_t<t>_<variable>.csv
 *
 * Every command throws emu::Error on failure.
 */
#pragma once

#include "emu/config.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace emu {

struct CommandOptions {
    /// Restricts the command to one threshold of the config.
    std::optional<double> threshold;
    /// Cluster to train/report; the largest cluster when unset.
    std::optional<std::string> cluster;
    /// Bundles to report on; the best cell per threshold when empty.
    std::vector<std::filesystem::path> bundles;
    /// Worker cap (0 = OpenMP default).
    int jobs = 0;
};

struct CommandResult {
    std::vector<std::filesystem::path> artifacts;
    /// Per-item failures that did not abort the command (e.g. grid cells).
    std::vector<std::string> failures;
    bool ok() const { return failures.empty(); }
};

struct ClusterEntry {
    std::string id; ///< g<group>-c<k>; singletons are one-member clusters
    std::string group;
    std::vector<std::string> runs;
};

struct ClusterFile {
    double threshold = 0.0;
    ClusterMode mode = ClusterMode::components;
    std::vector<ClusterEntry> entries;

    /// By id, or the largest cluster (first on ties). Throws UnknownCluster.
    const ClusterEntry& select(const std::optional<std::string>& id) const;
};

nlohmann::json to_json(const ClusterFile& f);
ClusterFile cluster_file_from_json(const nlohmann::json& j);

/// Throws NoRuns when the directory has no run files.
std::vector<ModelRun> load_pipeline_runs(const PipelineConfig& config);

/// Cluster files for each threshold from prebuilt matrices.
std::vector<ClusterFile> make_cluster_files(const std::map<GroupKey, MinCorrMatrix>& matrices,
                                            std::span<const double> thresholds, ClusterMode mode);

std::filesystem::path cluster_file_path(const PipelineConfig& config, double threshold);
std::filesystem::path model_dir(const PipelineConfig& config, double threshold, const std::string& cluster);

CommandResult cmd_synth(const PipelineConfig& config, const CommandOptions& options);
CommandResult cmd_ingest(const PipelineConfig& config, const CommandOptions& options);
CommandResult cmd_featurize(const PipelineConfig& config, const CommandOptions& options);
CommandResult cmd_cluster(const PipelineConfig& config, const CommandOptions& options);
CommandResult cmd_train(const PipelineConfig& config, const CommandOptions& options);
CommandResult cmd_report(const PipelineConfig& config, const CommandOptions& options);
/// cluster, train and report for every threshold.
CommandResult cmd_sweep(const PipelineConfig& config, const CommandOptions& options);

} // namespace emu
