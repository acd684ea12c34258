#include "emu/pipeline.hpp"

#include "emu/bundle.hpp"
#include "emu/error.hpp"
#include "emu/log.hpp"
#include "emu/sweep.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace emu {

namespace {

void write_text(const std::filesystem::path& path, std::string_view text) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error(ErrorKind::Io, "cannot write " + path.string());
    out << text;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorKind::Io, "cannot read " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ParseError, path.string() + ": " + e.what());
    }
}

std::vector<double> selected_thresholds(const PipelineConfig& config, const CommandOptions& options) {
    if (options.threshold) {
        if (!(*options.threshold > -1.0 && *options.threshold <= 1.0))
            throw Error(ErrorKind::InvalidConfig, "threshold must lie in (-1, 1]");
        return {*options.threshold};
    }
    return config.clustering.thresholds;
}

std::string shortest(double v) {
    nlohmann::json j = v;
    return j.dump();
}

std::vector<ModelRun> runs_by_id(const std::vector<ModelRun>& all, const std::vector<std::string>& ids) {
    std::vector<ModelRun> out;
    for (const auto& id : ids) {
        auto it = std::find_if(all.begin(), all.end(), [&](const ModelRun& r) { return r.id == id; });
        if (it == all.end())
            throw Error(ErrorKind::NoRuns, "run '" + id + "' listed in the cluster file is missing");
        out.push_back(*it);
    }
    return out;
}

ClusterFile read_cluster_file(const PipelineConfig& config, double threshold) {
    const auto path = cluster_file_path(config, threshold);
    if (!std::filesystem::exists(path))
        throw Error(ErrorKind::Io, "no cluster file " + path.string() + "; run the cluster command first");
    return cluster_file_from_json(read_json(path));
}

} // namespace

// ============================================================================
// Cluster files
// ============================================================================

const ClusterEntry& ClusterFile::select(const std::optional<std::string>& id) const {
    if (entries.empty())
        throw Error(ErrorKind::UnknownCluster, "cluster file has no entries");
    if (id) {
        for (const auto& e : entries)
            if (e.id == *id)
                return e;
        throw Error(ErrorKind::UnknownCluster, "no cluster '" + *id + "' at threshold " + shortest(threshold));
    }
    const ClusterEntry* best = &entries.front();
    for (const auto& e : entries)
        if (e.runs.size() > best->runs.size())
            best = &e;
    return *best;
}

nlohmann::json to_json(const ClusterFile& f) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : f.entries)
        entries.push_back({{"id", e.id}, {"group", e.group}, {"runs", e.runs}});
    return {{"threshold", f.threshold}, {"mode", to_string(f.mode)}, {"clusters", entries}};
}

ClusterFile cluster_file_from_json(const nlohmann::json& j) {
    try {
        ClusterFile f;
        f.threshold = j.at("threshold").get<double>();
        f.mode = parse_cluster_mode(j.at("mode").get<std::string>());
        for (const auto& e : j.at("clusters"))
            f.entries.push_back({e.at("id").get<std::string>(), e.at("group").get<std::string>(),
                                 e.at("runs").get<std::vector<std::string>>()});
        return f;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ParseError, std::string("cluster file: ") + e.what());
    }
}

std::vector<ClusterFile> make_cluster_files(const std::map<GroupKey, MinCorrMatrix>& matrices,
                                            std::span<const double> thresholds, ClusterMode mode) {
    std::vector<ClusterFile> files;
    for (double t : thresholds) {
        ClusterFile f{t, mode, {}};
        std::size_t g = 0;
        for (const auto& [key, matrix] : matrices) {
            const ClusterSet set = extract_clusters(matrix, t, mode);
            const std::string prefix = "g" + std::to_string(g++);
            for (std::size_t k = 0; k < set.clusters.size(); ++k)
                f.entries.push_back({prefix + "-c" + std::to_string(k), key.label(), set.clusters[k]});
        }
        files.push_back(std::move(f));
    }
    return files;
}

std::filesystem::path cluster_file_path(const PipelineConfig& config, double threshold) {
    return config.output_dir / "clusters" / ("clusters_" + threshold_key(threshold) + ".json");
}

std::filesystem::path model_dir(const PipelineConfig& config, double threshold, const std::string& cluster) {
    return config.output_dir / "models" / ("t" + threshold_key(threshold)) / cluster;
}

std::vector<ModelRun> load_pipeline_runs(const PipelineConfig& config) {
    const auto dir = config.runs_dir();
    auto runs = load_runs(dir, config.schema);
    if (runs.empty())
        throw Error(ErrorKind::NoRuns, "no run files in " + dir.string());
    std::set<std::string> ids;
    for (const auto& r : runs)
        if (!ids.insert(r.id).second)
            throw Error(ErrorKind::InvalidConfig, "duplicate run id '" + r.id + "'");
    return runs;
}

// ============================================================================
// Commands
// ============================================================================

CommandResult cmd_synth(const PipelineConfig& config, const CommandOptions&) {
    synth::SynthConfig sc = config.synth;
    sc.seed = derive_seed(config.seed, "synth");
    const auto runs = synth::reference_runs(sc);
    const auto dir = config.runs_dir();
    synth::write_archive(runs, dir);
    CommandResult r;
    for (const auto& run : runs)
        r.artifacts.push_back(dir / (run.id + ".csv"));
    log_info("wrote " + std::to_string(runs.size()) + " runs to " + dir.string());
    return r;
}

CommandResult cmd_ingest(const PipelineConfig& config, const CommandOptions&) {
    const auto runs = load_pipeline_runs(config);
    nlohmann::json summary = nlohmann::json::array();
    for (const auto& run : runs) {
        std::vector<std::string> forcings;
        for (const auto& [name, v] : run.forcings)
            forcings.push_back(name);
        summary.push_back({{"id", run.id},
                           {"scenario", run.key},
                           {"group", GroupKey::of(run.key).label()},
                           {"first", format_date(run.start)},
                           {"last", format_date(run.last_date())},
                           {"days", run.num_days()},
                           {"forcings", forcings}});
    }
    CommandResult r;
    r.artifacts.push_back(config.output_dir / "ingest" / "summary.json");
    write_json(r.artifacts.back(), summary);
    return r;
}

CommandResult cmd_featurize(const PipelineConfig& config, const CommandOptions&) {
    const auto runs = load_pipeline_runs(config);
    const auto dir = config.output_dir / "features";
    std::vector<std::string> csv(runs.size());
    std::vector<std::exception_ptr> errors(runs.size());
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < runs.size(); ++i) {
        try {
            csv[i] = derive_features(runs[i], config.features).to_csv();
        } catch (...) {
            errors[i] = std::current_exception();
        }
    }
    for (const auto& e : errors)
        if (e)
            std::rethrow_exception(e);
    CommandResult r;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        r.artifacts.push_back(dir / (runs[i].id + ".csv"));
        write_text(r.artifacts.back(), csv[i]);
    }
    r.artifacts.push_back(dir / "feature_order.json");
    write_json(r.artifacts.back(), feature_names(config.features));
    return r;
}

CommandResult cmd_cluster(const PipelineConfig& config, const CommandOptions& options) {
    const auto runs = load_pipeline_runs(config);
    const auto thresholds = selected_thresholds(config, options);
    const auto matrices = build_matrices(runs, config.clustering.window.value_or(config.split.train));
    CommandResult r;
    std::size_t g = 0;
    for (const auto& [key, matrix] : matrices) {
        r.artifacts.push_back(config.output_dir / "clusters" / ("g" + std::to_string(g++) + ".matrix.csv"));
        write_text(r.artifacts.back(), matrix.to_csv());
    }
    for (const auto& f : make_cluster_files(matrices, thresholds, config.clustering.mode)) {
        r.artifacts.push_back(cluster_file_path(config, f.threshold));
        write_json(r.artifacts.back(), to_json(f));
        std::size_t clustered = 0;
        for (const auto& e : f.entries)
            clustered += e.runs.size() > 1 ? 1 : 0;
        log_info("threshold " + threshold_key(f.threshold) + ": " + std::to_string(clustered) + " clusters, " +
                 std::to_string(f.entries.size() - clustered) + " singletons");
    }
    return r;
}

CommandResult cmd_train(const PipelineConfig& config, const CommandOptions& options) {
    std::vector<GridCell> cells;
    if (config.network)
        cells.push_back({*config.network, config.training.lag_days});
    else
        cells = enumerate_grid(config.grid);
    if (cells.empty())
        throw Error(ErrorKind::EmptyGrid, "the grid has no cells");

    const auto runs = load_pipeline_runs(config);
    CommandResult result;
    for (double t : selected_thresholds(config, options)) {
        const ClusterFile file = read_cluster_file(config, t);
        const ClusterEntry& entry = file.select(options.cluster);
        const auto members = runs_by_id(runs, entry.runs);
        ClusterData data = prepare_cluster(members, config.features, config.split);
        data.cluster_id = entry.id;
        data.threshold = t;
        const auto dir = model_dir(config, t, entry.id);
        log_info("threshold " + threshold_key(t) + ": training on " + entry.id + " (" +
                 std::to_string(entry.runs.size()) + " runs, " + std::to_string(cells.size()) + " cells)");

        TrainingConfig tc = config.training;
        tc.seed = derive_seed(config.seed, "train/" + threshold_key(t) + "/" + entry.id);
        tc.threads = options.jobs;
        const auto rows = grid_sweep(data, cells, tc, [&](const SweepRow& row) {
            if (row.model) {
                const auto paths = save_bundle(*row.model, dir, row.label);
                write_text(dir / (row.label + ".log.csv"), training_log_csv(row.model->log));
                result.artifacts.push_back(paths.manifest);
            } else {
                result.failures.push_back(entry.id + "/" + row.label + ": " + row.error);
            }
        });
        result.artifacts.push_back(dir / "leaderboard.json");
        write_json(result.artifacts.back(), leaderboard_json(rows));
    }
    return result;
}

namespace {

std::filesystem::path best_bundle(const std::filesystem::path& dir) {
    const auto path = dir / "leaderboard.json";
    if (!std::filesystem::exists(path))
        throw Error(ErrorKind::Io, "no leaderboard in " + dir.string() + "; run the train command first");
    const nlohmann::json board = read_json(path);
    if (board.empty() || board.front().value("status", "") != "ok")
        throw Error(ErrorKind::Io, "no successfully trained cell in " + dir.string());
    return dir / (board.front().at("cell").get<std::string>() + ".json");
}

} // namespace

CommandResult cmd_report(const PipelineConfig& config, const CommandOptions& options) {
    std::vector<std::filesystem::path> bundles = options.bundles;
    if (bundles.empty())
        for (double t : selected_thresholds(config, options)) {
            const ClusterFile file = read_cluster_file(config, t);
            bundles.push_back(best_bundle(model_dir(config, t, file.select(options.cluster).id)));
        }

    const auto runs = load_pipeline_runs(config);
    std::vector<MetricsReport> reports;
    CommandResult result;
    const auto dir = config.output_dir / "report";
    for (const auto& path : bundles) {
        const TrainedModel model = load_bundle(path);
        const ClusterFile file = read_cluster_file(config, model.threshold);
        const ClusterEntry& entry = file.select(model.cluster_id);
        const auto members = runs_by_id(runs, entry.runs);
        ClusterData data = prepare_cluster(members, model.feature_spec, config.split);
        data.scaler = model.scaler;
        const WindowSet windows = data.windows(config.report.split, model.lag);
        const EvaluatedSeries series = evaluate_series(model, windows);
        reports.push_back(make_report(model, series, config.report.split, config.report.units,
                                      config.report.high_value_quantile));
        for (std::size_t k = 0; k < kNumOutputs; ++k) {
            result.artifacts.push_back(dir / ("scatter_t" + threshold_key(model.threshold) + "_" +
                                              kOutputNames[k] + ".csv"));
            write_text(result.artifacts.back(),
                       scatter_csv(series.true_physical[k], series.pred_physical[k], kOutputNames[k]));
        }
    }
    result.artifacts.push_back(dir / "metrics.json");
    write_json(result.artifacts.back(), metrics_json(reports));
    result.artifacts.push_back(dir / "report_details.json");
    write_json(result.artifacts.back(), report_details_json(reports));
    return result;
}

CommandResult cmd_sweep(const PipelineConfig& config, const CommandOptions& options) {
    CommandResult result = cmd_cluster(config, options);
    CommandResult trained = cmd_train(config, options);
    result.artifacts.insert(result.artifacts.end(), trained.artifacts.begin(), trained.artifacts.end());
    result.failures = trained.failures;
    CommandResult reported = cmd_report(config, options);
    result.artifacts.insert(result.artifacts.end(), reported.artifacts.begin(), reported.artifacts.end());
    return result;
}

} // namespace emu
