/**
 * @file config.hpp
 * @brief Pipeline configuration document
 *
 * One JSON object drives every subcommand. `version` is required and
 * unknown keys are rejected at every level.
 */
#pragma once

#include "emu/clustering.hpp"
#include "emu/dataset.hpp"
#include "emu/eval.hpp"
#include "emu/features.hpp"
#include "emu/nn.hpp"
#include "emu/synth.hpp"
#include "emu/training.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <vector>

namespace emu {

inline constexpr int kConfigVersion = 1;

struct ClusteringConfig {
    std::vector<double> thresholds{0.95};
    ClusterMode mode = ClusterMode::components;
    /// C_min comparison window; the training split range when unset.
    std::optional<DateRange> window;
};

struct ReportConfig {
    SplitPart split = SplitPart::validation;
    Units units = Units::scaled;
    double high_value_quantile = 0.9;
};

struct PipelineConfig {
    int version = kConfigVersion;
    std::uint64_t seed = 0;
    std::filesystem::path output_dir = "out";
    /// Run CSV directory; <output_dir>/runs when unset.
    std::optional<std::filesystem::path> data_dir;
    RunSchema schema = RunSchema::identity(synth::forcing_names());
    FeatureSpec features;
    SplitSpec split;
    ClusteringConfig clustering;
    GridSpec grid;
    /// Single network; replaces the grid when set.
    std::optional<nn::NetworkSpec> network;
    TrainingConfig training;
    synth::SynthConfig synth = synth::SynthConfig::reference();
    ReportConfig report;

    std::filesystem::path runs_dir() const { return data_dir ? *data_dir : output_dir / "runs"; }
    void validate() const;
};

/// Relative paths in the document resolve against `base`.
PipelineConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base = {});
PipelineConfig load_config(const std::filesystem::path& path);
nlohmann::json config_to_json(const PipelineConfig& c);

} // namespace emu
