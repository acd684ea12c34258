/**
 * @file training.hpp
 * @brief Supervised windows, mini-batch SGD with early stopping, grid sweeps
 *
 * A window ending on day t holds the feature rows t-lag+1..t of one run and
 * the scaled outputs of day t. GRU-FFNN consumes it as a lag-step sequence;
 * FFNN consumes the rows concatenated oldest-first. Hidden state starts at
 * zero for every window, so samples can be shuffled freely.
 */
#pragma once

#include "emu/clustering.hpp"
#include "emu/dataset.hpp"
#include "emu/features.hpp"
#include "emu/kernels.hpp"
#include "emu/nn.hpp"
#include "emu/scaling.hpp"
#include "emu/seed.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace emu {

enum class Precision { float32, float64 };

struct TrainingConfig {
    int lag_days = 14;
    int batch_size = 128;
    double learning_rate = 1e-3;
    int max_epochs = 200;
    int patience = 10;
    double min_delta = 1e-5;
    std::uint64_t seed = 0;
    /// Plain SGD when 0.
    double momentum = 0.0;
    /// Multiply the learning rate by lr_decay_factor every lr_decay_every epochs (0 = off).
    int lr_decay_every = 0;
    double lr_decay_factor = 1.0;
    Precision precision = Precision::float64;
    /// Worker cap for batch gradients (0 = OpenMP default).
    int threads = 0;

    void validate() const;
};

void to_json(nlohmann::json& j, const TrainingConfig& c);
void from_json(const nlohmann::json& j, TrainingConfig& c);

/// One run's slice for a split part, scaled and ready for windowing.
struct RunData {
    std::string run_id;
    FeatureTable features;
    std::array<std::vector<double>, kNumOutputs> targets;
    std::size_t rows() const { return features.rows(); }
};

struct WindowSample {
    std::vector<std::vector<double>> inputs; ///< lag rows, oldest first
    std::array<double, kNumOutputs> target{};
    std::string run_id;
    Date date;
};

/// Pooled windows over a set of runs; samples are (run, last-day) references.
class WindowSet {
public:
    struct Ref {
        std::size_t run;
        std::size_t end;
    };

    WindowSet() = default;
    WindowSet(std::vector<RunData> runs, int lag);

    int lag() const { return lag_; }
    std::size_t size() const { return refs_.size(); }
    bool empty() const { return refs_.empty(); }
    std::size_t feature_dim() const { return runs_.empty() ? 0 : runs_.front().features.cols(); }
    const std::vector<RunData>& runs() const { return runs_; }
    const Ref& ref(std::size_t i) const { return refs_[i]; }

    WindowSample sample(std::size_t i) const;
    double target(std::size_t i, std::size_t k) const { return runs_[refs_[i].run].targets[k][refs_[i].end]; }

    /// Network input for the given samples.
    template <typename T>
    nn::SequenceBatch<T> inputs(std::span<const std::size_t> indices, nn::Architecture arch) const;
    template <typename T>
    nn::Matrix<T> targets(std::span<const std::size_t> indices) const;

private:
    std::vector<RunData> runs_;
    std::vector<Ref> refs_;
    int lag_ = 1;
};

/// Scales the slices with `scaler` and builds windows. `runs[i]` and
/// `features[i]` must cover the same days. Throws RunTooShort.
WindowSet make_windows(std::span<const ModelRun> runs, std::span<const FeatureTable> features,
                       const ScalerParams& scaler, int lag);

/// Features, splits and a train-only scaler for a cluster of runs.
struct ClusterData {
    std::string cluster_id;
    double threshold = 0.0;
    FeatureSpec feature_spec;
    std::vector<std::string> feature_names;
    ScalerParams scaler;
    std::vector<ModelRun> train, validation, test;
    std::vector<FeatureTable> train_features, validation_features, test_features;

    WindowSet windows(SplitPart part, int lag) const;
};

/// Features are derived on each full run before slicing so that smoothing
/// state carries over split boundaries; every value stays causal.
ClusterData prepare_cluster(std::span<const ModelRun> runs, const FeatureSpec& features, const SplitSpec& split);

struct EpochRecord {
    int epoch = 0;
    double train_mse = 0.0;
    double val_mse = 0.0;
    bool operator==(const EpochRecord&) const = default;
};

std::string training_log_csv(const std::vector<EpochRecord>& log);

struct TrainedModel {
    nn::NetworkSpec spec;
    nn::Network<double> network;
    int lag = 1;
    TrainingConfig config;
    std::vector<EpochRecord> log;
    int best_epoch = 0;
    double best_val_mse = 0.0;
    // Context needed to predict from raw runs.
    ScalerParams scaler;
    FeatureSpec feature_spec;
    std::vector<std::string> feature_order;
    std::string cluster_id;
    double threshold = 0.0;
};

/// Sets the network's input_dim from the window shape.
nn::NetworkSpec resolve_input_dim(nn::NetworkSpec spec, std::size_t feature_dim, int lag);

/// Mean over samples and outputs of the squared error.
template <typename T>
double window_mse(const nn::Network<T>& net, const WindowSet& windows);

/// Scaled predictions, output_dim x windows.size().
nn::Matrix<double> predict_windows(const TrainedModel& model, const WindowSet& windows);

TrainedModel train(const WindowSet& train_set, const WindowSet& validation_set, nn::NetworkSpec spec,
                   const TrainingConfig& config);

/// TrainedModel with the cluster's scaler and feature context attached.
TrainedModel train_cluster(const ClusterData& data, const nn::NetworkSpec& spec, const TrainingConfig& config);

// ---------------------------------------------------------------------------
// Grid sweep
// ---------------------------------------------------------------------------

struct GridSpec {
    std::vector<nn::Architecture> architectures = {nn::Architecture::ffnn, nn::Architecture::gru_ffnn};
    std::vector<int> lags = {7, 14, 28};
    std::vector<int> recurrent_layers = {1, 3, 5, 7, 9};
    std::vector<int> ff_layers = {1, 3, 5, 7, 9};
    std::vector<int> recurrent_widths = {32, 64, 128, 256, 512};
    std::vector<int> ff_widths = {32, 64, 128, 256, 512, 1024};
    bool funnel = true;
    nn::CandidateResetMode reset_mode = nn::CandidateResetMode::standard;

    /// Every value set of the architecture design table.
    static GridSpec full_table();
};

void to_json(nlohmann::json& j, const GridSpec& g);
void from_json(const nlohmann::json& j, GridSpec& g);

struct GridCell {
    nn::NetworkSpec spec; ///< input_dim left at 1; resolved per cell
    int lag = 1;
    std::string label() const;
};

/// FFNN cells ignore the recurrent axes.
std::vector<GridCell> enumerate_grid(const GridSpec& grid);

} // namespace emu
