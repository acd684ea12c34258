/**
 * @file eval.hpp
 * @brief Accuracy metrics, high-value diagnostics and scatter export
 *
 * Bias is mean(emulated - true): negative values mean under-prediction.
 */
#pragma once

#include "emu/dataset.hpp"
#include "emu/training.hpp"

#include <json.hpp>

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace emu {

struct Metrics {
    double mse = 0.0;
    double mae = 0.0;
    double bias = 0.0;
    std::size_t n = 0;
};

/// Throws LengthMismatch or Empty.
Metrics metrics(std::span<const double> truth, std::span<const double> pred);

/// Linear-interpolation sample quantile (R type 7) of a non-empty sample.
double quantile(std::vector<double> values, double q);

struct HighValueReport {
    double quantile = 0.0;
    double cutoff = 0.0; ///< true values >= cutoff are kept
    Metrics metrics;
};

/// Metrics over days whose true value is at least the `q` quantile of the
/// nonzero true values. q must lie in [0, 1). Throws Empty when nothing qualifies.
HighValueReport high_value_diagnostics(std::span<const double> truth, std::span<const double> pred, double q);

/// "true,emulated" rows preceded by a comment line carrying the identity-line range.
std::string scatter_csv(std::span<const double> truth, std::span<const double> pred, const std::string& variable);

enum class Units { scaled, physical };
const char* to_string(Units u);
Units parse_units(const std::string& s);

/// True and emulated outputs for every window, both scaled and physical.
struct EvaluatedSeries {
    std::array<std::vector<double>, kNumOutputs> true_scaled, pred_scaled;
    std::array<std::vector<double>, kNumOutputs> true_physical, pred_physical;

    const std::vector<double>& truth(std::size_t k, Units u) const {
        return u == Units::scaled ? true_scaled[k] : true_physical[k];
    }
    const std::vector<double>& pred(std::size_t k, Units u) const {
        return u == Units::scaled ? pred_scaled[k] : pred_physical[k];
    }
};

EvaluatedSeries evaluate_series(const TrainedModel& model, const WindowSet& windows);

struct MetricsReport {
    double threshold = 0.0;
    std::string cluster_id;
    SplitPart split = SplitPart::validation;
    Units units = Units::scaled;
    std::array<Metrics, kNumOutputs> variables;
    std::array<std::optional<HighValueReport>, kNumOutputs> high_values;
};

/// High-value diagnostics are skipped (left empty) for outputs with no qualifying days.
MetricsReport make_report(const TrainedModel& model, const EvaluatedSeries& series, SplitPart split, Units units,
                          double high_value_quantile);

/// Shortest decimal form used as the threshold key.
std::string threshold_key(double threshold);

/// {threshold: {variable: {MSE, MAE, Bias}}}
nlohmann::json metrics_json(std::span<const MetricsReport> reports);

/// Per-threshold metadata: cluster, split, units, n, bias convention, high-value diagnostics.
nlohmann::json report_details_json(std::span<const MetricsReport> reports);

} // namespace emu
