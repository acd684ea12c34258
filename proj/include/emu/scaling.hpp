/**
 * @file scaling.hpp
 * @brief Min-max scaling fitted on training rows only
 */
#pragma once

#include "emu/features.hpp"

#include <json.hpp>

#include <map>
#include <span>
#include <string>
#include <vector>

namespace emu {

struct VariableRange {
    double min = 0.0;
    double max = 0.0;
    bool constant() const { return !(max > min); }
    bool operator==(const VariableRange&) const = default;
};

/// Per-variable training extremes. Constant variables are kept (min == max)
/// and transform them to 0.
struct ScalerParams {
    std::map<std::string, VariableRange> ranges;

    const VariableRange& range(const std::string& var) const;
    std::vector<std::string> constant_variables() const;
    bool operator==(const ScalerParams&) const = default;
};

void to_json(nlohmann::json& j, const ScalerParams& params);
void from_json(const nlohmann::json& j, ScalerParams& params);

enum class ConstantPolicy {
    flag,  ///< record and map to 0
    error, ///< throw ConstantVariable
};

/// Training outputs of one run, in kOutputNames order.
using OutputSeries = std::array<std::span<const double>, kNumOutputs>;

/// Pools every training row of every table/run. Tables must share column names.
ScalerParams fit_scaler(std::span<const FeatureTable> train_features, std::span<const OutputSeries> train_outputs,
                        ConstantPolicy policy = ConstantPolicy::flag);

/// Fits a single variable from pooled values.
VariableRange fit_range(std::span<const std::span<const double>> pooled, const std::string& name,
                        ConstantPolicy policy = ConstantPolicy::flag);

double transform(double x, const std::string& var, const ScalerParams& params);
double inverse_transform(double x_star, const std::string& var, const ScalerParams& params);

inline double transform(double x, const VariableRange& r) {
    return r.constant() ? 0.0 : (x - r.min) / (r.max - r.min);
}
inline double inverse_transform(double x_star, const VariableRange& r) {
    return r.constant() ? r.min : x_star * (r.max - r.min) + r.min;
}

/// Scales every column of `table` in place by name.
void transform_table(FeatureTable& table, const ScalerParams& params);

} // namespace emu
