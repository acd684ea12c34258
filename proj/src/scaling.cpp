#include "emu/scaling.hpp"

#include "emu/error.hpp"

#include <algorithm>
#include <limits>

namespace emu {

const VariableRange& ScalerParams::range(const std::string& var) const {
    auto it = ranges.find(var);
    if (it == ranges.end())
        throw Error(ErrorKind::UnknownVariable, var);
    return it->second;
}

std::vector<std::string> ScalerParams::constant_variables() const {
    std::vector<std::string> out;
    for (const auto& [name, r] : ranges)
        if (r.constant())
            out.push_back(name);
    return out;
}

void to_json(nlohmann::json& j, const ScalerParams& params) {
    j = nlohmann::json::object();
    for (const auto& [name, r] : params.ranges)
        j[name] = {{"min", r.min}, {"max", r.max}};
}

void from_json(const nlohmann::json& j, ScalerParams& params) {
    params.ranges.clear();
    for (const auto& [name, v] : j.items())
        params.ranges[name] = {v.at("min").get<double>(), v.at("max").get<double>()};
}

VariableRange fit_range(std::span<const std::span<const double>> pooled, const std::string& name,
                        ConstantPolicy policy) {
    VariableRange r{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    std::size_t count = 0;
    for (const auto& part : pooled) {
        for (double x : part) {
            r.min = std::min(r.min, x);
            r.max = std::max(r.max, x);
        }
        count += part.size();
    }
    if (count == 0)
        throw Error(ErrorKind::NoTrainingData, "no training rows for " + name);
    if (r.constant() && policy == ConstantPolicy::error)
        throw Error(ErrorKind::ConstantVariable, name);
    return r;
}

ScalerParams fit_scaler(std::span<const FeatureTable> train_features, std::span<const OutputSeries> train_outputs,
                        ConstantPolicy policy) {
    ScalerParams params;
    if (!train_features.empty()) {
        const auto& names = train_features.front().names();
        for (const auto& t : train_features)
            if (t.names() != names)
                throw Error(ErrorKind::DimensionMismatch, "feature tables disagree on column names");
        for (std::size_t c = 0; c < names.size(); ++c) {
            VariableRange r{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
            std::size_t count = 0;
            for (const auto& t : train_features) {
                for (std::size_t i = 0; i < t.rows(); ++i) {
                    r.min = std::min(r.min, t.at(i, c));
                    r.max = std::max(r.max, t.at(i, c));
                }
                count += t.rows();
            }
            if (count == 0)
                throw Error(ErrorKind::NoTrainingData, "no training rows for " + names[c]);
            if (r.constant() && policy == ConstantPolicy::error)
                throw Error(ErrorKind::ConstantVariable, names[c]);
            params.ranges[names[c]] = r;
        }
    }
    for (std::size_t k = 0; k < kNumOutputs; ++k) {
        std::vector<std::span<const double>> pooled;
        for (const auto& o : train_outputs)
            pooled.push_back(o[k]);
        params.ranges[kOutputNames[k]] = fit_range(pooled, kOutputNames[k], policy);
    }
    return params;
}

double transform(double x, const std::string& var, const ScalerParams& params) {
    return transform(x, params.range(var));
}

double inverse_transform(double x_star, const std::string& var, const ScalerParams& params) {
    return inverse_transform(x_star, params.range(var));
}

void transform_table(FeatureTable& table, const ScalerParams& params) {
    for (std::size_t c = 0; c < table.cols(); ++c) {
        const VariableRange& r = params.range(table.names()[c]);
        for (std::size_t i = 0; i < table.rows(); ++i)
            table.at(i, c) = transform(table.at(i, c), r);
    }
}

} // namespace emu
