#include "emu/eval.hpp"

#include "emu/error.hpp"
#include "emu/log.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <cmath>

namespace emu {

namespace {

std::string shortest(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

} // namespace

Metrics metrics(std::span<const double> truth, std::span<const double> pred) {
    if (truth.size() != pred.size())
        throw Error(ErrorKind::LengthMismatch,
                    std::to_string(truth.size()) + " true vs " + std::to_string(pred.size()) + " emulated values");
    if (truth.empty())
        throw Error(ErrorKind::Empty, "no values to score");
    Metrics m;
    m.n = truth.size();
    for (std::size_t i = 0; i < m.n; ++i) {
        const double e = pred[i] - truth[i];
        m.mse += e * e;
        m.mae += std::abs(e);
        m.bias += e;
    }
    const double n = static_cast<double>(m.n);
    m.mse /= n;
    m.mae /= n;
    m.bias /= n;
    return m;
}

double quantile(std::vector<double> values, double q) {
    if (values.empty())
        throw Error(ErrorKind::Empty, "quantile of empty sample");
    std::sort(values.begin(), values.end());
    const double h = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

HighValueReport high_value_diagnostics(std::span<const double> truth, std::span<const double> pred, double q) {
    if (truth.size() != pred.size())
        throw Error(ErrorKind::LengthMismatch, "true and emulated series differ in length");
    if (!(q >= 0.0 && q < 1.0))
        throw Error(ErrorKind::InvalidConfig, "high-value quantile must lie in [0, 1)");
    std::vector<double> nonzero;
    for (double v : truth)
        if (v != 0.0)
            nonzero.push_back(v);
    if (nonzero.empty())
        throw Error(ErrorKind::Empty, "no nonzero true values");
    HighValueReport r;
    r.quantile = q;
    r.cutoff = quantile(std::move(nonzero), q);
    std::vector<double> t, p;
    for (std::size_t i = 0; i < truth.size(); ++i)
        if (truth[i] != 0.0 && truth[i] >= r.cutoff) {
            t.push_back(truth[i]);
            p.push_back(pred[i]);
        }
    r.metrics = metrics(t, p);
    return r;
}

std::string scatter_csv(std::span<const double> truth, std::span<const double> pred, const std::string& variable) {
    if (truth.size() != pred.size())
        throw Error(ErrorKind::LengthMismatch, "true and emulated series differ in length");
    if (truth.empty()) {
        log_warn("scatter for '" + variable + "' has no rows");
        return "true,emulated\n";
    }
    const auto [tmin, tmax] = std::minmax_element(truth.begin(), truth.end());
    const auto [pmin, pmax] = std::minmax_element(pred.begin(), pred.end());
    std::string out = "# variable=" + variable + " identity_min=" + shortest(std::min(*tmin, *pmin)) +
                      " identity_max=" + shortest(std::max(*tmax, *pmax)) + "\n";
    out += "true,emulated\n";
    for (std::size_t i = 0; i < truth.size(); ++i) {
        out += shortest(truth[i]);
        out += ',';
        out += shortest(pred[i]);
        out += '\n';
    }
    return out;
}

const char* to_string(Units u) { return u == Units::scaled ? "scaled" : "physical"; }

Units parse_units(const std::string& s) {
    if (s == "scaled")
        return Units::scaled;
    if (s == "physical")
        return Units::physical;
    throw Error(ErrorKind::InvalidConfig, "units must be scaled or physical, got '" + s + "'");
}

EvaluatedSeries evaluate_series(const TrainedModel& model, const WindowSet& windows) {
    const nn::Matrix<double> pred = predict_windows(model, windows);
    EvaluatedSeries s;
    for (std::size_t k = 0; k < kNumOutputs; ++k) {
        const VariableRange& r = model.scaler.range(kOutputNames[k]);
        for (std::size_t i = 0; i < windows.size(); ++i) {
            const double t = windows.target(i, k);
            const double p = pred(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i));
            s.true_scaled[k].push_back(t);
            s.pred_scaled[k].push_back(p);
            s.true_physical[k].push_back(inverse_transform(t, r));
            s.pred_physical[k].push_back(inverse_transform(p, r));
        }
    }
    return s;
}

MetricsReport make_report(const TrainedModel& model, const EvaluatedSeries& series, SplitPart split, Units units,
                          double high_value_quantile) {
    MetricsReport r;
    r.threshold = model.threshold;
    r.cluster_id = model.cluster_id;
    r.split = split;
    r.units = units;
    for (std::size_t k = 0; k < kNumOutputs; ++k) {
        r.variables[k] = metrics(series.truth(k, units), series.pred(k, units));
        try {
            r.high_values[k] = high_value_diagnostics(series.truth(k, units), series.pred(k, units),
                                                      high_value_quantile);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::Empty)
                throw;
        }
    }
    return r;
}

std::string threshold_key(double threshold) {
    char buf[32];
    // Two decimals cover the usual thresholds; fall back to the shortest form otherwise.
    std::snprintf(buf, sizeof buf, "%.2f", threshold);
    if (std::strtod(buf, nullptr) == threshold)
        return buf;
    return shortest(threshold);
}

namespace {

nlohmann::json metrics_object(const Metrics& m) {
    return nlohmann::json{{"MSE", m.mse}, {"MAE", m.mae}, {"Bias", m.bias}};
}

} // namespace

nlohmann::json metrics_json(std::span<const MetricsReport> reports) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& r : reports) {
        nlohmann::json vars = nlohmann::json::object();
        for (std::size_t k = 0; k < kNumOutputs; ++k)
            vars[kOutputNames[k]] = metrics_object(r.variables[k]);
        j[threshold_key(r.threshold)] = std::move(vars);
    }
    return j;
}

nlohmann::json report_details_json(std::span<const MetricsReport> reports) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& r : reports) {
        nlohmann::json vars = nlohmann::json::object();
        for (std::size_t k = 0; k < kNumOutputs; ++k) {
            nlohmann::json v = metrics_object(r.variables[k]);
            v["n"] = r.variables[k].n;
            if (r.high_values[k]) {
                const auto& hv = *r.high_values[k];
                v["high_values"] = metrics_object(hv.metrics);
                v["high_values"]["n"] = hv.metrics.n;
                v["high_values"]["quantile"] = hv.quantile;
                v["high_values"]["cutoff"] = hv.cutoff;
            } else {
                v["high_values"] = nullptr;
            }
            vars[kOutputNames[k]] = std::move(v);
        }
        j[threshold_key(r.threshold)] = {{"threshold", r.threshold},
                                         {"cluster", r.cluster_id},
                                         {"split", to_string(r.split)},
                                         {"units", to_string(r.units)},
                                         {"bias", "mean(emulated - true)"},
                                         {"variables", std::move(vars)}};
    }
    return j;
}

} // namespace emu
