#include "emu/config.hpp"

#include "emu/error.hpp"

#include <algorithm>
#include <fstream>

namespace emu {

namespace {

void reject_unknown(const nlohmann::json& j, const std::vector<std::string>& known, const std::string& where) {
    if (!j.is_object())
        throw Error(ErrorKind::InvalidConfig, where + " must be an object");
    for (const auto& [k, v] : j.items())
        if (std::find(known.begin(), known.end(), k) == known.end())
            throw Error(ErrorKind::InvalidConfig, "unknown " + where + " key '" + k + "'");
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::filesystem::path& p) {
    return p.is_absolute() || base.empty() ? p : base / p;
}

} // namespace

void PipelineConfig::validate() const {
    if (version != kConfigVersion)
        throw Error(ErrorKind::InvalidConfig, "unsupported config version " + std::to_string(version));
    features.validate();
    split.validate();
    training.validate();
    synth.validate();
    if (clustering.thresholds.empty())
        throw Error(ErrorKind::InvalidConfig, "clustering.thresholds is empty");
    for (double t : clustering.thresholds)
        if (!(t > -1.0 && t <= 1.0))
            throw Error(ErrorKind::InvalidConfig, "thresholds must lie in (-1, 1]");
    if (!(report.high_value_quantile >= 0.0 && report.high_value_quantile < 1.0))
        throw Error(ErrorKind::InvalidConfig, "report.high_value_quantile must lie in [0, 1)");
    if (network)
        network->validate();
}

PipelineConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base) {
    reject_unknown(j,
                   {"version", "seed", "output_dir", "data_dir", "schema", "features", "split", "clustering", "grid",
                    "network", "training", "synth", "report"},
                   "config");
    if (!j.contains("version"))
        throw Error(ErrorKind::InvalidConfig, "missing required key 'version'");
    PipelineConfig c;
    try {
        c.version = j.at("version").get<int>();
        c.seed = j.value("seed", c.seed);
        if (j.contains("output_dir"))
            c.output_dir = resolve(base, j["output_dir"].get<std::string>());
        else
            c.output_dir = resolve(base, c.output_dir);
        if (j.contains("data_dir"))
            c.data_dir = resolve(base, j["data_dir"].get<std::string>());
        if (j.contains("schema"))
            c.schema = j["schema"].get<RunSchema>();
        if (j.contains("features"))
            c.features = j["features"].get<FeatureSpec>();
        if (j.contains("split"))
            c.split = j["split"].get<SplitSpec>();
        if (j.contains("clustering")) {
            const auto& cj = j["clustering"];
            reject_unknown(cj, {"thresholds", "mode", "window"}, "clustering");
            if (cj.contains("thresholds"))
                c.clustering.thresholds = cj["thresholds"].get<std::vector<double>>();
            if (cj.contains("mode"))
                c.clustering.mode = parse_cluster_mode(cj["mode"].get<std::string>());
            if (cj.contains("window")) {
                reject_unknown(cj["window"], {"first", "last"}, "clustering.window");
                c.clustering.window = DateRange{parse_date(cj["window"].at("first").get<std::string>()),
                                                parse_date(cj["window"].at("last").get<std::string>())};
            }
        }
        if (j.contains("grid"))
            c.grid = j["grid"].get<GridSpec>();
        if (j.contains("network"))
            c.network = j["network"].get<nn::NetworkSpec>();
        if (j.contains("training"))
            c.training = j["training"].get<TrainingConfig>();
        if (j.contains("synth"))
            c.synth = j["synth"].get<synth::SynthConfig>();
        if (j.contains("report")) {
            const auto& rj = j["report"];
            reject_unknown(rj, {"split", "units", "high_value_quantile"}, "report");
            if (rj.contains("split"))
                c.report.split = parse_split_part(rj["split"].get<std::string>());
            if (rj.contains("units"))
                c.report.units = parse_units(rj["units"].get<std::string>());
            c.report.high_value_quantile = rj.value("high_value_quantile", c.report.high_value_quantile);
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::InvalidConfig, e.what());
    }
    c.validate();
    return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorKind::Io, "cannot read config " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ParseError, path.string() + ": " + e.what());
    }
    return parse_config(j, path.parent_path());
}

nlohmann::json config_to_json(const PipelineConfig& c) {
    nlohmann::json clustering = {{"thresholds", c.clustering.thresholds},
                                 {"mode", to_string(c.clustering.mode)}};
    if (c.clustering.window)
        clustering["window"] = {{"first", format_date(c.clustering.window->first)},
                                {"last", format_date(c.clustering.window->last)}};
    nlohmann::json j = {{"version", c.version},
                        {"seed", c.seed},
                        {"output_dir", c.output_dir.string()},
                        {"schema", c.schema},
                        {"features", c.features},
                        {"split", c.split},
                        {"clustering", clustering},
                        {"grid", c.grid},
                        {"training", c.training},
                        {"synth", c.synth},
                        {"report", {{"split", to_string(c.report.split)},
                                    {"units", to_string(c.report.units)},
                                    {"high_value_quantile", c.report.high_value_quantile}}}};
    if (c.data_dir)
        j["data_dir"] = c.data_dir->string();
    if (c.network)
        j["network"] = *c.network;
    return j;
}

} // namespace emu
