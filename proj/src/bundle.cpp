#include "emu/bundle.hpp"

#include "emu/error.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace emu {

namespace {

static_assert(std::endian::native == std::endian::little, "bundle weights are written in native little-endian order");

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in)
        throw Error(ErrorKind::Io, "cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& p, std::string_view bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error(ErrorKind::Io, "cannot write " + p.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw Error(ErrorKind::Io, "write failed for " + p.string());
}

} // namespace

std::string fnv1a64_hex(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

BundlePaths bundle_paths(const std::filesystem::path& dir, const std::string& name) {
    return {dir / (name + ".json"), dir / (name + ".bin")};
}

BundlePaths save_bundle(const TrainedModel& model, const std::filesystem::path& dir, const std::string& name) {
    std::filesystem::create_directories(dir);
    const BundlePaths paths = bundle_paths(dir, name);
    const auto params = model.network.params();
    std::string bytes(params.size() * sizeof(double), '\0');
    std::memcpy(bytes.data(), params.data(), bytes.size());

    nlohmann::json blocks = nlohmann::json::array();
    for (const auto& b : model.network.blocks())
        blocks.push_back({{"name", b.name}, {"shape", {b.rows, b.cols}}, {"offset", b.offset}});
    nlohmann::json log = nlohmann::json::array();
    for (const auto& e : model.log)
        log.push_back({{"epoch", e.epoch}, {"train_mse", e.train_mse}, {"val_mse", e.val_mse}});

    nlohmann::json j = {
        {"format_version", kBundleFormatVersion},
        {"network", model.spec},
        {"blocks", blocks},
        {"weights", {{"file", paths.weights.filename().string()},
                     {"dtype", "float64"},
                     {"byte_order", "little"},
                     {"count", params.size()},
                     {"checksum", "fnv1a64:" + fnv1a64_hex(bytes)}}},
        {"lag_days", model.lag},
        {"cluster_id", model.cluster_id},
        {"threshold", model.threshold},
        {"scaler", model.scaler},
        {"features", model.feature_spec},
        {"feature_order", model.feature_order},
        {"training", model.config},
        {"best_epoch", model.best_epoch},
        {"best_val_mse", model.best_val_mse},
        {"log", log},
    };
    write_file(paths.weights, bytes);
    write_file(paths.manifest, j.dump(2) + "\n");
    return paths;
}

TrainedModel load_bundle(const std::filesystem::path& manifest) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(manifest));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ParseError, manifest.string() + ": " + e.what());
    }
    const int version = j.value("format_version", -1);
    if (version != kBundleFormatVersion)
        throw Error(ErrorKind::BundleVersionMismatch, "format_version " + std::to_string(version) + ", expected " +
                                                          std::to_string(kBundleFormatVersion));
    try {
        TrainedModel m;
        m.spec = j.at("network").get<nn::NetworkSpec>();
        m.network = nn::Network<double>(m.spec);
        const auto& w = j.at("weights");
        if (w.at("dtype") != "float64" || w.at("byte_order") != "little")
            throw Error(ErrorKind::BundleVersionMismatch, "unsupported weight encoding");
        const auto count = w.at("count").get<std::size_t>();
        if (count != m.network.num_params())
            throw Error(ErrorKind::BundleVersionMismatch, "weight count does not match the network layout");
        const auto& blocks = j.at("blocks");
        const auto& expected = m.network.blocks();
        if (blocks.size() != expected.size())
            throw Error(ErrorKind::BundleVersionMismatch, "parameter block list does not match the network layout");
        for (std::size_t i = 0; i < expected.size(); ++i) {
            const auto& b = blocks[i];
            if (b.at("name") != expected[i].name || b.at("offset").get<std::size_t>() != expected[i].offset ||
                b.at("shape")[0].get<Eigen::Index>() != expected[i].rows ||
                b.at("shape")[1].get<Eigen::Index>() != expected[i].cols)
                throw Error(ErrorKind::BundleVersionMismatch, "block " + expected[i].name + " differs from layout");
        }
        const std::string bytes = read_file(manifest.parent_path() / w.at("file").get<std::string>());
        if (bytes.size() != count * sizeof(double))
            throw Error(ErrorKind::BundleVersionMismatch, "weight file has the wrong size");
        if (w.at("checksum").get<std::string>() != "fnv1a64:" + fnv1a64_hex(bytes))
            throw Error(ErrorKind::BundleVersionMismatch, "weight checksum mismatch");
        std::memcpy(m.network.params().data(), bytes.data(), bytes.size());

        m.lag = j.at("lag_days").get<int>();
        m.cluster_id = j.at("cluster_id").get<std::string>();
        m.threshold = j.at("threshold").get<double>();
        m.scaler = j.at("scaler").get<ScalerParams>();
        m.feature_spec = j.at("features").get<FeatureSpec>();
        m.feature_order = j.at("feature_order").get<std::vector<std::string>>();
        m.config = j.at("training").get<TrainingConfig>();
        m.best_epoch = j.at("best_epoch").get<int>();
        m.best_val_mse = j.at("best_val_mse").get<double>();
        for (const auto& e : j.at("log"))
            m.log.push_back({e.at("epoch").get<int>(), e.at("train_mse").get<double>(), e.at("val_mse").get<double>()});
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ParseError, manifest.string() + ": " + e.what());
    }
}

} // namespace emu
