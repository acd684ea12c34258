#include "emu/bundle.hpp"

#include "helpers.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

using namespace emu;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void spit(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << text;
}

TrainedModel small_model() {
    std::vector<ModelRun> runs;
    for (int r = 0; r < 2; ++r) {
        auto run = test::make_run("run" + std::to_string(r), make_date(1970, 1, 1), 120,
                                  [r](auto k, auto t) { return std::sin(0.1 * t + k) + 1.0 + r; });
        for (std::size_t t = 0; t < 120; ++t)
            run.forcings["rainfall"][t] = (t * 7 + r) % 11;
        run.key.management[3] = std::to_string(r);
        runs.push_back(run);
    }
    SplitSpec split;
    split.train = {make_date(1970, 1, 1), make_date(1970, 3, 10)};
    split.validation = {make_date(1970, 3, 11), make_date(1970, 4, 10)};
    split.test = {make_date(1970, 4, 11), make_date(1970, 4, 30)};
    ClusterData data = prepare_cluster(runs, FeatureSpec{}, split);
    data.cluster_id = "g0-c0";
    data.threshold = 0.95;
    nn::NetworkSpec spec;
    spec.recurrent_layers = 2;
    spec.recurrent_width = 5;
    spec.ff_layers = 2;
    spec.ff_start_width = 6;
    TrainingConfig cfg;
    cfg.lag_days = 3;
    cfg.batch_size = 16;
    cfg.learning_rate = 0.05;
    cfg.max_epochs = 3;
    cfg.seed = 5;
    return train_cluster(data, spec, cfg);
}

} // namespace

TEST_CASE("bundle round trip") {
    const TrainedModel m = small_model();
    const fs::path dir = test::temp_dir("bundle");
    const BundlePaths paths = save_bundle(m, dir, "model");
    CHECK(paths.manifest == dir / "model.json");
    CHECK(paths.weights == dir / "model.bin");
    CHECK(fs::file_size(paths.weights) == m.network.num_params() * sizeof(double));

    const TrainedModel back = load_bundle(paths.manifest);
    CHECK(back.spec == m.spec);
    CHECK(std::memcmp(back.network.params().data(), m.network.params().data(),
                      m.network.num_params() * sizeof(double)) == 0);
    CHECK(back.lag == m.lag);
    CHECK(back.scaler == m.scaler);
    CHECK(back.feature_order == m.feature_order);
    CHECK(feature_names(back.feature_spec) == feature_names(m.feature_spec));
    CHECK(back.log == m.log);
    CHECK(back.best_epoch == m.best_epoch);
    CHECK(back.best_val_mse == m.best_val_mse);
    CHECK(back.cluster_id == "g0-c0");
    CHECK(back.threshold == 0.95);
    CHECK(nlohmann::json(back.config) == nlohmann::json(m.config));

    const auto manifest = nlohmann::json::parse(slurp(paths.manifest));
    CHECK(manifest["format_version"] == kBundleFormatVersion);
    CHECK(manifest["weights"]["checksum"] == "fnv1a64:" + fnv1a64_hex(slurp(paths.weights)));
    CHECK(manifest["blocks"].size() == m.network.blocks().size());

    // Saving again yields identical bytes.
    const fs::path dir2 = test::temp_dir("bundle2");
    const BundlePaths again = save_bundle(back, dir2, "model");
    CHECK(slurp(again.manifest) == slurp(paths.manifest));
    CHECK(slurp(again.weights) == slurp(paths.weights));
}

TEST_CASE("FNV-1a reference values") {
    CHECK(fnv1a64_hex("") == "cbf29ce484222325");
    CHECK(fnv1a64_hex("a") == "af63dc4c8601ec8c");
    CHECK(fnv1a64_hex("foobar") == "85944171f73967e8");
}

TEST_CASE("damaged bundles are rejected") {
    const TrainedModel m = small_model();
    const fs::path dir = test::temp_dir("bundle_bad");
    const BundlePaths paths = save_bundle(m, dir, "model");
    const std::string weights = slurp(paths.weights);
    const std::string manifest = slurp(paths.manifest);

    std::string flipped = weights;
    flipped[flipped.size() / 2] ^= 0x01;
    spit(paths.weights, flipped);
    CHECK_ERROR_KIND(load_bundle(paths.manifest), ErrorKind::BundleVersionMismatch);
    spit(paths.weights, weights.substr(0, weights.size() - 8));
    CHECK_ERROR_KIND(load_bundle(paths.manifest), ErrorKind::BundleVersionMismatch);
    spit(paths.weights, weights);
    CHECK_NOTHROW(load_bundle(paths.manifest));

    auto j = nlohmann::json::parse(manifest);
    j["format_version"] = kBundleFormatVersion + 1;
    spit(paths.manifest, j.dump());
    CHECK_ERROR_KIND(load_bundle(paths.manifest), ErrorKind::BundleVersionMismatch);

    j = nlohmann::json::parse(manifest);
    j["blocks"][0]["shape"][0] = 1;
    spit(paths.manifest, j.dump());
    CHECK_ERROR_KIND(load_bundle(paths.manifest), ErrorKind::BundleVersionMismatch);

    spit(paths.manifest, "{not json");
    CHECK_ERROR_KIND(load_bundle(paths.manifest), ErrorKind::ParseError);
}
