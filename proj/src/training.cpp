#include "emu/training.hpp"

#include "emu/error.hpp"
#include "emu/log.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace emu {

// ============================================================================
// Config
// ============================================================================

void TrainingConfig::validate() const {
    if (lag_days < 1 || batch_size < 1 || max_epochs < 1 || patience < 1)
        throw Error(ErrorKind::InvalidConfig, "lag_days, batch_size, max_epochs and patience must be >= 1");
    if (!(learning_rate >= 0.0) || !(min_delta >= 0.0) || !(momentum >= 0.0 && momentum < 1.0))
        throw Error(ErrorKind::InvalidConfig, "learning_rate, min_delta >= 0 and momentum in [0, 1) required");
    if (lr_decay_every < 0 || !(lr_decay_factor > 0.0))
        throw Error(ErrorKind::InvalidConfig, "invalid learning-rate decay");
}

void to_json(nlohmann::json& j, const TrainingConfig& c) {
    j = nlohmann::json{{"lag_days", c.lag_days},
                       {"batch_size", c.batch_size},
                       {"learning_rate", c.learning_rate},
                       {"max_epochs", c.max_epochs},
                       {"patience", c.patience},
                       {"min_delta", c.min_delta},
                       {"seed", c.seed},
                       {"momentum", c.momentum},
                       {"lr_decay_every", c.lr_decay_every},
                       {"lr_decay_factor", c.lr_decay_factor},
                       {"precision", c.precision == Precision::float32 ? "float32" : "float64"}};
}

void from_json(const nlohmann::json& j, TrainingConfig& c) {
    static const std::vector<std::string> known = {"lag_days", "batch_size", "learning_rate", "max_epochs",
                                                   "patience", "min_delta", "seed", "momentum",
                                                   "lr_decay_every", "lr_decay_factor", "precision", "threads"};
    for (const auto& [k, v] : j.items())
        if (std::find(known.begin(), known.end(), k) == known.end())
            throw Error(ErrorKind::InvalidConfig, "unknown training key '" + k + "'");
    c = TrainingConfig{};
    c.lag_days = j.value("lag_days", c.lag_days);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.patience = j.value("patience", c.patience);
    c.min_delta = j.value("min_delta", c.min_delta);
    c.seed = j.value("seed", c.seed);
    c.momentum = j.value("momentum", c.momentum);
    c.lr_decay_every = j.value("lr_decay_every", c.lr_decay_every);
    c.lr_decay_factor = j.value("lr_decay_factor", c.lr_decay_factor);
    c.threads = j.value("threads", c.threads);
    const auto p = j.value("precision", std::string("float64"));
    if (p == "float32")
        c.precision = Precision::float32;
    else if (p == "float64")
        c.precision = Precision::float64;
    else
        throw Error(ErrorKind::InvalidConfig, "precision must be float32 or float64");
    c.validate();
}

// ============================================================================
// Windows
// ============================================================================

WindowSet::WindowSet(std::vector<RunData> runs, int lag) : runs_(std::move(runs)), lag_(lag) {
    if (lag < 1)
        throw Error(ErrorKind::InvalidConfig, "lag must be >= 1");
    for (std::size_t r = 0; r < runs_.size(); ++r) {
        const auto& run = runs_[r];
        if (run.rows() < static_cast<std::size_t>(lag))
            throw Error(ErrorKind::RunTooShort, run.run_id + " has " + std::to_string(run.rows()) +
                                                    " days, lag is " + std::to_string(lag));
        if (run.features.cols() != feature_dim())
            throw Error(ErrorKind::DimensionMismatch, "runs disagree on feature count");
        for (std::size_t t = static_cast<std::size_t>(lag - 1); t < run.rows(); ++t)
            refs_.push_back({r, t});
    }
}

WindowSample WindowSet::sample(std::size_t i) const {
    const Ref& ref = refs_.at(i);
    const RunData& run = runs_[ref.run];
    WindowSample s;
    for (std::size_t t = ref.end + 1 - static_cast<std::size_t>(lag_); t <= ref.end; ++t) {
        const auto row = run.features.row(t);
        s.inputs.emplace_back(row.begin(), row.end());
    }
    for (std::size_t k = 0; k < kNumOutputs; ++k)
        s.target[k] = run.targets[k][ref.end];
    s.run_id = run.run_id;
    s.date = run.features.date(ref.end);
    return s;
}

template <typename T>
nn::SequenceBatch<T> WindowSet::inputs(std::span<const std::size_t> indices, nn::Architecture arch) const {
    const auto d = static_cast<Eigen::Index>(feature_dim());
    const auto n = static_cast<Eigen::Index>(indices.size());
    nn::SequenceBatch<T> batch;
    if (arch == nn::Architecture::ffnn) {
        batch.steps = 1;
        batch.x.resize(d * lag_, n);
        for (Eigen::Index b = 0; b < n; ++b) {
            const Ref& ref = refs_[indices[static_cast<std::size_t>(b)]];
            const auto& f = runs_[ref.run].features;
            for (int s = 0; s < lag_; ++s) {
                const auto row = f.row(ref.end + 1 - static_cast<std::size_t>(lag_) + static_cast<std::size_t>(s));
                for (Eigen::Index c = 0; c < d; ++c)
                    batch.x(s * d + c, b) = static_cast<T>(row[static_cast<std::size_t>(c)]);
            }
        }
    } else {
        batch.steps = lag_;
        batch.x.resize(d, n * lag_);
        for (Eigen::Index b = 0; b < n; ++b) {
            const Ref& ref = refs_[indices[static_cast<std::size_t>(b)]];
            const auto& f = runs_[ref.run].features;
            for (int s = 0; s < lag_; ++s) {
                const auto row = f.row(ref.end + 1 - static_cast<std::size_t>(lag_) + static_cast<std::size_t>(s));
                for (Eigen::Index c = 0; c < d; ++c)
                    batch.x(c, s * n + b) = static_cast<T>(row[static_cast<std::size_t>(c)]);
            }
        }
    }
    return batch;
}

template <typename T>
nn::Matrix<T> WindowSet::targets(std::span<const std::size_t> indices) const {
    nn::Matrix<T> y(static_cast<Eigen::Index>(kNumOutputs), static_cast<Eigen::Index>(indices.size()));
    for (std::size_t b = 0; b < indices.size(); ++b)
        for (std::size_t k = 0; k < kNumOutputs; ++k)
            y(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(b)) = static_cast<T>(target(indices[b], k));
    return y;
}

template nn::SequenceBatch<float> WindowSet::inputs(std::span<const std::size_t>, nn::Architecture) const;
template nn::SequenceBatch<double> WindowSet::inputs(std::span<const std::size_t>, nn::Architecture) const;
template nn::Matrix<float> WindowSet::targets(std::span<const std::size_t>) const;
template nn::Matrix<double> WindowSet::targets(std::span<const std::size_t>) const;

WindowSet make_windows(std::span<const ModelRun> runs, std::span<const FeatureTable> features,
                       const ScalerParams& scaler, int lag) {
    if (runs.size() != features.size())
        throw Error(ErrorKind::DimensionMismatch, "one feature table per run required");
    std::vector<RunData> data;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        if (features[i].rows() != runs[i].num_days() || features[i].start() != runs[i].start)
            throw Error(ErrorKind::DateMismatch, runs[i].id + ": features not aligned with run");
        RunData d;
        d.run_id = runs[i].id;
        d.features = features[i];
        transform_table(d.features, scaler);
        for (std::size_t k = 0; k < kNumOutputs; ++k) {
            const VariableRange& r = scaler.range(kOutputNames[k]);
            d.targets[k].resize(runs[i].num_days());
            for (std::size_t t = 0; t < runs[i].num_days(); ++t)
                d.targets[k][t] = transform(runs[i].outputs[k][t], r);
        }
        data.push_back(std::move(d));
    }
    return WindowSet(std::move(data), lag);
}

WindowSet ClusterData::windows(SplitPart part, int lag) const {
    switch (part) {
    case SplitPart::train: return make_windows(train, train_features, scaler, lag);
    case SplitPart::validation: return make_windows(validation, validation_features, scaler, lag);
    case SplitPart::test: return make_windows(test, test_features, scaler, lag);
    }
    return {};
}

ClusterData prepare_cluster(std::span<const ModelRun> runs, const FeatureSpec& features, const SplitSpec& split) {
    if (runs.empty())
        throw Error(ErrorKind::NoTrainingData, "cluster has no runs");
    ClusterData data;
    data.feature_spec = features;
    data.feature_names = feature_names(features);
    for (const auto& run : runs) {
        const FeatureTable table = derive_features(run, features);
        const SplitIndices idx = split_indices(run, split, true);
        data.train.push_back(run.slice(idx.train.begin, idx.train.size()));
        data.validation.push_back(run.slice(idx.validation.begin, idx.validation.size()));
        data.test.push_back(run.slice(idx.test.begin, idx.test.size()));
        data.train_features.push_back(table.slice(idx.train.begin, idx.train.size()));
        data.validation_features.push_back(table.slice(idx.validation.begin, idx.validation.size()));
        data.test_features.push_back(table.slice(idx.test.begin, idx.test.size()));
    }
    std::vector<OutputSeries> outputs;
    for (const auto& r : data.train)
        outputs.push_back({r.outputs[0], r.outputs[1], r.outputs[2], r.outputs[3]});
    data.scaler = fit_scaler(data.train_features, outputs, ConstantPolicy::flag);
    for (const auto& name : data.scaler.constant_variables())
        log_info("constant training variable '" + name + "' maps to 0");
    return data;
}

std::string training_log_csv(const std::vector<EpochRecord>& log) {
    std::string out = "epoch,train_mse,val_mse\n";
    char buf[32];
    for (const auto& e : log) {
        out += std::to_string(e.epoch);
        for (double v : {e.train_mse, e.val_mse}) {
            auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
            out += ',';
            out.append(buf, ptr);
        }
        out += '\n';
    }
    return out;
}

// ============================================================================
// Training
// ============================================================================

nn::NetworkSpec resolve_input_dim(nn::NetworkSpec spec, std::size_t feature_dim, int lag) {
    spec.input_dim = static_cast<int>(feature_dim) * (spec.architecture == nn::Architecture::ffnn ? lag : 1);
    if (spec.architecture == nn::Architecture::ffnn)
        spec.recurrent_layers = 0;
    return spec;
}

namespace {

constexpr std::size_t kEvalBatch = 4096;

template <typename T>
nn::Matrix<double> predict_all(const nn::Network<T>& net, const WindowSet& windows) {
    nn::Matrix<double> out(net.spec().output_dim, static_cast<Eigen::Index>(windows.size()));
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < windows.size(); start += kEvalBatch) {
        const std::size_t end = std::min(windows.size(), start + kEvalBatch);
        idx.resize(end - start);
        std::iota(idx.begin(), idx.end(), start);
        const auto batch = windows.inputs<T>(idx, net.spec().architecture);
        out.middleCols(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(idx.size())) =
            nn::predict(net, batch).template cast<double>();
    }
    return out;
}

template <typename T>
TrainedModel train_impl(const WindowSet& train_set, const WindowSet& validation_set, const nn::NetworkSpec& spec,
                        const TrainingConfig& config) {
    nn::Network<double> init(spec);
    init.init_glorot(derive_seed(config.seed, "init"));
    nn::Network<T> net = init.template cast<T>();
    nn::Network<T> best = net;

    std::mt19937_64 rng(derive_seed(config.seed, "shuffle"));
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<T> grad(net.num_params());
    std::vector<T> velocity(net.num_params(), T(0));

    TrainedModel model;
    model.spec = spec;
    model.lag = train_set.lag();
    model.config = config;
    double best_val = std::numeric_limits<double>::infinity();
    double reference_val = best_val;
    int since_improvement = 0;

    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        double lr = config.learning_rate;
        if (config.lr_decay_every > 0)
            lr *= std::pow(config.lr_decay_factor, (epoch - 1) / config.lr_decay_every);
        const T step = static_cast<T>(lr);
        const T mom = static_cast<T>(config.momentum);

        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            const std::span<const std::size_t> idx(order.data() + start, end - start);
            const auto batch = train_set.inputs<T>(idx, spec.architecture);
            const auto targets = train_set.targets<T>(idx);
            const T loss = nn::batch_gradient(net, batch, targets, std::span<T>(grad), config.threads);
            if (!std::isfinite(static_cast<double>(loss)))
                throw Error(ErrorKind::DivergedLoss, "non-finite training loss at epoch " + std::to_string(epoch));
            loss_sum += static_cast<double>(loss) * static_cast<double>(idx.size());
            auto params = net.params();
            if (config.momentum > 0.0) {
                for (std::size_t i = 0; i < params.size(); ++i) {
                    velocity[i] = mom * velocity[i] - step * grad[i];
                    params[i] += velocity[i];
                }
            } else {
                for (std::size_t i = 0; i < params.size(); ++i)
                    params[i] -= step * grad[i];
            }
        }

        const double train_mse = loss_sum / static_cast<double>(order.size());
        const double val_mse = window_mse(net, validation_set);
        if (!std::isfinite(val_mse))
            throw Error(ErrorKind::DivergedLoss, "non-finite validation loss at epoch " + std::to_string(epoch));
        model.log.push_back({epoch, train_mse, val_mse});
        log_info("epoch " + std::to_string(epoch) + " train_mse " + std::to_string(train_mse) + " val_mse " +
                 std::to_string(val_mse));

        if (val_mse < best_val) {
            best_val = val_mse;
            best = net;
            model.best_epoch = epoch;
        }
        if (val_mse < reference_val - config.min_delta) {
            reference_val = val_mse;
            since_improvement = 0;
        } else if (++since_improvement >= config.patience) {
            break;
        }
    }
    model.network = best.template cast<double>();
    model.best_val_mse = best_val;
    return model;
}

} // namespace

template <typename T>
double window_mse(const nn::Network<T>& net, const WindowSet& windows) {
    if (windows.empty())
        throw Error(ErrorKind::Empty, "no windows to evaluate");
    const nn::Matrix<double> pred = predict_all(net, windows);
    double sum = 0.0;
    for (Eigen::Index b = 0; b < pred.cols(); ++b)
        for (Eigen::Index k = 0; k < pred.rows(); ++k) {
            const double e = pred(k, b) - windows.target(static_cast<std::size_t>(b), static_cast<std::size_t>(k));
            sum += e * e;
        }
    return sum / static_cast<double>(pred.size());
}

template double window_mse(const nn::Network<float>&, const WindowSet&);
template double window_mse(const nn::Network<double>&, const WindowSet&);

nn::Matrix<double> predict_windows(const TrainedModel& model, const WindowSet& windows) {
    if (model.config.precision == Precision::float32)
        return predict_all(model.network.cast<float>(), windows);
    return predict_all(model.network, windows);
}

TrainedModel train(const WindowSet& train_set, const WindowSet& validation_set, nn::NetworkSpec spec,
                   const TrainingConfig& config) {
    config.validate();
    if (train_set.empty())
        throw Error(ErrorKind::NoTrainingData, "empty training set");
    if (validation_set.empty())
        throw Error(ErrorKind::NoTrainingData, "empty validation set");
    if (train_set.lag() != validation_set.lag() || train_set.feature_dim() != validation_set.feature_dim())
        throw Error(ErrorKind::DimensionMismatch, "training and validation windows differ in shape");
    spec = resolve_input_dim(spec, train_set.feature_dim(), train_set.lag());
    spec.validate();
    if (config.precision == Precision::float32)
        return train_impl<float>(train_set, validation_set, spec, config);
    return train_impl<double>(train_set, validation_set, spec, config);
}

TrainedModel train_cluster(const ClusterData& data, const nn::NetworkSpec& spec, const TrainingConfig& config) {
    const WindowSet tr = data.windows(SplitPart::train, config.lag_days);
    const WindowSet va = data.windows(SplitPart::validation, config.lag_days);
    TrainedModel model = train(tr, va, spec, config);
    model.scaler = data.scaler;
    model.feature_spec = data.feature_spec;
    model.feature_order = data.feature_names;
    model.cluster_id = data.cluster_id;
    model.threshold = data.threshold;
    return model;
}

// ============================================================================
// Grid
// ============================================================================

GridSpec GridSpec::full_table() { return GridSpec{}; }

void to_json(nlohmann::json& j, const GridSpec& g) {
    std::vector<std::string> archs;
    for (auto a : g.architectures)
        archs.push_back(nn::to_string(a));
    j = nlohmann::json{{"architectures", archs},
                       {"lags", g.lags},
                       {"recurrent_layers", g.recurrent_layers},
                       {"ff_layers", g.ff_layers},
                       {"recurrent_widths", g.recurrent_widths},
                       {"ff_widths", g.ff_widths},
                       {"funnel", g.funnel},
                       {"candidate_reset_mode", nn::to_string(g.reset_mode)}};
}

void from_json(const nlohmann::json& j, GridSpec& g) {
    static const std::vector<std::string> known = {"architectures", "lags", "recurrent_layers",
                                                   "ff_layers", "recurrent_widths", "ff_widths",
                                                   "funnel", "candidate_reset_mode"};
    for (const auto& [k, v] : j.items())
        if (std::find(known.begin(), known.end(), k) == known.end())
            throw Error(ErrorKind::InvalidConfig, "unknown grid key '" + k + "'");
    g = GridSpec{};
    if (j.contains("architectures")) {
        g.architectures.clear();
        for (const auto& a : j["architectures"])
            g.architectures.push_back(nn::parse_architecture(a.get<std::string>()));
    }
    auto ints = [&](const char* key, std::vector<int>& dst) {
        if (j.contains(key))
            dst = j[key].get<std::vector<int>>();
    };
    ints("lags", g.lags);
    ints("recurrent_layers", g.recurrent_layers);
    ints("ff_layers", g.ff_layers);
    ints("recurrent_widths", g.recurrent_widths);
    ints("ff_widths", g.ff_widths);
    g.funnel = j.value("funnel", g.funnel);
    if (j.contains("candidate_reset_mode"))
        g.reset_mode = nn::parse_reset_mode(j["candidate_reset_mode"].get<std::string>());
}

std::string GridCell::label() const {
    std::string s = spec.architecture == nn::Architecture::ffnn ? "ffnn" : "gru";
    if (spec.architecture == nn::Architecture::gru_ffnn)
        s += "_J" + std::to_string(spec.recurrent_layers) + "h" + std::to_string(spec.recurrent_width);
    s += "_K" + std::to_string(spec.ff_layers) + "w" + std::to_string(spec.ff_start_width);
    s += "_lag" + std::to_string(lag);
    return s;
}

std::vector<GridCell> enumerate_grid(const GridSpec& grid) {
    std::vector<GridCell> cells;
    for (auto arch : grid.architectures)
        for (int lag : grid.lags)
            for (int J : arch == nn::Architecture::ffnn ? std::vector<int>{0} : grid.recurrent_layers)
                for (int h : arch == nn::Architecture::ffnn ? std::vector<int>{0} : grid.recurrent_widths)
                    for (int K : grid.ff_layers)
                        for (int w : grid.ff_widths) {
                            nn::NetworkSpec spec;
                            spec.architecture = arch;
                            spec.recurrent_layers = J;
                            spec.recurrent_width = h;
                            spec.ff_layers = K;
                            spec.ff_start_width = w;
                            spec.funnel = grid.funnel;
                            spec.reset_mode = grid.reset_mode;
                            spec.validate();
                            cells.push_back({spec, lag});
                        }
    return cells;
}

} // namespace emu
