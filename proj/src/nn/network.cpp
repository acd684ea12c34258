#include "emu/nn.hpp"

#include "emu/error.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace emu::nn {

const char* to_string(Architecture a) { return a == Architecture::ffnn ? "FFNN" : "GRU-FFNN"; }
const char* to_string(CandidateResetMode m) { return m == CandidateResetMode::standard ? "standard" : "as_written"; }

Architecture parse_architecture(const std::string& s) {
    if (s == "FFNN" || s == "ffnn")
        return Architecture::ffnn;
    if (s == "GRU-FFNN" || s == "gru_ffnn")
        return Architecture::gru_ffnn;
    throw Error(ErrorKind::InvalidConfig, "unknown architecture '" + s + "'");
}

CandidateResetMode parse_reset_mode(const std::string& s) {
    if (s == "standard")
        return CandidateResetMode::standard;
    if (s == "as_written")
        return CandidateResetMode::as_written;
    throw Error(ErrorKind::InvalidConfig, "unknown candidate_reset_mode '" + s + "'");
}

std::vector<int> NetworkSpec::ff_widths() const {
    std::vector<int> widths;
    for (int k = 0; k < ff_layers; ++k)
        widths.push_back(funnel ? std::max(1, ff_start_width >> std::min(k, 30)) : ff_start_width);
    return widths;
}

void NetworkSpec::validate() const {
    if (recurrent_layers < 0 || ff_layers < 1 || ff_start_width < 1 || input_dim < 1 || output_dim < 1)
        throw Error(ErrorKind::InvalidConfig, "network dimensions must be positive (ff_layers >= 1)");
    if (architecture == Architecture::gru_ffnn && recurrent_layers < 1)
        throw Error(ErrorKind::InvalidConfig, "GRU-FFNN needs at least one recurrent layer");
    if (gru_layers() > 0 && recurrent_width < 1)
        throw Error(ErrorKind::InvalidConfig, "recurrent_width must be positive");
}

void to_json(nlohmann::json& j, const NetworkSpec& spec) {
    j = nlohmann::json{{"architecture", to_string(spec.architecture)},
                       {"recurrent_layers", spec.gru_layers()},
                       {"ff_layers", spec.ff_layers},
                       {"recurrent_width", spec.recurrent_width},
                       {"ff_start_width", spec.ff_start_width},
                       {"funnel", spec.funnel},
                       {"input_dim", spec.input_dim},
                       {"output_dim", spec.output_dim},
                       {"candidate_reset_mode", to_string(spec.reset_mode)}};
}

void from_json(const nlohmann::json& j, NetworkSpec& spec) {
    spec.architecture = parse_architecture(j.at("architecture").get<std::string>());
    spec.recurrent_layers = j.value("recurrent_layers", 0);
    spec.ff_layers = j.at("ff_layers").get<int>();
    spec.recurrent_width = j.value("recurrent_width", 0);
    spec.ff_start_width = j.at("ff_start_width").get<int>();
    spec.funnel = j.value("funnel", true);
    spec.input_dim = j.value("input_dim", 1);
    spec.output_dim = j.value("output_dim", 4);
    spec.reset_mode = parse_reset_mode(j.value("candidate_reset_mode", std::string("standard")));
    spec.validate();
}

std::vector<ParamBlock> param_layout(const NetworkSpec& spec) {
    spec.validate();
    std::vector<ParamBlock> blocks;
    std::size_t offset = 0;
    auto add = [&](std::string name, int rows, int cols) {
        blocks.push_back({std::move(name), rows, cols, offset});
        offset += blocks.back().size();
    };
    int in = spec.input_dim;
    const int h = spec.recurrent_width;
    for (int j = 0; j < spec.gru_layers(); ++j) {
        const std::string p = "gru" + std::to_string(j + 1);
        add(p + ".W", 3 * h, in);
        add(p + ".U", 3 * h, h);
        add(p + ".b", 3 * h, 1);
        in = h;
    }
    const auto widths = spec.ff_widths();
    for (std::size_t k = 0; k < widths.size(); ++k) {
        const std::string p = "dense" + std::to_string(k + 1);
        add(p + ".W", widths[k], in);
        add(p + ".b", widths[k], 1);
        in = widths[k];
    }
    add("head.W", spec.output_dim, in);
    add("head.b", spec.output_dim, 1);
    return blocks;
}

template <typename T>
Network<T>::Network(NetworkSpec spec) : spec_(spec), blocks_(param_layout(spec)) {
    if (spec_.architecture == Architecture::ffnn)
        spec_.recurrent_layers = 0;
    const auto& last = blocks_.back();
    params_.assign(last.offset + last.size(), T(0));
}

template <typename T>
void Network<T>::init_glorot(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::fill(params_.begin(), params_.end(), T(0));
    auto fill = [&](T* data, std::size_t count, int fan_in, int fan_out) {
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-limit, limit);
        for (std::size_t i = 0; i < count; ++i)
            data[i] = static_cast<T>(dist(rng));
    };
    for (int j = 0; j < spec_.gru_layers(); ++j) {
        const auto& W = blocks_[gru_base(j)];
        const auto& U = blocks_[gru_base(j) + 1];
        const int h = spec_.recurrent_width;
        // each gate matrix is its own h x fan_in matrix
        for (int g = 0; g < 3; ++g) {
            fill(params_.data() + W.offset + static_cast<std::size_t>(g * h) * W.cols,
                 static_cast<std::size_t>(h) * W.cols, W.cols, h);
            fill(params_.data() + U.offset + static_cast<std::size_t>(g * h) * U.cols,
                 static_cast<std::size_t>(h) * U.cols, U.cols, h);
        }
    }
    for (int k = 0; k < num_dense(); ++k) {
        const auto& W = blocks_[dense_base(k)];
        fill(params_.data() + W.offset, W.size(), W.cols, W.rows);
    }
}

template class Network<float>;
template class Network<double>;

DenseLayer dense_layer(const Network<double>& net, int k) {
    return {net.dense_W(k), net.dense_b(k), net.dense_activation(k)};
}

GruLayer gru_layer(const Network<double>& net, int j) {
    const int h = net.spec().recurrent_width;
    const auto W = net.gru_W(j);
    const auto U = net.gru_U(j);
    const auto b = net.gru_b(j);
    GruLayer g;
    g.Wz = W.topRows(h);
    g.Wr = W.middleRows(h, h);
    g.Wh = W.bottomRows(h);
    g.Uz = U.topRows(h);
    g.Ur = U.middleRows(h, h);
    g.Uh = U.bottomRows(h);
    g.bz = b.head(h);
    g.br = b.segment(h, h);
    g.bh = b.tail(h);
    return g;
}

} // namespace emu::nn
