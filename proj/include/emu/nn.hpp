/**
 * @file nn.hpp
 * @brief Dense and GRU layers, network parameter storage, forward/backward
 *
 * A network is J GRU layers followed by K ReLU feed-forward layers and a
 * linear regression head with `output_dim` units. All parameters live in one
 * flat vector; each matrix is a row-major block inside it. The block list
 * (names, shapes, offsets) is what the model bundle manifest records.
 *
 * GRU blocks stack the three gates row-wise in the order z (update),
 * r (reset), h (candidate):
 *
 *   gru<j>.W : 3h x d_in    gru<j>.U : 3h x h    gru<j>.b : 3h
 *
 * Two implementations exist. nn::reference evaluates one sample at a time
 * with plain loops and is kept as the test oracle. The batched kernels in
 * nn/kernels.hpp evaluate a mini-batch with matrix products and are what
 * training uses.
 */
#pragma once

#define EIGEN_DONT_PARALLELIZE
#include <Eigen/Dense>

#include <json.hpp>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace emu::nn {

enum class Architecture { ffnn, gru_ffnn };
enum class CandidateResetMode {
    standard,   ///< candidate uses U_h (r ∘ h_{t-1})
    as_written, ///< candidate uses U_h h_{t-1}; r has no effect
};
enum class Activation { relu, identity };

const char* to_string(Architecture a);
const char* to_string(CandidateResetMode m);
Architecture parse_architecture(const std::string& s);
CandidateResetMode parse_reset_mode(const std::string& s);

struct NetworkSpec {
    Architecture architecture = Architecture::gru_ffnn;
    int recurrent_layers = 1; ///< J; forced to 0 for FFNN
    int ff_layers = 1;        ///< K hidden feed-forward layers
    int recurrent_width = 32;
    int ff_start_width = 32;
    bool funnel = true;
    /// Per-step input length for GRU-FFNN, flattened window length for FFNN.
    int input_dim = 1;
    int output_dim = 4;
    CandidateResetMode reset_mode = CandidateResetMode::standard;

    int gru_layers() const { return architecture == Architecture::ffnn ? 0 : recurrent_layers; }
    /// Hidden widths; halved per layer when funnel is set, never below 1.
    std::vector<int> ff_widths() const;
    void validate() const;
    bool operator==(const NetworkSpec&) const = default;
};

void to_json(nlohmann::json& j, const NetworkSpec& spec);
void from_json(const nlohmann::json& j, NetworkSpec& spec);

struct ParamBlock {
    std::string name;
    int rows = 0;
    int cols = 0;
    std::size_t offset = 0;
    std::size_t size() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
    bool operator==(const ParamBlock&) const = default;
};

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <typename T>
using RowMajor = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixView = Eigen::Map<RowMajor<T>>;
template <typename T>
using ConstMatrixView = Eigen::Map<const RowMajor<T>>;
template <typename T>
using VectorView = Eigen::Map<Vector<T>>;
template <typename T>
using ConstVectorView = Eigen::Map<const Vector<T>>;

/// Parameter block layout for a spec, in storage order.
std::vector<ParamBlock> param_layout(const NetworkSpec& spec);

template <typename T>
class Network {
public:
    Network() = default;
    explicit Network(NetworkSpec spec);

    const NetworkSpec& spec() const { return spec_; }
    const std::vector<ParamBlock>& blocks() const { return blocks_; }
    std::span<T> params() { return params_; }
    std::span<const T> params() const { return params_; }
    std::size_t num_params() const { return params_.size(); }

    /// Uniform in +-sqrt(6 / (fan_in + fan_out)) per gate matrix, zero biases.
    void init_glorot(std::uint64_t seed);

    int num_dense() const { return spec_.ff_layers + 1; } ///< hidden layers + head

    ConstMatrixView<T> gru_W(int j) const { return matrix(gru_base(j)); }
    ConstMatrixView<T> gru_U(int j) const { return matrix(gru_base(j) + 1); }
    ConstVectorView<T> gru_b(int j) const { return vector(gru_base(j) + 2); }
    MatrixView<T> gru_W(int j) { return matrix(gru_base(j)); }
    MatrixView<T> gru_U(int j) { return matrix(gru_base(j) + 1); }
    VectorView<T> gru_b(int j) { return vector(gru_base(j) + 2); }

    /// k in [0, num_dense()); the last one is the linear head.
    ConstMatrixView<T> dense_W(int k) const { return matrix(dense_base(k)); }
    ConstVectorView<T> dense_b(int k) const { return vector(dense_base(k) + 1); }
    MatrixView<T> dense_W(int k) { return matrix(dense_base(k)); }
    VectorView<T> dense_b(int k) { return vector(dense_base(k) + 1); }
    Activation dense_activation(int k) const {
        return k + 1 == num_dense() ? Activation::identity : Activation::relu;
    }

    template <typename U>
    Network<U> cast() const {
        Network<U> out(spec_);
        for (std::size_t i = 0; i < params_.size(); ++i)
            out.params()[i] = static_cast<U>(params_[i]);
        return out;
    }

    bool operator==(const Network&) const = default;

private:
    std::size_t gru_base(int j) const { return static_cast<std::size_t>(3 * j); }
    std::size_t dense_base(int k) const { return static_cast<std::size_t>(3 * spec_.gru_layers() + 2 * k); }
    MatrixView<T> matrix(std::size_t b) {
        return {params_.data() + blocks_[b].offset, blocks_[b].rows, blocks_[b].cols};
    }
    ConstMatrixView<T> matrix(std::size_t b) const {
        return {params_.data() + blocks_[b].offset, blocks_[b].rows, blocks_[b].cols};
    }
    VectorView<T> vector(std::size_t b) { return {params_.data() + blocks_[b].offset, blocks_[b].rows}; }
    ConstVectorView<T> vector(std::size_t b) const { return {params_.data() + blocks_[b].offset, blocks_[b].rows}; }

    NetworkSpec spec_;
    std::vector<ParamBlock> blocks_;
    std::vector<T> params_;
};

extern template class Network<float>;
extern template class Network<double>;

// ===========================================================================
// Stand-alone layers (64-bit). These mirror the layer equations one to one
// and back the serial reference implementation.
// ===========================================================================

struct DenseLayer {
    Matrix<double> W;
    Vector<double> b;
    Activation activation = Activation::relu;
};

struct GruLayer {
    Matrix<double> Wz, Wr, Wh; ///< h x d_in
    Matrix<double> Uz, Ur, Uh; ///< h x h
    Vector<double> bz, br, bh;

    int width() const { return static_cast<int>(bz.size()); }
    int input_dim() const { return static_cast<int>(Wz.cols()); }
};

DenseLayer dense_layer(const Network<double>& net, int k);
GruLayer gru_layer(const Network<double>& net, int j);

/// Pre- and post-activation of every layer, for backprop.
struct FfnnCache {
    std::vector<Vector<double>> inputs;
    std::vector<Vector<double>> pre;
};

struct FfnnResult {
    Vector<double> y;
    FfnnCache cache;
};

/// y_k = act_k(W_k y_{k-1} + b_k) through every layer in order.
FfnnResult ffnn_forward(const Vector<double>& x, const std::vector<DenseLayer>& layers);

struct GruStep {
    Vector<double> z, r, candidate, h;
};

GruStep gru_step(const Vector<double>& x, const Vector<double>& h_prev, const GruLayer& layer,
                 CandidateResetMode mode);

namespace reference {

/// One input sequence: `steps` vectors of length input_dim.
using Sequence = std::vector<Vector<double>>;

/// Everything the backward pass needs for one sample.
struct Tape {
    Sequence inputs;
    /// steps[j][t] for GRU layer j at step t.
    std::vector<std::vector<GruStep>> steps;
    FfnnCache head;
    Vector<double> output;
    bool empty() const { return inputs.empty(); }
};

/// GRU stack from zero state, then the feed-forward head on the final
/// hidden state (on the final input when there are no GRU layers).
Vector<double> forward(const Network<double>& net, const Sequence& x, Tape* tape = nullptr);

/// Gradient of the loss w.r.t. every parameter, given dL/dy for the tape's
/// output. Layout matches net.params(). Throws MissingCache on an empty tape.
std::vector<double> backward(const Network<double>& net, const Tape& tape, const Vector<double>& loss_grad);

/// Mean squared error over outputs for one sample and its gradient.
double loss_and_gradient(const Network<double>& net, const Sequence& x, const Vector<double>& target,
                         std::vector<double>& grad);

} // namespace reference

} // namespace emu::nn
