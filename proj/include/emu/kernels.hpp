/**
 * @file kernels.hpp
 * @brief Batched forward/backward over a mini-batch
 *
 * Inputs are a d x (steps * batch) column-major matrix; column t * batch + b
 * is sample b at step t. Targets are output_dim x batch.
 *
 * batch_gradient() splits the batch into fixed-size chunks of kChunkSize
 * samples and evaluates them on OpenMP threads. Per-chunk gradients are
 * reduced in chunk order, so results do not depend on the thread count.
 */
#pragma once

#include "emu/nn.hpp"

namespace emu::nn {

inline constexpr int kChunkSize = 32;

template <typename T>
struct SequenceBatch {
    Matrix<T> x; ///< d x (steps * batch)
    int steps = 1;
    int batch() const { return steps > 0 ? static_cast<int>(x.cols()) / steps : 0; }
};

/// Network outputs (output_dim x batch) for every sample; chunked internally.
template <typename T>
Matrix<T> predict(const Network<T>& net, const SequenceBatch<T>& input);

/// Serial kernel for one chunk. Adds `scale`-weighted dL/dθ of the summed
/// squared error to `grad` and returns the chunk's sum of squared errors.
/// With scale = 1 / (N * output_dim) and N the full batch size, `grad`
/// accumulates the gradient of the batch MSE.
template <typename T>
T chunk_gradient(const Network<T>& net, const SequenceBatch<T>& input, const Matrix<T>& targets, T scale,
                 std::span<T> grad);

/// Batch MSE (mean over samples and outputs) and its gradient, written to `grad`.
template <typename T>
T batch_gradient(const Network<T>& net, const SequenceBatch<T>& input, const Matrix<T>& targets, std::span<T> grad,
                 int max_threads = 0);

/// Same result computed chunk by chunk on the calling thread.
template <typename T>
T batch_gradient_serial(const Network<T>& net, const SequenceBatch<T>& input, const Matrix<T>& targets,
                        std::span<T> grad);

} // namespace emu::nn
