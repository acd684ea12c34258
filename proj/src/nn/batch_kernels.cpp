#include "emu/kernels.hpp"

#include "emu/error.hpp"

#include <omp.h>

#include <algorithm>

namespace emu::nn {

namespace {

template <typename T>
MatrixView<T> block_matrix(std::span<T> data, const ParamBlock& b) {
    return {data.data() + b.offset, b.rows, b.cols};
}

template <typename T>
VectorView<T> block_vector(std::span<T> data, const ParamBlock& b) {
    return {data.data() + b.offset, b.rows};
}

// Products and reductions are evaluated into aligned temporaries first. Eigen
// picks scalar or packet paths from the destination's runtime alignment, and
// the two sum in different orders, so evaluating straight into a view of the
// gradient buffer would make the bits depend on where that buffer lives.
template <typename Dst, typename Src>
void accumulate(Dst&& dst, const Src& src) {
    for (Eigen::Index c = 0; c < src.cols(); ++c)
        for (Eigen::Index r = 0; r < src.rows(); ++r)
            dst(r, c) += src(r, c);
}

template <typename T>
auto sigmoid(const Eigen::ArrayBase<T>& a) {
    using S = typename T::Scalar;
    return (S(1) + (-a).exp()).inverse();
}

template <typename T>
struct ChunkCache {
    // GRU layer j: gate activations and outputs, h x (steps * batch)
    std::vector<Matrix<T>> z, r, cand, h, rh;
    std::vector<Matrix<T>> dense_in, dense_pre;
};

// Columns of samples [b0, b0 + count) from every step block of a batch of n.
template <typename T>
Matrix<T> take_samples(const Matrix<T>& x, int steps, int n, int b0, int count) {
    Matrix<T> out(x.rows(), static_cast<Eigen::Index>(steps) * count);
    for (int t = 0; t < steps; ++t)
        out.middleCols(static_cast<Eigen::Index>(t) * count, count) =
            x.middleCols(static_cast<Eigen::Index>(t) * n + b0, count);
    return out;
}

template <typename T>
Matrix<T> forward_chunk(const Network<T>& net, const Matrix<T>& x, int steps, ChunkCache<T>* cache) {
    const auto& spec = net.spec();
    const int J = spec.gru_layers();
    const Eigen::Index B = x.cols() / steps;
    const int h = spec.recurrent_width;

    if (x.rows() != spec.input_dim)
        throw Error(ErrorKind::DimensionMismatch, "input rows " + std::to_string(x.rows()) + " != input_dim " +
                                                      std::to_string(spec.input_dim));
    if (cache) {
        cache->z.resize(J);
        cache->r.resize(J);
        cache->cand.resize(J);
        cache->h.resize(J);
        cache->rh.resize(J);
        cache->dense_in.resize(net.num_dense());
        cache->dense_pre.resize(net.num_dense());
    }

    Matrix<T> layer_out;
    const Matrix<T>* in = &x;
    for (int j = 0; j < J; ++j) {
        const auto W = net.gru_W(j);
        const auto U = net.gru_U(j);
        const auto b = net.gru_b(j);
        Matrix<T> a = W * (*in);
        a.colwise() += b;

        Matrix<T> Z(h, a.cols()), R(h, a.cols()), C(h, a.cols()), H(h, a.cols()), RH;
        if (spec.reset_mode == CandidateResetMode::standard)
            RH.resize(h, a.cols());
        Matrix<T> hp = Matrix<T>::Zero(h, B);
        Matrix<T> g;
        for (int t = 0; t < steps; ++t) {
            const auto cols = Eigen::seqN(static_cast<Eigen::Index>(t) * B, B);
            if (spec.reset_mode == CandidateResetMode::standard) {
                g.noalias() = U.topRows(2 * h) * hp;
                Z(Eigen::all, cols) = sigmoid((a(Eigen::seqN(0, h), cols) + g.topRows(h)).array()).matrix();
                R(Eigen::all, cols) = sigmoid((a(Eigen::seqN(h, h), cols) + g.bottomRows(h)).array()).matrix();
                RH(Eigen::all, cols) = R(Eigen::all, cols).cwiseProduct(hp);
                g.noalias() = U.bottomRows(h) * RH(Eigen::all, cols);
                C(Eigen::all, cols) = (a(Eigen::seqN(2 * h, h), cols) + g).array().tanh().matrix();
            } else {
                g.noalias() = U * hp;
                Z(Eigen::all, cols) = sigmoid((a(Eigen::seqN(0, h), cols) + g.topRows(h)).array()).matrix();
                R(Eigen::all, cols) = sigmoid((a(Eigen::seqN(h, h), cols) + g.middleRows(h, h)).array()).matrix();
                C(Eigen::all, cols) = (a(Eigen::seqN(2 * h, h), cols) + g.bottomRows(h)).array().tanh().matrix();
            }
            H(Eigen::all, cols) = ((T(1) - Z(Eigen::all, cols).array()) * hp.array() +
                                   Z(Eigen::all, cols).array() * C(Eigen::all, cols).array())
                                      .matrix();
            hp = H(Eigen::all, cols);
        }
        if (cache) {
            cache->z[j] = std::move(Z);
            cache->r[j] = std::move(R);
            cache->cand[j] = std::move(C);
            cache->rh[j] = std::move(RH);
            cache->h[j] = H;
        }
        layer_out = std::move(H);
        in = &layer_out;
    }

    Matrix<T> y = in->middleCols(static_cast<Eigen::Index>(steps - 1) * B, B);
    for (int k = 0; k < net.num_dense(); ++k) {
        Matrix<T> pre = net.dense_W(k) * y;
        pre.colwise() += net.dense_b(k);
        if (cache)
            cache->dense_in[k] = std::move(y);
        if (net.dense_activation(k) == Activation::relu)
            y = pre.cwiseMax(T(0));
        else
            y = pre;
        if (cache)
            cache->dense_pre[k] = std::move(pre);
    }
    return y;
}

} // namespace

template <typename T>
Matrix<T> predict(const Network<T>& net, const SequenceBatch<T>& input) {
    const int n = input.batch();
    constexpr int kPredictChunk = 256;
    const int chunks = (n + kPredictChunk - 1) / kPredictChunk;
    Matrix<T> out(net.spec().output_dim, n);
    if (input.x.rows() != net.spec().input_dim)
        throw Error(ErrorKind::DimensionMismatch, "input rows do not match input_dim");
#pragma omp parallel for schedule(dynamic)
    for (int c = 0; c < chunks; ++c) {
        const int b0 = c * kPredictChunk;
        const int count = std::min(kPredictChunk, n - b0);
        const Matrix<T> x = take_samples(input.x, input.steps, n, b0, count);
        out.middleCols(b0, count) = forward_chunk<T>(net, x, input.steps, nullptr);
    }
    return out;
}

template <typename T>
T chunk_gradient(const Network<T>& net, const SequenceBatch<T>& input, const Matrix<T>& targets, T scale,
                 std::span<T> grad) {
    const auto& spec = net.spec();
    const auto& blocks = net.blocks();
    const int steps = input.steps;
    const Eigen::Index B = input.batch();
    if (targets.rows() != spec.output_dim || targets.cols() != B)
        throw Error(ErrorKind::DimensionMismatch, "targets shape does not match batch");
    if (grad.size() != net.num_params())
        throw Error(ErrorKind::DimensionMismatch, "gradient buffer size");

    ChunkCache<T> cache;
    const Matrix<T> y = forward_chunk(net, input.x, steps, &cache);
    const Matrix<T> err = y - targets;
    const T sse = err.squaredNorm();

    const int J = spec.gru_layers();
    Matrix<T> dy = (T(2) * scale) * err;
    for (int k = net.num_dense() - 1; k >= 0; --k) {
        Matrix<T> dpre = std::move(dy);
        if (net.dense_activation(k) == Activation::relu)
            dpre = (cache.dense_pre[k].array() > T(0)).select(dpre, T(0));
        accumulate(block_matrix(grad, blocks[3 * J + 2 * k]), Matrix<T>(dpre * cache.dense_in[k].transpose()));
        accumulate(block_vector(grad, blocks[3 * J + 2 * k + 1]), Vector<T>(dpre.rowwise().sum()));
        dy.noalias() = net.dense_W(k).transpose() * dpre;
    }
    if (J == 0)
        return sse;

    const int h = spec.recurrent_width;
    const Eigen::Index cols_all = static_cast<Eigen::Index>(steps) * B;
    Matrix<T> d_seq = Matrix<T>::Zero(h, cols_all);
    d_seq.middleCols(cols_all - B, B) = dy;

    for (int j = J - 1; j >= 0; --j) {
        const auto W = net.gru_W(j);
        const auto U = net.gru_U(j);
        const Matrix<T>& Z = cache.z[j];
        const Matrix<T>& R = cache.r[j];
        const Matrix<T>& C = cache.cand[j];
        const Matrix<T>& H = cache.h[j];
        const Matrix<T>& in = j == 0 ? input.x : cache.h[j - 1];

        Matrix<T> hprev(h, cols_all);
        hprev.leftCols(B).setZero();
        hprev.rightCols(cols_all - B) = H.leftCols(cols_all - B);

        Matrix<T> da(3 * h, cols_all);
        Matrix<T> dh_next = Matrix<T>::Zero(h, B);
        Matrix<T> dhp(h, B);
        for (int t = steps - 1; t >= 0; --t) {
            const auto cols = Eigen::seqN(static_cast<Eigen::Index>(t) * B, B);
            const auto z = Z(Eigen::all, cols).array();
            const auto r = R(Eigen::all, cols).array();
            const auto c = C(Eigen::all, cols).array();
            const auto hp = hprev(Eigen::all, cols).array();
            const Eigen::Array<T, Eigen::Dynamic, Eigen::Dynamic> dh = d_seq(Eigen::all, cols).array() + dh_next.array();

            auto daz = da(Eigen::seqN(0, h), cols);
            auto dar = da(Eigen::seqN(h, h), cols);
            auto dah = da(Eigen::seqN(2 * h, h), cols);
            daz = (dh * (c - hp) * z * (T(1) - z)).matrix();
            dah = (dh * z * (T(1) - c * c)).matrix();
            dhp = (dh * (T(1) - z)).matrix();
            if (spec.reset_mode == CandidateResetMode::standard) {
                const Matrix<T> drh = U.bottomRows(h).transpose() * dah;
                dar = (drh.array() * hp * r * (T(1) - r)).matrix();
                dhp.array() += drh.array() * r;
                dhp.noalias() += U.topRows(2 * h).transpose() * da(Eigen::seqN(0, 2 * h), cols);
            } else {
                dar.setZero();
                dhp.noalias() += U.transpose() * da(Eigen::all, cols);
            }
            dh_next = dhp;
        }

        accumulate(block_matrix(grad, blocks[3 * j]), Matrix<T>(da * in.transpose()));
        accumulate(block_vector(grad, blocks[3 * j + 2]), Vector<T>(da.rowwise().sum()));
        auto gU = block_matrix(grad, blocks[3 * j + 1]);
        if (spec.reset_mode == CandidateResetMode::standard) {
            accumulate(gU.topRows(2 * h), Matrix<T>(da.topRows(2 * h) * hprev.transpose()));
            accumulate(gU.bottomRows(h), Matrix<T>(da.bottomRows(h) * cache.rh[j].transpose()));
        } else {
            accumulate(gU, Matrix<T>(da * hprev.transpose()));
        }
        if (j > 0)
            d_seq.noalias() = W.transpose() * da;
    }
    return sse;
}

namespace {

template <typename T>
T gradient_impl(const Network<T>& net, const SequenceBatch<T>& input, const Matrix<T>& targets, std::span<T> grad,
                bool parallel, int max_threads) {
    const int n = input.batch();
    if (n == 0)
        throw Error(ErrorKind::NoTrainingData, "empty batch");
    if (targets.cols() != n || targets.rows() != net.spec().output_dim)
        throw Error(ErrorKind::DimensionMismatch, "targets shape does not match batch");
    if (grad.size() != net.num_params())
        throw Error(ErrorKind::DimensionMismatch, "gradient buffer size");
    const int chunks = (n + kChunkSize - 1) / kChunkSize;
    const T scale = T(1) / (static_cast<T>(n) * static_cast<T>(net.spec().output_dim));

    std::vector<std::vector<T>> partial(static_cast<std::size_t>(chunks));
    std::vector<T> sse(static_cast<std::size_t>(chunks), T(0));
    auto run_chunk = [&](int c) {
        const int b0 = c * kChunkSize;
        const int count = std::min(kChunkSize, n - b0);
        SequenceBatch<T> sub{take_samples(input.x, input.steps, n, b0, count), input.steps};
        const Matrix<T> tgt = targets.middleCols(b0, count);
        auto& buf = partial[static_cast<std::size_t>(c)];
        buf.assign(net.num_params(), T(0));
        sse[static_cast<std::size_t>(c)] = chunk_gradient(net, sub, tgt, scale, std::span<T>(buf));
    };

    if (parallel) {
        const int threads = max_threads > 0 ? max_threads : omp_get_max_threads();
        std::vector<std::exception_ptr> errors(static_cast<std::size_t>(chunks));
#pragma omp parallel for schedule(static) num_threads(threads)
        for (int c = 0; c < chunks; ++c) {
            try {
                run_chunk(c);
            } catch (...) {
                errors[static_cast<std::size_t>(c)] = std::current_exception();
            }
        }
        for (const auto& e : errors)
            if (e)
                std::rethrow_exception(e);
    } else {
        for (int c = 0; c < chunks; ++c)
            run_chunk(c);
    }

    // fixed reduction order: chunk 0, 1, 2, ...
    std::copy(partial[0].begin(), partial[0].end(), grad.begin());
    T total = sse[0];
    for (int c = 1; c < chunks; ++c) {
        const auto& buf = partial[static_cast<std::size_t>(c)];
        for (std::size_t i = 0; i < grad.size(); ++i)
            grad[i] += buf[i];
        total += sse[static_cast<std::size_t>(c)];
    }
    return total * scale;
}

} // namespace

template <typename T>
T batch_gradient(const Network<T>& net, const SequenceBatch<T>& input, const Matrix<T>& targets, std::span<T> grad,
                 int max_threads) {
    return gradient_impl(net, input, targets, grad, true, max_threads);
}

template <typename T>
T batch_gradient_serial(const Network<T>& net, const SequenceBatch<T>& input, const Matrix<T>& targets,
                        std::span<T> grad) {
    return gradient_impl(net, input, targets, grad, false, 1);
}

#define EMU_INSTANTIATE(T)                                                                                   \
    template Matrix<T> predict(const Network<T>&, const SequenceBatch<T>&);                                \
    template T chunk_gradient(const Network<T>&, const SequenceBatch<T>&, const Matrix<T>&, T, std::span<T>); \
    template T batch_gradient(const Network<T>&, const SequenceBatch<T>&, const Matrix<T>&, std::span<T>, int); \
    template T batch_gradient_serial(const Network<T>&, const SequenceBatch<T>&, const Matrix<T>&, std::span<T>);

EMU_INSTANTIATE(float)
EMU_INSTANTIATE(double)

#undef EMU_INSTANTIATE

} // namespace emu::nn
