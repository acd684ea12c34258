// Reference vs batched vs OpenMP kernels, and serial vs parallel C_min matrices.

#include "emu/clustering.hpp"
#include "emu/kernels.hpp"
#include "emu/nn.hpp"
#include "emu/synth.hpp"

#include <benchmark/benchmark.h>

#include <random>

namespace {

using namespace emu;

constexpr int kInputDim = 34;
constexpr int kLag = 14;
constexpr int kBatch = 128;

nn::NetworkSpec gru_spec(int width) {
    nn::NetworkSpec s;
    s.architecture = nn::Architecture::gru_ffnn;
    s.recurrent_layers = 3;
    s.recurrent_width = width;
    s.ff_layers = 3;
    s.ff_start_width = 128;
    s.input_dim = kInputDim;
    return s;
}

template <typename T>
struct Problem {
    nn::Network<T> net;
    nn::SequenceBatch<T> batch;
    nn::Matrix<T> targets;
};

template <typename T>
Problem<T> make_problem(int width) {
    nn::Network<double> net(gru_spec(width));
    net.init_glorot(1);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Problem<T> p{net.cast<T>(), {}, {}};
    p.batch.steps = kLag;
    p.batch.x.resize(kInputDim, kLag * kBatch);
    for (Eigen::Index i = 0; i < p.batch.x.size(); ++i)
        p.batch.x.data()[i] = static_cast<T>(u(rng));
    p.targets.resize(4, kBatch);
    for (Eigen::Index i = 0; i < p.targets.size(); ++i)
        p.targets.data()[i] = static_cast<T>(u(rng));
    return p;
}

void BM_ReferenceGradient(benchmark::State& state) {
    auto p = make_problem<double>(static_cast<int>(state.range(0)));
    std::vector<nn::reference::Sequence> xs(kBatch);
    std::vector<nn::Vector<double>> ys(kBatch);
    for (int b = 0; b < kBatch; ++b) {
        for (int t = 0; t < kLag; ++t)
            xs[b].push_back(p.batch.x.col(t * kBatch + b));
        ys[b] = p.targets.col(b);
    }
    std::vector<double> grad;
    for (auto _ : state) {
        double loss = 0.0;
        for (int b = 0; b < kBatch; ++b)
            loss += nn::reference::loss_and_gradient(p.net, xs[b], ys[b], grad);
        benchmark::DoNotOptimize(loss);
    }
    state.SetItemsProcessed(state.iterations() * kBatch);
}

template <typename T>
void BM_BatchGradientSerial(benchmark::State& state) {
    auto p = make_problem<T>(static_cast<int>(state.range(0)));
    std::vector<T> grad(p.net.num_params());
    for (auto _ : state)
        benchmark::DoNotOptimize(nn::batch_gradient_serial(p.net, p.batch, p.targets, std::span<T>(grad)));
    state.SetItemsProcessed(state.iterations() * kBatch);
}

template <typename T>
void BM_BatchGradientParallel(benchmark::State& state) {
    auto p = make_problem<T>(static_cast<int>(state.range(0)));
    std::vector<T> grad(p.net.num_params());
    for (auto _ : state)
        benchmark::DoNotOptimize(nn::batch_gradient(p.net, p.batch, p.targets, std::span<T>(grad)));
    state.SetItemsProcessed(state.iterations() * kBatch);
}

std::vector<ModelRun> bench_runs() {
    auto cfg = synth::SynthConfig::reference();
    cfg.years = 10;
    return synth::reference_runs(cfg);
}

void BM_MinCorrSerial(benchmark::State& state) {
    const auto runs = bench_runs();
    std::vector<const ModelRun*> ptrs;
    for (const auto& r : runs)
        ptrs.push_back(&r);
    for (auto _ : state)
        benchmark::DoNotOptimize(min_corr_matrix_serial(ptrs, std::nullopt));
}

void BM_MinCorrParallel(benchmark::State& state) {
    const auto runs = bench_runs();
    std::vector<const ModelRun*> ptrs;
    for (const auto& r : runs)
        ptrs.push_back(&r);
    for (auto _ : state)
        benchmark::DoNotOptimize(min_corr_matrix(ptrs, std::nullopt));
}

} // namespace

BENCHMARK(BM_ReferenceGradient)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BatchGradientSerial<double>)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BatchGradientSerial<float>)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BatchGradientParallel<double>)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BatchGradientParallel<float>)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MinCorrSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MinCorrParallel)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
