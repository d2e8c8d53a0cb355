#include <benchmark/benchmark.h>

#include <numeric>

#include "tracs/loss.hpp"
#include "tracs/model.hpp"

namespace {

tracs::TransformerConfig tiny(std::size_t window) {
    tracs::TransformerConfig c;
    c.vocabulary_size = 4096;
    c.max_positions = window;
    return c;
}

std::vector<tracs::TokenId> sequence(std::size_t n) {
    std::vector<tracs::TokenId> t(n);
    std::iota(t.begin(), t.end(), 4);
    return t;
}

void BM_EncoderForward(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const tracs::TransformerEncoder enc(tiny(n));
    const auto tokens = sequence(n);
    for (auto _ : state) benchmark::DoNotOptimize(enc.forward(tokens, {}, nullptr));
}
BENCHMARK(BM_EncoderForward)->Arg(128)->Arg(512);

void BM_EncoderForwardBackward(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const tracs::TransformerEncoder enc(tiny(n));
    const auto tokens = sequence(n);
    auto trace = enc.make_trace();
    std::vector<double> grads = enc.parameters().zeros_like();
    const tracs::Vector d_pooled = tracs::Vector::Ones(static_cast<Eigen::Index>(enc.hidden_size()));
    for (auto _ : state) {
        enc.forward(tokens, {}, trace.get());
        enc.backward(*trace, d_pooled, grads);
        benchmark::ClobberMemory();
    }
}
BENCHMARK(BM_EncoderForwardBackward)->Arg(128)->Arg(512);

void BM_JointLoss(benchmark::State& state) {
    const std::vector<double> t{0.3, -1.2, 2.0};
    const std::array<double, 4> b{0.5, -0.5, 1.5, -2.0};
    for (auto _ : state) benchmark::DoNotOptimize(tracs::joint_loss(t, 2, b, {true, false, true, false}));
}
BENCHMARK(BM_JointLoss);

}  // namespace
