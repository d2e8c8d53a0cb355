#include <benchmark/benchmark.h>

#include "tracs/inference.hpp"
#include "tracs/metrics.hpp"
#include "tracs/rng.hpp"

namespace {

void BM_Aggregate(benchmark::State& state) {
    const tracs::LabelVocabulary vocab({"CHANDRA", "HST", "JWST"});
    tracs::Rng rng(1);
    std::vector<tracs::ChunkPrediction> preds;
    for (std::int64_t i = 0; i < state.range(0); ++i) {
        preds.emplace_back("doc", static_cast<std::size_t>(i),
                           std::vector<double>{tracs::standard_normal(rng), tracs::standard_normal(rng),
                                               tracs::standard_normal(rng)},
                           std::array<double, 4>{tracs::standard_normal(rng), 0.0, 1.0, -1.0});
    }
    for (auto _ : state) benchmark::DoNotOptimize(tracs::aggregate(preds, vocab));
}
BENCHMARK(BM_Aggregate)->Arg(10)->Arg(100);

void BM_Evaluate(benchmark::State& state) {
    const tracs::LabelVocabulary vocab({"CHANDRA", "HST", "JWST"});
    tracs::Rng rng(2);
    std::vector<tracs::DocumentLabels> gold, pred;
    for (std::int64_t i = 0; i < state.range(0); ++i) {
        const auto id = "d" + std::to_string(i);
        gold.push_back({id, vocab.name_of(tracs::uniform_below(rng, 3)), {true, false, true, false}});
        pred.push_back({id, vocab.name_of(tracs::uniform_below(rng, 3)), {true, true, false, false}});
    }
    for (auto _ : state) benchmark::DoNotOptimize(tracs::evaluate(pred, gold, vocab));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Evaluate)->Arg(1000)->Arg(9194);

}  // namespace
