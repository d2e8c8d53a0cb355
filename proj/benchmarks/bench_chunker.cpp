#include <benchmark/benchmark.h>

#include "tracs/chunker.hpp"
#include "tracs/synth.hpp"

namespace {

tracs::PaperRecord long_record(std::size_t tokens) {
    tracs::SynthSpec spec;
    spec.docs_per_class = {1, 0, 0};
    spec.tokens_per_doc = tokens;
    return tracs::SyntheticCorpus(spec).record(0);
}

void BM_ChunkRecord(benchmark::State& state) {
    const auto record = long_record(static_cast<std::size_t>(state.range(0)));
    const tracs::HashWordTokenizer tok;
    for (auto _ : state) benchmark::DoNotOptimize(tracs::chunk_record(record, tok));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ChunkRecord)->Arg(512)->Arg(5100)->Arg(20000);

void BM_SelectSample(benchmark::State& state) {
    const auto record = long_record(static_cast<std::size_t>(state.range(0)));
    const auto entry = tracs::chunk_record(record, tracs::HashWordTokenizer{});
    for (auto _ : state)
        benchmark::DoNotOptimize(tracs::select_chunks(entry.chunks, tracs::SelectionMode::sample, 10, 42));
}
BENCHMARK(BM_SelectSample)->Arg(5100)->Arg(51000);

}  // namespace
