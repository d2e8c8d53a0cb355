#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "tracs/chunker.hpp"
#include "tracs/corpus.hpp"
#include "tracs/encoder.hpp"

namespace tracs {

// Telescope projection H -> K and boolean projection H -> 4, both reading
// the pooled vector. Boolean logit order is kBooleanLabelNames.
class MultiTaskHead {
public:
    MultiTaskHead(std::size_t hidden_size, std::size_t num_classes);

    std::size_t hidden_size() const noexcept { return hidden_; }
    std::size_t num_classes() const noexcept { return classes_; }

    ParameterStore& parameters() noexcept { return params_; }
    const ParameterStore& parameters() const noexcept { return params_; }

    // Zero biases; weights uniform in [-1/sqrt(H), 1/sqrt(H)] from `seed`.
    void initialize(std::uint64_t seed);

    struct Output {
        Vector telescope;  // K
        Vector booleans;   // 4
    };
    Output forward(const Vector& pooled) const;
    // Accumulates parameter gradients into `grads`; returns d(loss)/d(pooled).
    Vector backward(const Vector& pooled, const Vector& d_telescope, const Vector& d_booleans,
                    std::span<double> grads) const;

private:
    std::size_t hidden_;
    std::size_t classes_;
    ParameterStore params_;
    std::size_t telescope_w_, telescope_b_, boolean_w_, boolean_b_;
};

inline constexpr std::uint64_t kDefaultHeadSeed = 1234;

// Encoder plus multi-task head.
struct Model {
    std::unique_ptr<Encoder> encoder;
    MultiTaskHead head;

    Model(std::unique_ptr<Encoder> enc, std::size_t num_classes,
          std::uint64_t head_seed = kDefaultHeadSeed);
};

struct ChunkPrediction {
    std::string bibcode;
    std::size_t chunk_index = 0;
    std::vector<double> telescope_logits;
    std::array<double, kNumBooleanLabels> boolean_logits{};

    // Throws NumericError unless every logit is finite.
    ChunkPrediction(std::string bibcode, std::size_t chunk_index, std::vector<double> telescope,
                    std::array<double, kNumBooleanLabels> booleans);
};

// Evaluation-mode forward pass over one chunk. `mask` may be empty (all
// positions valid). Throws ValidationError for invalid token ids and
// NumericError naming the chunk for non-finite activations.
ChunkPrediction forward_chunk(const Model& model, const Chunk& chunk,
                              std::span<const std::uint8_t> mask = {});

}  // namespace tracs
