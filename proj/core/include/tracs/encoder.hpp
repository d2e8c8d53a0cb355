#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "tracs/parameters.hpp"
#include "tracs/tokenizer.hpp"

namespace tracs {

enum class EncoderMode { frozen, trainable };

// Opaque per-sequence activations kept between forward and backward.
struct EncoderTrace {
    virtual ~EncoderTrace() = default;
};

// Maps a token sequence to the pooled representation at position 0 (the
// leading [CLS] slot). `mask[i] == 0` marks padding; padded positions are
// excluded from attention and never influence unpadded ones.
class Encoder {
public:
    virtual ~Encoder() = default;

    virtual std::size_t hidden_size() const noexcept = 0;
    virtual std::size_t vocabulary_size() const noexcept = 0;
    virtual std::size_t max_positions() const noexcept = 0;
    // Short human-readable identifier, written to checkpoint manifests.
    virtual std::string identifier() const = 0;
    virtual nlohmann::json config_json() const = 0;

    virtual ParameterStore& parameters() noexcept = 0;
    virtual const ParameterStore& parameters() const noexcept = 0;

    EncoderMode mode() const noexcept { return mode_; }
    void set_mode(EncoderMode mode) noexcept { mode_ = mode; }

    virtual std::unique_ptr<EncoderTrace> make_trace() const = 0;

    // `trace` may be null when no backward pass follows. Throws
    // ValidationError for out-of-vocabulary ids or a padded position 0.
    virtual Vector forward(std::span<const TokenId> tokens, std::span<const std::uint8_t> mask,
                           EncoderTrace* trace) const = 0;

    // Accumulates d(loss)/d(parameters) into `grads` (same layout as parameters()).
    virtual void backward(const EncoderTrace& trace, const Vector& d_pooled,
                          std::span<double> grads) const = 0;

private:
    EncoderMode mode_ = EncoderMode::trainable;
};

struct TransformerConfig {
    std::size_t vocabulary_size = 16384;
    std::size_t hidden_size = 32;
    std::size_t layers = 2;
    std::size_t heads = 2;
    std::size_t ffn_size = 64;
    std::size_t max_positions = 512;
    double layer_norm_eps = 1e-12;
    double init_std = 0.02;
    std::uint64_t init_seed = 42;

    nlohmann::json to_json() const;
    static TransformerConfig from_json(const nlohmann::json& j);
};

// Post-LN BERT-style encoder: token + position embeddings, embedding
// layer norm, then `layers` blocks of multi-head self-attention and a GELU
// feed-forward, each followed by residual + layer norm.
class TransformerEncoder final : public Encoder {
public:
    explicit TransformerEncoder(const TransformerConfig& config);

    std::size_t hidden_size() const noexcept override { return config_.hidden_size; }
    std::size_t vocabulary_size() const noexcept override { return config_.vocabulary_size; }
    std::size_t max_positions() const noexcept override { return config_.max_positions; }
    std::string identifier() const override;
    nlohmann::json config_json() const override { return config_.to_json(); }
    const TransformerConfig& config() const noexcept { return config_; }

    ParameterStore& parameters() noexcept override { return params_; }
    const ParameterStore& parameters() const noexcept override { return params_; }

    // Normal(0, init_std) weights, zero biases, unit layer-norm gains.
    void initialize(std::uint64_t seed);

    std::unique_ptr<EncoderTrace> make_trace() const override;
    Vector forward(std::span<const TokenId> tokens, std::span<const std::uint8_t> mask,
                   EncoderTrace* trace) const override;
    void backward(const EncoderTrace& trace, const Vector& d_pooled,
                  std::span<double> grads) const override;

private:
    struct LayerIds {
        std::size_t wq, bq, wk, bk, wv, bv, wo, bo, ln1_g, ln1_b, w1, b1, w2, b2, ln2_g, ln2_b;
    };

    TransformerConfig config_;
    ParameterStore params_;
    std::size_t token_embedding_ = 0;
    std::size_t position_embedding_ = 0;
    std::size_t embedding_ln_g_ = 0;
    std::size_t embedding_ln_b_ = 0;
    std::vector<LayerIds> layers_;
};

std::unique_ptr<Encoder> make_encoder(const nlohmann::json& encoder_config);

}  // namespace tracs
