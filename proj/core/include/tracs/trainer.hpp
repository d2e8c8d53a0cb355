#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tracs/chunker.hpp"
#include "tracs/corpus.hpp"
#include "tracs/inference.hpp"
#include "tracs/loss.hpp"
#include "tracs/metrics.hpp"
#include "tracs/model.hpp"
#include "tracs/optimizer.hpp"

namespace tracs {

// Defaults reproduce the published fine-tuning setup: AdamW, lr 2e-5,
// linear schedule, batch size 8, 4 epochs.
struct TrainConfig {
    std::string optimizer = "adamw";
    double learning_rate = 2e-5;
    std::string schedule = "linear";
    std::size_t warmup_steps = 0;
    std::size_t batch_size = 8;
    std::size_t epochs = 4;
    std::uint64_t seed = 42;
    SelectionMode mode = SelectionMode::sample;
    std::size_t k = kDefaultSampleK;
    double validation_fraction = 0.1;
    double weight_decay = 0.01;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double grad_clip = 1.0;
    BooleanReduction boolean_reduction = BooleanReduction::mean;
    double telescope_loss_weight = 1.0;
    double boolean_loss_weight = 1.0;
    double threshold = 0.5;
    BoolF1Variant bool_f1 = BoolF1Variant::positive;
    std::uint64_t head_init_seed = kDefaultHeadSeed;
    bool freeze_encoder = false;

    void validate() const;
    nlohmann::json to_json() const;
    // Unknown keys raise ConfigError; missing keys keep their defaults.
    static TrainConfig from_json(const nlohmann::json& j);
    // Stable hash of the canonical JSON form.
    std::string fingerprint() const;

    LossConfig loss() const {
        return {boolean_reduction, telescope_loss_weight, boolean_loss_weight};
    }
    std::size_t total_steps(std::size_t train_chunk_count) const;
};

// Linear warmup to learning_rate over warmup_steps, then linear decay to 0
// at total_steps. Throws ConfigError when step > total_steps.
double lr_at_step(const TrainConfig& config, std::size_t step, std::size_t total_steps);

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
};

// Document-level split stratified by telescope class: each class sends
// round(n * fraction) documents (at least 1, at most n - 1) to validation.
// Throws ValidationError when a class has fewer than 2 documents.
SplitIndices split_train_validation(const std::vector<std::string>& telescope_per_document,
                                    double fraction, std::uint64_t seed);

std::pair<std::vector<PaperRecord>, std::vector<PaperRecord>> split_train_validation(
    const std::vector<PaperRecord>& records, double fraction, std::uint64_t seed);

// Padded batch: row-major tokens [size x max_length] plus a 0/1 mask.
struct Batch {
    std::size_t size = 0;
    std::size_t max_length = 0;
    std::vector<TokenId> tokens;
    std::vector<std::uint8_t> mask;
    std::vector<const Chunk*> chunks;

    std::span<const TokenId> row_tokens(std::size_t i) const {
        return std::span<const TokenId>(tokens).subspan(i * max_length, max_length);
    }
    std::span<const std::uint8_t> row_mask(std::size_t i) const {
        return std::span<const std::uint8_t>(mask).subspan(i * max_length, max_length);
    }
};

Batch assemble_batch(std::span<const Chunk* const> chunks, TokenId pad_id);

struct EpochMetrics {
    std::size_t epoch = 0;
    EvalReport validation;
};

struct TrainResult {
    std::filesystem::path best_dir;
    std::filesystem::path last_dir;
    std::size_t best_epoch = 0;
    double best_val_composite = -1.0;
    std::size_t steps = 0;
    std::size_t total_steps = 0;
    std::size_t train_documents = 0;
    std::size_t validation_documents = 0;
    std::size_t train_chunks = 0;
    std::vector<EpochMetrics> epochs;
    std::vector<std::string> validation_bibcodes;
};

struct TrainHooks {
    // Called before each optimizer step with the chunks of the batch.
    std::function<void(std::size_t step, std::size_t epoch, std::span<const Chunk* const>)> on_batch;
    // Called with each step's mean batch loss.
    std::function<void(std::size_t step, double loss)> on_loss;
};

struct TrainContext {
    std::filesystem::path out_dir;
    std::string tokenizer;
    std::size_t window = kDefaultWindow;
    TokenId pad_id = 0;
    // Continue from out_dir/last when present.
    bool resume = false;
    // Stop after this many epochs in this call (0 = run to config.epochs).
    std::size_t stop_after_epochs = 0;
};

// Fine-tunes `model` on labeled chunks. Writes out_dir/train_log.jsonl,
// out_dir/last (after every epoch) and out_dir/best (highest validation
// composite, ties to the later epoch). On a non-finite loss the run stops
// with NumericError and the checkpoints already on disk are left intact.
TrainResult train(const TrainConfig& config, const std::vector<Chunk>& chunks, Model& model,
                  const LabelVocabulary& vocabulary, const TrainContext& context,
                  const TrainHooks& hooks = {});

// Chunk-level predictions aggregated per document and scored.
EvalReport evaluate_chunks(const Model& model, const std::vector<ChunkedEntry>& entries,
                           const LabelVocabulary& vocabulary, const AggregationConfig& aggregation,
                           BoolF1Variant variant);

}  // namespace tracs
