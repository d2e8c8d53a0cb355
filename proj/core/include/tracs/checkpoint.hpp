#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "tracs/corpus.hpp"
#include "tracs/model.hpp"
#include "tracs/optimizer.hpp"
#include "tracs/tokenizer.hpp"

namespace tracs {

// Directory layout:
//   manifest.json   {"encoder", "hidden_size", "num_classes", "boolean_labels",
//                    "created", "tokenizer", "window", "config_fingerprint",
//                    "encoder_config"}
//   vocabulary.json {"classes": [...]}
//   encoder.bin, head.bin   parameter tensors
//   optimizer.bin           optional AdamW moments
//   state.json              optional trainer state
//   vocab.txt               copied WordPiece vocabulary, when used
struct CheckpointMeta {
    std::string tokenizer;
    std::size_t window = 512;
    std::string config_fingerprint;
    nlohmann::json state;  // trainer state; null when absent
};

void save_checkpoint(const std::filesystem::path& dir, const Model& model,
                     const LabelVocabulary& vocabulary, const CheckpointMeta& meta,
                     const AdamW* optimizer = nullptr);

struct LoadedCheckpoint {
    std::unique_ptr<Model> model;
    LabelVocabulary vocabulary;
    std::unique_ptr<Tokenizer> tokenizer;
    CheckpointMeta meta;
    nlohmann::json manifest;
    std::filesystem::path dir;
};

// Validates manifest, vocabulary and tensor shapes against each other before
// returning; any disagreement raises SchemaError.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir);

// Restores optimizer moments saved alongside the checkpoint.
void load_optimizer_state(const std::filesystem::path& dir, AdamW& optimizer);

bool checkpoint_exists(const std::filesystem::path& dir);

}  // namespace tracs
