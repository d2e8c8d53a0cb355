#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tracs/corpus.hpp"
#include "tracs/metrics.hpp"
#include "tracs/model.hpp"
#include "tracs/tokenizer.hpp"

namespace tracs {

struct AggregationConfig {
    // sigmoid(logit) >= threshold casts a yes-vote.
    double threshold = 0.5;
};

struct DocumentPrediction {
    std::string bibcode;
    std::size_t telescope_id = 0;
    std::string telescope;
    BooleanLabels booleans{};
    std::size_t n_chunks = 0;

    std::vector<std::size_t> telescope_votes;
    // (yes, no) per boolean label.
    std::array<std::array<std::size_t, 2>, kNumBooleanLabels> boolean_votes{};
    bool telescope_tie_broken = false;
    std::array<bool, kNumBooleanLabels> boolean_tie_broken{};
    std::vector<double> mean_telescope_probability;
    std::array<double, kNumBooleanLabels> mean_boolean_probability{};

    DocumentLabels labels() const { return {bibcode, telescope, booleans}; }

    nlohmann::json to_json() const;
    static DocumentPrediction from_json(const nlohmann::json& j);
};

// Chunks ALL segments of the record and runs the model on each, in
// chunk_index order. Never returns an empty list.
std::vector<ChunkPrediction> predict_document(const Model& model, const Tokenizer& tokenizer,
                                              const PaperRecord& record,
                                              std::size_t window = kDefaultWindow);

// Hard-vote majority. Telescope: plurality of per-chunk argmax; ties go to
// the highest mean softmax probability, then to the lowest class id.
// Booleans: strict majority of yes-votes; on an exact tie the mean sigmoid
// probability is compared to the threshold. Mean probabilities within
// 1e-12 of each other (or of the threshold) count as tied.
DocumentPrediction aggregate(std::span<const ChunkPrediction> predictions,
                             const LabelVocabulary& vocabulary,
                             const AggregationConfig& config = {});

// Throws ConfigError when the model, vocabulary and tokenizer disagree.
void check_compatible(const Model& model, const LabelVocabulary& vocabulary,
                      const Tokenizer& tokenizer);

std::vector<DocumentPrediction> predict_corpus(const Model& model, const Tokenizer& tokenizer,
                                               const LabelVocabulary& vocabulary,
                                               const std::vector<PaperRecord>& records,
                                               std::size_t window = kDefaultWindow,
                                               const AggregationConfig& config = {});

inline constexpr std::array<std::string_view, 6> kPredictionColumns = {
    "bibcode", "telescope", "science", "instrumentation", "mention", "not_telescope"};

// Header bibcode,telescope,science,instrumentation,mention,not_telescope; booleans as 0/1.
void write_predictions_csv(const std::filesystem::path& path,
                           const std::vector<DocumentPrediction>& predictions);
std::string predictions_csv(const std::vector<DocumentLabels>& labels);

// Reads either the 6-column predictions shape or a full labeled corpus CSV.
std::vector<DocumentLabels> read_labels_csv(const std::filesystem::path& path);

void write_evidence_jsonl(const std::filesystem::path& path,
                          const std::vector<DocumentPrediction>& predictions);
std::vector<DocumentPrediction> read_evidence_jsonl(const std::filesystem::path& path);

// Untrained-heads baseline: the encoder in frozen mode, heads at their
// seeded random initialization, full predict + aggregate + score pipeline.
EvalReport frozen_baseline(const Model& model, const Tokenizer& tokenizer,
                           const LabelVocabulary& vocabulary,
                           const std::vector<PaperRecord>& records,
                           std::size_t window = kDefaultWindow,
                           const AggregationConfig& config = {},
                           BoolF1Variant variant = BoolF1Variant::positive);

}  // namespace tracs
