#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "tracs/corpus.hpp"

namespace tracs {

// positive: F1 of the positive class. macro_binary: mean of the F1 of the
// positive and of the negative class.
enum class BoolF1Variant { positive, macro_binary };

BoolF1Variant parse_bool_f1_variant(std::string_view s);
std::string_view to_string(BoolF1Variant v);

// 2TP / (2TP + FP + FN), 0 when the denominator is 0 (including empty input).
double f1_binary(std::span<const std::uint8_t> predictions, std::span<const std::uint8_t> gold);
double f1_boolean(std::span<const std::uint8_t> predictions, std::span<const std::uint8_t> gold,
                  BoolF1Variant variant);

// One-vs-rest F1 for each of the K classes.
std::vector<double> per_class_f1(std::span<const std::size_t> predictions,
                                 std::span<const std::size_t> gold, std::size_t num_classes);
// Unweighted mean of per_class_f1 over all K classes.
double macro_f1_multiclass(std::span<const std::size_t> predictions,
                           std::span<const std::size_t> gold, std::size_t num_classes);

// (multiclass_f1 + mean(boolean_f1s)) / 2. Inputs must lie in [0, 1].
double composite_metric(double multiclass_f1, std::span<const double> boolean_f1s);

struct ConfusionMatrix {
    std::vector<std::string> classes;
    // counts[gold][predicted]
    std::vector<std::vector<std::size_t>> counts;

    std::size_t total() const;
    std::string to_csv() const;
};

ConfusionMatrix confusion_matrix(std::span<const std::string> predictions,
                                 std::span<const std::string> gold,
                                 const LabelVocabulary& vocabulary);

// Document-level labels, predicted or gold.
struct DocumentLabels {
    std::string bibcode;
    std::string telescope;
    BooleanLabels booleans{};

    friend bool operator==(const DocumentLabels&, const DocumentLabels&) = default;
};

struct EvalReport {
    double multiclass_f1 = 0.0;
    std::array<double, kNumBooleanLabels> boolean_f1{};
    double composite = 0.0;
    ConfusionMatrix confusion;
    std::vector<double> per_class_f1;
    std::size_t n_documents = 0;
    BoolF1Variant variant = BoolF1Variant::positive;

    static constexpr std::size_t N = kNumBooleanLabels;

    // {"multiclass_f1", "boolean_f1": {label: f1}, "composite", "n_documents"}
    nlohmann::json metrics_json() const;
    // metrics_json plus per-class F1, confusion matrix and variant.
    nlohmann::json full_json() const;
};

// Joins predictions to gold by bibcode. Every gold document needs exactly
// one prediction; unknown class names raise ValidationError.
EvalReport evaluate(const std::vector<DocumentLabels>& predictions,
                    const std::vector<DocumentLabels>& gold, const LabelVocabulary& vocabulary,
                    BoolF1Variant variant = BoolF1Variant::positive);

std::vector<DocumentLabels> gold_labels(const std::vector<PaperRecord>& records);

// uniform: every class and both boolean values equally likely.
// empirical: class and per-label positive frequencies of the records.
enum class BaselinePrior { uniform, empirical };

BaselinePrior parse_baseline_prior(std::string_view s);
std::string_view to_string(BaselinePrior p);

// Random guessing under `prior`, scored against the records' labels.
EvalReport random_baseline(const std::vector<PaperRecord>& records,
                           const LabelVocabulary& vocabulary, std::uint64_t seed,
                           BoolF1Variant variant = BoolF1Variant::positive,
                           BaselinePrior prior = BaselinePrior::uniform);

void write_metrics_json(const std::filesystem::path& path, const EvalReport& report);

}  // namespace tracs
