#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tracs/inference.hpp"
#include "tracs/metrics.hpp"

namespace tracs {

struct LabelErrorRate {
    std::string label;
    std::size_t errors = 0;
    std::size_t correct = 0;

    double rate() const noexcept {
        const auto n = errors + correct;
        return n ? static_cast<double>(errors) / static_cast<double>(n) : 0.0;
    }
};

struct ExampleRow {
    DocumentLabels gold;
    DocumentLabels predicted;
    // Filled only when evidence was supplied.
    std::optional<DocumentPrediction> evidence;

    bool telescope_match() const { return gold.telescope == predicted.telescope; }
    bool boolean_match(std::size_t i) const { return gold.booleans[i] == predicted.booleans[i]; }
    bool all_match() const;
};

struct ReportOptions {
    std::size_t correct_rows = 4;
    std::size_t incorrect_rows = 4;
    std::uint64_t seed = 0;
    BoolF1Variant variant = BoolF1Variant::positive;
};

struct ErrorAnalysis {
    EvalReport metrics;
    // "telescope" first, then the four boolean labels.
    std::vector<LabelErrorRate> error_rates;
    std::vector<ExampleRow> correct_examples;
    std::vector<ExampleRow> incorrect_examples;
    bool has_evidence = false;
    std::vector<std::string> warnings;

    std::string markdown() const;
    // Writes report.md, error_rates.csv, metrics.json, confusion.csv and
    // confusion.png into `dir`.
    void write(const std::filesystem::path& dir) const;
};

// `evidence` may be null: the report is then produced without tie-break
// columns and carries a warning. When present it must cover exactly the
// predicted documents with the same labels.
ErrorAnalysis error_analysis_report(const std::vector<DocumentLabels>& predictions,
                                    const std::vector<DocumentLabels>& gold,
                                    const LabelVocabulary& vocabulary,
                                    const std::vector<DocumentPrediction>* evidence,
                                    const ReportOptions& options = {});

}  // namespace tracs
