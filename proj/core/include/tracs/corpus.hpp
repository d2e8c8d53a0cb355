#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tracs {

// Order of the boolean attribute labels everywhere in the library: head
// outputs, shard labels, metrics and CSV columns.
inline constexpr std::size_t kNumBooleanLabels = 4;
inline constexpr std::array<std::string_view, kNumBooleanLabels> kBooleanLabelNames = {
    "science", "instrumentation", "mention", "not_telescope"};

using BooleanLabels = std::array<bool, kNumBooleanLabels>;

// Exact CSV column names, in canonical write order.
inline constexpr std::array<std::string_view, 13> kCorpusColumns = {
    "bibcode", "telescope", "author",  "year",            "title",     "abstract",     "body",
    "acknowledgments", "grants", "science", "instrumentation", "mention", "not_telescope"};

struct PaperRecord {
    std::string bibcode;
    std::optional<std::string> telescope;
    std::string author;
    std::optional<int> year;
    std::string title;
    std::string abstract;
    std::string body;
    std::string acknowledgments;
    std::string grants;
    std::optional<BooleanLabels> booleans;

    bool is_labeled() const noexcept { return telescope.has_value() && booleans.has_value(); }

    friend bool operator==(const PaperRecord&, const PaperRecord&) = default;
};

struct IngestStats {
    std::size_t rows = 0;
    // Cells holding a "NaN"/"nan"/"NULL" literal that were normalized to "".
    std::size_t null_literal_cells = 0;
    std::size_t empty_text_cells = 0;
};

// Parses a corpus CSV. Throws SchemaError for a missing column,
// ValidationError for duplicate bibcodes, bad booleans or partial label sets.
std::vector<PaperRecord> load_csv(const std::filesystem::path& path, IngestStats* stats = nullptr);
std::vector<PaperRecord> parse_csv(std::string_view text, IngestStats* stats = nullptr);

void write_csv(const std::filesystem::path& path, const std::vector<PaperRecord>& records);
std::string to_csv(const std::vector<PaperRecord>& records);
// Streaming form of to_csv. Booleans are written as TRUE/FALSE.
void write_csv_header(std::ostream& out);
void write_csv_row(std::ostream& out, const PaperRecord& record);

// title, abstract, body, acknowledgments, grants joined by "\n"; empty
// fields are skipped so no separator is ever doubled.
std::string concatenate_fields(const PaperRecord& record);

// Parses TRUE/FALSE/1/0 case-insensitively.
std::optional<bool> parse_bool_cell(std::string_view cell);

class LabelVocabulary {
public:
    LabelVocabulary() = default;
    // Deduplicates and sorts lexicographically.
    explicit LabelVocabulary(std::vector<std::string> names);

    std::size_t size() const noexcept { return classes_.size(); }
    const std::vector<std::string>& classes() const noexcept { return classes_; }
    const std::string& name_of(std::size_t id) const { return classes_.at(id); }
    // Throws ValidationError for an unknown name.
    std::size_t index_of(std::string_view name) const;
    std::optional<std::size_t> find(std::string_view name) const;

    std::string to_json() const;
    static LabelVocabulary from_json(std::string_view text);
    void save(const std::filesystem::path& path) const;
    static LabelVocabulary load(const std::filesystem::path& path);

    friend bool operator==(const LabelVocabulary& a, const LabelVocabulary& b) {
        return a.classes_ == b.classes_;
    }

private:
    std::vector<std::string> classes_;
    std::map<std::string, std::size_t, std::less<>> index_;
};

// Throws ValidationError on an empty list or an unlabeled record.
LabelVocabulary build_vocabulary(const std::vector<PaperRecord>& records);

}  // namespace tracs
