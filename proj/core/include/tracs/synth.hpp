#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tracs/corpus.hpp"

namespace tracs {

// JSON form: {"classes": [...], "docs_per_class": n | [n, ...],
// "tokens_per_doc": n, "correlation": c, "skew": {label: fraction_negative},
// "seed": s, "labeled": bool}. Missing keys keep the defaults below.
struct SynthSpec {
    std::vector<std::string> classes = {"CHANDRA", "HST", "JWST"};
    std::vector<std::size_t> docs_per_class = {100, 100, 100};
    // Exact token count of every document under the hash-word tokenizer.
    std::size_t tokens_per_doc = 600;
    // Probability that a cue slot carries the document's own cue rather
    // than one drawn from a random class / left out.
    double correlation = 0.9;
    // Fraction of documents with the label set to false.
    std::array<double, kNumBooleanLabels> skew = {0.5, 0.9, 0.5, 0.95};
    std::uint64_t seed = 0;
    bool labeled = true;

    void validate() const;
    std::size_t total_documents() const;
    nlohmann::json to_json() const;
    static SynthSpec from_json(const nlohmann::json& j);
    static SynthSpec load(const std::filesystem::path& path);
};

// Deterministic keyword-correlated corpus. Record i depends only on the
// spec and i, so records can be produced lazily in any order.
class SyntheticCorpus {
public:
    explicit SyntheticCorpus(SynthSpec spec);

    const SynthSpec& spec() const noexcept { return spec_; }
    std::size_t size() const noexcept { return class_of_.size(); }
    PaperRecord record(std::size_t i) const;
    std::vector<PaperRecord> records() const;
    // Streams the CSV; identical spec gives a byte-identical file.
    void write_csv(const std::filesystem::path& path) const;

private:
    SynthSpec spec_;
    std::vector<std::size_t> class_of_;
};

}  // namespace tracs
