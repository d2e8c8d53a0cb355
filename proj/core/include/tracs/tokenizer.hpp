#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace tracs {

using TokenId = std::int32_t;

// Ids of the reserved tokens. `cls` leads every chunk and is the pooled
// position; `sep` terminates it; `pad` fills batches.
struct SpecialTokens {
    TokenId pad = 0;
    TokenId unk = 1;
    TokenId cls = 2;
    TokenId sep = 3;
};

class Tokenizer {
public:
    virtual ~Tokenizer() = default;

    // Content tokens only; special tokens are added by the chunker.
    // Deterministic, and encode("") is empty.
    virtual std::vector<TokenId> encode(std::string_view text) const = 0;
    virtual std::size_t vocabulary_size() const noexcept = 0;
    virtual SpecialTokens special_tokens() const noexcept = 0;
    // Stable identifier stored in manifests and checkpoints, e.g. "hash-word:16384".
    virtual std::string identifier() const = 0;
};

// Lowercases and splits on whitespace and ASCII punctuation (each punctuation
// character becomes its own word), the way BERT's basic tokenizer does.
std::vector<std::string_view> basic_split(std::string_view text, std::string& lowered);

// Word-level tokenizer with a hashed vocabulary: no vocabulary file needed,
// ids in [4, vocabulary_size). Used for synthetic corpora and tests.
class HashWordTokenizer final : public Tokenizer {
public:
    explicit HashWordTokenizer(std::size_t vocabulary_size = 16384);

    std::vector<TokenId> encode(std::string_view text) const override;
    std::size_t vocabulary_size() const noexcept override { return vocabulary_size_; }
    SpecialTokens special_tokens() const noexcept override { return {}; }
    std::string identifier() const override;

private:
    std::size_t vocabulary_size_;
};

// Greedy longest-match-first WordPiece over a BERT-style vocab.txt
// (one token per line, continuation pieces prefixed with "##").
class WordPieceTokenizer final : public Tokenizer {
public:
    static WordPieceTokenizer from_file(const std::filesystem::path& vocab_txt);
    explicit WordPieceTokenizer(std::vector<std::string> vocabulary, std::string source = "inline");

    std::vector<TokenId> encode(std::string_view text) const override;
    std::size_t vocabulary_size() const noexcept override { return vocabulary_.size(); }
    SpecialTokens special_tokens() const noexcept override { return special_; }
    std::string identifier() const override;

    const std::vector<std::string>& vocabulary() const noexcept { return vocabulary_; }

private:
    std::vector<std::string> vocabulary_;
    std::unordered_map<std::string, TokenId> index_;
    SpecialTokens special_;
    std::string source_;
    std::size_t max_input_chars_per_word_ = 100;
};

// Builds a tokenizer from its identifier. "wordpiece:<path>" paths are
// resolved relative to `base_dir` when not absolute.
std::unique_ptr<Tokenizer> make_tokenizer(std::string_view identifier,
                                          const std::filesystem::path& base_dir = {});

}  // namespace tracs
