#include "tracs/tokenizer.hpp"

#include <cctype>
#include <charconv>
#include <fstream>

#include "tracs/errors.hpp"
#include "tracs/rng.hpp"

namespace tracs {
namespace {

bool is_ascii_punct(unsigned char c) {
    return (c >= 33 && c <= 47) || (c >= 58 && c <= 64) || (c >= 91 && c <= 96) ||
           (c >= 123 && c <= 126);
}

constexpr TokenId kHashReserved = 4;

}  // namespace

std::vector<std::string_view> basic_split(std::string_view text, std::string& lowered) {
    lowered.assign(text);
    for (char& c : lowered) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    std::vector<std::string_view> words;
    const std::string_view s(lowered);
    std::size_t start = 0;
    bool in_word = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const auto c = static_cast<unsigned char>(s[i]);
        if (std::isspace(c) || c < 32) {
            if (in_word) words.push_back(s.substr(start, i - start));
            in_word = false;
        } else if (is_ascii_punct(c)) {
            if (in_word) words.push_back(s.substr(start, i - start));
            words.push_back(s.substr(i, 1));
            in_word = false;
        } else if (!in_word) {
            start = i;
            in_word = true;
        }
    }
    if (in_word) words.push_back(s.substr(start));
    return words;
}

HashWordTokenizer::HashWordTokenizer(std::size_t vocabulary_size)
    : vocabulary_size_(vocabulary_size) {
    if (vocabulary_size < 16) throw ConfigError("hash-word vocabulary must hold at least 16 ids");
}

std::vector<TokenId> HashWordTokenizer::encode(std::string_view text) const {
    std::string lowered;
    const auto words = basic_split(text, lowered);
    std::vector<TokenId> ids;
    ids.reserve(words.size());
    const std::uint64_t buckets = vocabulary_size_ - kHashReserved;
    for (const auto w : words) {
        ids.push_back(static_cast<TokenId>(kHashReserved + fnv1a64(w) % buckets));
    }
    return ids;
}

std::string HashWordTokenizer::identifier() const {
    return "hash-word:" + std::to_string(vocabulary_size_);
}

WordPieceTokenizer::WordPieceTokenizer(std::vector<std::string> vocabulary, std::string source)
    : vocabulary_(std::move(vocabulary)), source_(std::move(source)) {
    for (std::size_t i = 0; i < vocabulary_.size(); ++i) {
        index_.emplace(vocabulary_[i], static_cast<TokenId>(i));
    }
    auto required = [&](const char* tok) {
        const auto it = index_.find(tok);
        if (it == index_.end()) {
            throw SchemaError(std::string("WordPiece vocabulary lacks special token ") + tok);
        }
        return it->second;
    };
    special_.pad = required("[PAD]");
    special_.unk = required("[UNK]");
    special_.cls = required("[CLS]");
    special_.sep = required("[SEP]");
}

WordPieceTokenizer WordPieceTokenizer::from_file(const std::filesystem::path& vocab_txt) {
    std::ifstream in(vocab_txt);
    if (!in) throw IoError("cannot open WordPiece vocabulary " + vocab_txt.string());
    std::vector<std::string> vocab;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        vocab.push_back(line);
    }
    return WordPieceTokenizer(std::move(vocab), vocab_txt.string());
}

std::vector<TokenId> WordPieceTokenizer::encode(std::string_view text) const {
    std::string lowered;
    const auto words = basic_split(text, lowered);
    std::vector<TokenId> ids;
    ids.reserve(words.size() * 2);
    std::string piece;
    std::vector<TokenId> word_ids;
    for (const auto w : words) {
        if (w.size() > max_input_chars_per_word_) {
            ids.push_back(special_.unk);
            continue;
        }
        word_ids.clear();
        std::size_t start = 0;
        bool bad = false;
        while (start < w.size()) {
            std::size_t end = w.size();
            TokenId found = -1;
            while (start < end) {
                piece.clear();
                if (start > 0) piece = "##";
                piece.append(w.substr(start, end - start));
                if (auto it = index_.find(piece); it != index_.end()) {
                    found = it->second;
                    break;
                }
                --end;
            }
            if (found < 0) {
                bad = true;
                break;
            }
            word_ids.push_back(found);
            start = end;
        }
        if (bad) {
            ids.push_back(special_.unk);
        } else {
            ids.insert(ids.end(), word_ids.begin(), word_ids.end());
        }
    }
    return ids;
}

std::string WordPieceTokenizer::identifier() const { return "wordpiece:" + source_; }

std::unique_ptr<Tokenizer> make_tokenizer(std::string_view identifier,
                                          const std::filesystem::path& base_dir) {
    const auto colon = identifier.find(':');
    const auto kind = identifier.substr(0, colon);
    const auto arg = colon == std::string_view::npos ? std::string_view{} : identifier.substr(colon + 1);
    if (kind == "hash-word") {
        std::size_t size = 16384;
        if (!arg.empty()) {
            const auto [ptr, ec] = std::from_chars(arg.data(), arg.data() + arg.size(), size);
            if (ec != std::errc{} || ptr != arg.data() + arg.size()) {
                throw ConfigError("bad hash-word vocabulary size '" + std::string(arg) + "'");
            }
        }
        return std::make_unique<HashWordTokenizer>(size);
    }
    if (kind == "wordpiece") {
        if (arg.empty()) throw ConfigError("wordpiece tokenizer needs a vocab path: wordpiece:<path>");
        std::filesystem::path p{std::string(arg)};
        if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
        return std::make_unique<WordPieceTokenizer>(WordPieceTokenizer::from_file(p));
    }
    throw ConfigError("unknown tokenizer '" + std::string(identifier) + "'");
}

}  // namespace tracs
