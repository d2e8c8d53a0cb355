#include "tracs/chunker.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "tracs/errors.hpp"
#include "tracs/rng.hpp"

namespace tracs {

using nlohmann::json;

SelectionMode parse_selection_mode(std::string_view s) {
    if (s == "first") return SelectionMode::first;
    if (s == "sample") return SelectionMode::sample;
    throw ConfigError("selection mode must be 'first' or 'sample', got '" + std::string(s) + "'");
}

std::string_view to_string(SelectionMode mode) {
    return mode == SelectionMode::first ? "first" : "sample";
}

std::vector<Chunk> chunk_tokens(const std::vector<TokenId>& content, const SpecialTokens& special,
                                std::size_t window) {
    if (window < kMinWindow) {
        throw ConfigError("window must be >= " + std::to_string(kMinWindow) + ", got " +
                          std::to_string(window));
    }
    const std::size_t per_chunk = window - 2;
    const std::size_t n = std::max<std::size_t>(1, (content.size() + per_chunk - 1) / per_chunk);
    std::vector<Chunk> chunks(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t begin = i * per_chunk;
        const std::size_t end = std::min(content.size(), begin + per_chunk);
        auto& c = chunks[i];
        c.chunk_index = i;
        c.n_chunks = n;
        c.token_ids.reserve(end - begin + 2);
        c.token_ids.push_back(special.cls);
        c.token_ids.insert(c.token_ids.end(), content.begin() + static_cast<std::ptrdiff_t>(begin),
                           content.begin() + static_cast<std::ptrdiff_t>(end));
        c.token_ids.push_back(special.sep);
    }
    return chunks;
}

std::vector<Chunk> chunk_document(std::string_view text, const Tokenizer& tokenizer,
                                  std::size_t window) {
    if (window < kMinWindow) {
        throw ConfigError("window must be >= " + std::to_string(kMinWindow) + ", got " +
                          std::to_string(window));
    }
    return chunk_tokens(tokenizer.encode(text), tokenizer.special_tokens(), window);
}

ChunkedEntry chunk_record(const PaperRecord& record, const Tokenizer& tokenizer,
                          std::size_t window) {
    ChunkedEntry entry;
    entry.bibcode = record.bibcode;
    entry.chunks = chunk_document(concatenate_fields(record), tokenizer, window);
    for (auto& c : entry.chunks) {
        c.bibcode = record.bibcode;
        c.telescope = record.telescope;
        c.booleans = record.booleans;
    }
    return entry;
}

std::vector<Chunk> select_chunks(const std::vector<Chunk>& chunks, SelectionMode mode,
                                 std::size_t k, std::uint64_t seed) {
    if (chunks.empty()) throw ValidationError("select_chunks: empty chunk list");
    for (const auto& c : chunks) {
        if (c.bibcode != chunks.front().bibcode) {
            throw ValidationError("select_chunks: chunks from different parents (" +
                                  chunks.front().bibcode + ", " + c.bibcode + ")");
        }
    }
    if (mode == SelectionMode::first) {
        const auto it = std::find_if(chunks.begin(), chunks.end(),
                                     [](const Chunk& c) { return c.chunk_index == 0; });
        if (it == chunks.end()) {
            throw ValidationError("select_chunks(first): " + chunks.front().bibcode +
                                  " has no chunk 0");
        }
        return {*it};
    }
    if (k == 0) throw ConfigError("select_chunks: k must be positive");

    const std::size_t n = chunks.size();
    const std::size_t m = std::min(k, n);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    // Sort by chunk_index first so the draw does not depend on input order.
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return chunks[a].chunk_index < chunks[b].chunk_index;
    });
    Rng rng(derive_seed(seed, chunks.front().bibcode));
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(uniform_below(rng, n - i));
        std::swap(order[i], order[j]);
    }
    order.resize(m);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return chunks[a].chunk_index < chunks[b].chunk_index;
    });
    std::vector<Chunk> out;
    out.reserve(m);
    for (auto i : order) out.push_back(chunks[i]);
    return out;
}

TokenBudget token_budget(const std::vector<Chunk>& selected) {
    TokenBudget b;
    for (const auto& c : selected) {
        b.stored += c.token_ids.size();
        b.content += c.content_size();
        ++b.chunks;
    }
    return b;
}

TokenBudget token_budget(const std::vector<ChunkedEntry>& entries, SelectionMode mode,
                         std::size_t k, std::uint64_t seed) {
    TokenBudget total;
    for (const auto& e : entries) total += token_budget(select_chunks(e.chunks, mode, k, seed));
    return total;
}

std::string shard_file_name(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "shard-%05zu.json", index);
    return buf;
}

std::string chunk_to_json(const Chunk& c) {
    json j;
    j["bibcode"] = c.bibcode;
    j["telescope"] = c.telescope ? json(*c.telescope) : json(nullptr);
    j["chunk_index"] = c.chunk_index;
    j["n_chunks"] = c.n_chunks;
    j["tokens"] = c.token_ids;
    if (c.booleans) {
        json labels = json::object();
        for (std::size_t b = 0; b < kNumBooleanLabels; ++b) {
            labels[std::string(kBooleanLabelNames[b])] = (*c.booleans)[b] ? 1 : 0;
        }
        j["labels"] = std::move(labels);
    } else {
        j["labels"] = nullptr;
    }
    return j.dump();
}

namespace {

Chunk chunk_from_json_value(const json& j, const std::string& where) {
    static const std::vector<std::string> keys = {"bibcode", "telescope", "chunk_index",
                                                  "n_chunks", "tokens", "labels"};
    auto fail = [&](const std::string& why) -> void { throw SchemaError(where + ": " + why); };
    if (!j.is_object()) fail("entry is not an object");
    for (const auto& k : keys) {
        if (!j.contains(k)) fail("missing key '" + k + "'");
    }
    for (const auto& [k, v] : j.items()) {
        if (std::find(keys.begin(), keys.end(), k) == keys.end()) fail("unexpected key '" + k + "'");
    }
    Chunk c;
    if (!j["bibcode"].is_string()) fail("'bibcode' must be a string");
    c.bibcode = j["bibcode"].get<std::string>();
    if (c.bibcode.empty()) fail("'bibcode' is empty");
    if (j["telescope"].is_string()) {
        c.telescope = j["telescope"].get<std::string>();
    } else if (!j["telescope"].is_null()) {
        fail("'telescope' must be a string or null");
    }
    if (!j["chunk_index"].is_number_unsigned()) fail("'chunk_index' must be a non-negative integer");
    if (!j["n_chunks"].is_number_unsigned()) fail("'n_chunks' must be a non-negative integer");
    c.chunk_index = j["chunk_index"].get<std::size_t>();
    c.n_chunks = j["n_chunks"].get<std::size_t>();
    if (c.chunk_index >= c.n_chunks) fail("'chunk_index' must be < 'n_chunks'");
    if (!j["tokens"].is_array()) fail("'tokens' must be an array");
    c.token_ids.reserve(j["tokens"].size());
    for (const auto& t : j["tokens"]) {
        if (!t.is_number_integer()) fail("'tokens' must hold integers");
        c.token_ids.push_back(t.get<TokenId>());
    }
    if (c.token_ids.size() < 2) fail("'tokens' must hold at least the two special tokens");
    const auto& labels = j["labels"];
    if (labels.is_object()) {
        if (labels.size() != kNumBooleanLabels) fail("'labels' must have exactly four keys");
        BooleanLabels b{};
        for (std::size_t i = 0; i < kNumBooleanLabels; ++i) {
            const std::string name(kBooleanLabelNames[i]);
            if (!labels.contains(name)) fail("'labels' missing '" + name + "'");
            const auto& v = labels[name];
            if (!v.is_number_integer() || (v.get<int>() != 0 && v.get<int>() != 1)) {
                fail("'labels." + name + "' must be 0 or 1");
            }
            b[i] = v.get<int>() == 1;
        }
        c.booleans = b;
    } else if (!labels.is_null()) {
        fail("'labels' must be an object or null");
    }
    return c;
}

}  // namespace

Chunk chunk_from_json(std::string_view text, const std::string& where) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw SchemaError(where + ": " + e.what());
    }
    return chunk_from_json_value(j, where);
}

ShardWriter::ShardWriter(std::filesystem::path out_dir, std::size_t shard_size)
    : out_dir_(std::move(out_dir)), shard_size_(shard_size) {
    if (shard_size_ < 1) throw ConfigError("shard_size must be >= 1");
    std::error_code ec;
    std::filesystem::create_directories(out_dir_, ec);
    if (ec) throw IoError("cannot create " + out_dir_.string() + ": " + ec.message());
}

ShardWriter::~ShardWriter() {
    try {
        close_current();
    } catch (...) {
    }
}

void ShardWriter::open_next() {
    const auto path = out_dir_ / shard_file_name(paths_.size());
    out_.open(path, std::ios::binary | std::ios::trunc);
    if (!out_) throw IoError("cannot write shard " + path.string());
    out_ << "[";
    paths_.push_back(path);
    in_current_ = 0;
    first_in_file_ = true;
}

void ShardWriter::close_current() {
    if (!out_.is_open()) return;
    out_ << (first_in_file_ ? "]\n" : "\n]\n");
    out_.close();
    if (!out_) throw IoError("write failed: " + paths_.back().string());
}

void ShardWriter::add(const ChunkedEntry& entry) {
    if (!out_.is_open() || in_current_ == shard_size_) {
        close_current();
        open_next();
    }
    for (const auto& c : entry.chunks) {
        out_ << (first_in_file_ ? "\n" : ",\n") << chunk_to_json(c);
        first_in_file_ = false;
    }
    if (!out_) throw IoError("write failed: " + paths_.back().string());
    ++in_current_;
    ++entries_;
}

std::vector<std::filesystem::path> ShardWriter::finish() {
    close_current();
    return paths_;
}

std::vector<std::filesystem::path> write_shards(const std::vector<ChunkedEntry>& entries,
                                                const std::filesystem::path& out_dir,
                                                std::size_t shard_size) {
    ShardWriter writer(out_dir, shard_size);
    for (const auto& e : entries) writer.add(e);
    return writer.finish();
}

void for_each_shard_chunk(const std::vector<std::filesystem::path>& paths,
                          const std::function<void(Chunk&&)>& sink) {
    for (const auto& path : paths) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoError("cannot open shard " + path.string());
        json j;
        try {
            j = json::parse(in);
        } catch (const json::exception& e) {
            throw SchemaError(path.string() + ": " + e.what());
        }
        if (!j.is_array()) throw SchemaError(path.string() + ": shard must be a JSON array");
        for (std::size_t i = 0; i < j.size(); ++i) {
            sink(chunk_from_json_value(j[i], path.string() + " entry " + std::to_string(i)));
        }
    }
}

std::vector<Chunk> load_shards(const std::vector<std::filesystem::path>& paths) {
    std::vector<Chunk> out;
    for_each_shard_chunk(paths, [&](Chunk&& c) { out.push_back(std::move(c)); });
    return out;
}

std::vector<std::filesystem::path> list_shards(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> out;
    std::error_code ec;
    for (const auto& e : std::filesystem::directory_iterator(dir, ec)) {
        const auto name = e.path().filename().string();
        if (e.is_regular_file() && name.rfind("shard-", 0) == 0 && e.path().extension() == ".json") {
            out.push_back(e.path());
        }
    }
    if (ec) throw IoError("cannot list " + dir.string() + ": " + ec.message());
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<ChunkedEntry> group_by_record(std::vector<Chunk> chunks) {
    std::vector<ChunkedEntry> out;
    std::unordered_map<std::string, std::size_t> where;
    for (auto& c : chunks) {
        auto [it, inserted] = where.emplace(c.bibcode, out.size());
        if (inserted) out.push_back({c.bibcode, {}});
        out[it->second].chunks.push_back(std::move(c));
    }
    return out;
}

}  // namespace tracs
