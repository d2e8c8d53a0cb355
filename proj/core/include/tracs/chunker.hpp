#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tracs/corpus.hpp"
#include "tracs/tokenizer.hpp"

namespace tracs {

inline constexpr std::size_t kDefaultWindow = 512;
inline constexpr std::size_t kMinWindow = 8;
inline constexpr std::size_t kDefaultShardSize = 1000;
inline constexpr std::size_t kDefaultSampleK = 10;

// A fixed-window token segment. `token_ids` is [CLS] content... [SEP]; every
// chunk of a parent holds window - 2 content tokens except possibly the last.
// Labels are copied verbatim from the parent record.
struct Chunk {
    std::string bibcode;
    std::size_t chunk_index = 0;
    std::size_t n_chunks = 1;
    std::vector<TokenId> token_ids;
    std::optional<std::string> telescope;
    std::optional<BooleanLabels> booleans;

    std::size_t content_size() const noexcept {
        return token_ids.size() >= 2 ? token_ids.size() - 2 : 0;
    }

    friend bool operator==(const Chunk&, const Chunk&) = default;
};

// One record after chunking (and optionally selection).
struct ChunkedEntry {
    std::string bibcode;
    std::vector<Chunk> chunks;
};

enum class SelectionMode { first, sample };

SelectionMode parse_selection_mode(std::string_view s);
std::string_view to_string(SelectionMode mode);

// Splits already-encoded content into chunks. Throws ConfigError if window < 8.
std::vector<Chunk> chunk_tokens(const std::vector<TokenId>& content, const SpecialTokens& special,
                                std::size_t window = kDefaultWindow);

// Tokenizes and chunks a document. Never returns an empty list: an empty
// document yields one [CLS][SEP] chunk. Chunks carry no bibcode or labels.
std::vector<Chunk> chunk_document(std::string_view text, const Tokenizer& tokenizer,
                                  std::size_t window = kDefaultWindow);

// chunk_document over concatenate_fields(record) with identifiers and
// labels propagated to every chunk.
ChunkedEntry chunk_record(const PaperRecord& record, const Tokenizer& tokenizer,
                          std::size_t window = kDefaultWindow);

// first: the chunk with chunk_index 0. sample: min(k, size) distinct chunks
// drawn uniformly without replacement from an RNG seeded by (seed, bibcode),
// returned in ascending chunk_index order.
std::vector<Chunk> select_chunks(const std::vector<Chunk>& chunks, SelectionMode mode,
                                 std::size_t k = kDefaultSampleK, std::uint64_t seed = 0);

struct TokenBudget {
    std::uint64_t stored = 0;   // including the two special tokens per chunk
    std::uint64_t content = 0;  // content tokens only
    std::uint64_t chunks = 0;

    TokenBudget& operator+=(const TokenBudget& o) noexcept {
        stored += o.stored;
        content += o.content;
        chunks += o.chunks;
        return *this;
    }
};

TokenBudget token_budget(const std::vector<Chunk>& selected);
// Applies select_chunks to every entry and sums the selection.
TokenBudget token_budget(const std::vector<ChunkedEntry>& entries, SelectionMode mode,
                         std::size_t k = kDefaultSampleK, std::uint64_t seed = 0);

std::string shard_file_name(std::size_t index);

// Writes entries to shard-00000.json, shard-00001.json, ... with
// `shard_size` entries (records) per file. Each file is a JSON array of
// chunk objects.
class ShardWriter {
public:
    ShardWriter(std::filesystem::path out_dir, std::size_t shard_size = kDefaultShardSize);
    ShardWriter(const ShardWriter&) = delete;
    ShardWriter& operator=(const ShardWriter&) = delete;
    ~ShardWriter();

    void add(const ChunkedEntry& entry);
    // Closes the open shard; returns every file written.
    std::vector<std::filesystem::path> finish();

    std::size_t entries_written() const noexcept { return entries_; }

private:
    void open_next();
    void close_current();

    std::filesystem::path out_dir_;
    std::size_t shard_size_;
    std::size_t entries_ = 0;
    std::size_t in_current_ = 0;
    bool first_in_file_ = true;
    std::ofstream out_;
    std::vector<std::filesystem::path> paths_;
};

std::vector<std::filesystem::path> write_shards(const std::vector<ChunkedEntry>& entries,
                                                const std::filesystem::path& out_dir,
                                                std::size_t shard_size = kDefaultShardSize);

std::string chunk_to_json(const Chunk& chunk);
// Throws SchemaError naming `where` on any key/type mismatch.
Chunk chunk_from_json(std::string_view json_text, const std::string& where = "chunk");

// Calls `sink` for every chunk in file order.
void for_each_shard_chunk(const std::vector<std::filesystem::path>& paths,
                          const std::function<void(Chunk&&)>& sink);
std::vector<Chunk> load_shards(const std::vector<std::filesystem::path>& paths);

// shard-*.json files in a directory, sorted by name.
std::vector<std::filesystem::path> list_shards(const std::filesystem::path& dir);

// Groups consecutive chunks by bibcode (order of first appearance preserved).
std::vector<ChunkedEntry> group_by_record(std::vector<Chunk> chunks);

}  // namespace tracs
