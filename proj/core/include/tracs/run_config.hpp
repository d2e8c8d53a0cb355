#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "tracs/chunker.hpp"
#include "tracs/encoder.hpp"
#include "tracs/trainer.hpp"

namespace tracs {

// Everything a run needs. The JSON form is flat for the training fields
// (same names as TrainConfig) plus "tokenizer", "window", "shard_size",
// an "encoder" object and a "paths" object. Flags override file values.
struct RunConfig {
    TrainConfig train;
    std::string tokenizer = "hash-word:16384";
    std::size_t window = kDefaultWindow;
    std::size_t shard_size = kDefaultShardSize;
    TransformerConfig encoder;

    struct Paths {
        std::string input;
        std::string shards;
        std::string out;
        std::string checkpoint;
        std::string pred;
        std::string gold;
        std::string evidence;
    } paths;

    void validate() const;
    nlohmann::json to_json() const;
    // Unknown keys raise ConfigError.
    static RunConfig from_json(const nlohmann::json& j);
    static RunConfig load(const std::filesystem::path& path);
    // Writes run_config.json into `dir`.
    void echo(const std::filesystem::path& dir) const;

    // One "key = default" line per field, nested keys dotted.
    static std::string defaults_help();
};

}  // namespace tracs
