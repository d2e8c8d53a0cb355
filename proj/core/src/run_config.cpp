#include "tracs/run_config.hpp"

#include <fstream>
#include <sstream>

#include "tracs/errors.hpp"

namespace tracs {
namespace fs = std::filesystem;
using nlohmann::json;

void RunConfig::validate() const {
    train.validate();
    if (window < kMinWindow) {
        throw ConfigError("window must be >= " + std::to_string(kMinWindow));
    }
    if (shard_size < 1) throw ConfigError("shard_size must be >= 1");
    if (tokenizer.empty()) throw ConfigError("tokenizer identifier must not be empty");
    if (encoder.max_positions < window) {
        throw ConfigError("encoder.max_positions (" + std::to_string(encoder.max_positions) +
                          ") is smaller than window (" + std::to_string(window) + ")");
    }
}

json RunConfig::to_json() const {
    json j = train.to_json();
    j["tokenizer"] = tokenizer;
    j["window"] = window;
    j["shard_size"] = shard_size;
    j["encoder"] = encoder.to_json();
    j["paths"] = {{"input", paths.input},   {"shards", paths.shards},
                  {"out", paths.out},       {"checkpoint", paths.checkpoint},
                  {"pred", paths.pred},     {"gold", paths.gold},
                  {"evidence", paths.evidence}};
    return j;
}

RunConfig RunConfig::from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    RunConfig c;
    json train_part = json::object();
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "tokenizer") {
                c.tokenizer = value.get<std::string>();
            } else if (key == "window") {
                c.window = value.get<std::size_t>();
            } else if (key == "shard_size") {
                c.shard_size = value.get<std::size_t>();
            } else if (key == "encoder") {
                const json defaults = c.encoder.to_json();
                for (const auto& [k, v] : value.items()) {
                    if (!defaults.contains(k)) throw ConfigError("unknown encoder key '" + k + "'");
                }
                c.encoder = TransformerConfig::from_json(value);
            } else if (key == "paths") {
                const json defaults = c.to_json()["paths"];
                for (const auto& [k, v] : value.items()) {
                    if (!defaults.contains(k)) throw ConfigError("unknown paths key '" + k + "'");
                }
                c.paths.input = value.value("input", c.paths.input);
                c.paths.shards = value.value("shards", c.paths.shards);
                c.paths.out = value.value("out", c.paths.out);
                c.paths.checkpoint = value.value("checkpoint", c.paths.checkpoint);
                c.paths.pred = value.value("pred", c.paths.pred);
                c.paths.gold = value.value("gold", c.paths.gold);
                c.paths.evidence = value.value("evidence", c.paths.evidence);
            } else {
                train_part[key] = value;
            }
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    c.train = TrainConfig::from_json(train_part);
    c.validate();
    return c;
}

RunConfig RunConfig::load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return from_json(j);
}

void RunConfig::echo(const fs::path& dir) const {
    std::error_code ec;
    fs::create_directories(dir, ec);
    std::ofstream out(dir / "run_config.json");
    if (!out) throw IoError("cannot write " + (dir / "run_config.json").string());
    out << to_json().dump(2) << "\n";
}

std::string RunConfig::defaults_help() {
    std::ostringstream out;
    const json j = RunConfig{}.to_json();
    for (const auto& [key, value] : j.items()) {
        if (value.is_object()) {
            for (const auto& [k, v] : value.items()) {
                out << "  " << key << '.' << k << " = " << (v.is_string() && v.get<std::string>().empty() ? "\"\"" : v.dump()) << "\n";
            }
        } else {
            out << "  " << key << " = " << value.dump() << "\n";
        }
    }
    return out.str();
}

}  // namespace tracs
