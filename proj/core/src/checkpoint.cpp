#include "tracs/checkpoint.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <sstream>

#include "tracs/errors.hpp"

namespace tracs {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("write failed: " + path.string());
}

json read_json(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw SchemaError(path.string() + ": " + e.what());
    }
}

void write_params(const fs::path& path, const ParameterStore& store) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    store.write(out);
    if (!out) throw IoError("write failed: " + path.string());
}

void read_params(const fs::path& path, ParameterStore& store) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    store.read(in, path.string());
}

}  // namespace

bool checkpoint_exists(const fs::path& dir) {
    return fs::exists(dir / "manifest.json") && fs::exists(dir / "encoder.bin");
}

void save_checkpoint(const fs::path& dir, const Model& model, const LabelVocabulary& vocabulary,
                     const CheckpointMeta& meta, const AdamW* optimizer) {
    if (model.head.num_classes() != vocabulary.size()) {
        throw ConfigError("checkpoint: head/vocabulary class count mismatch");
    }
    // Write next to the target and swap in, so an interrupted save never
    // destroys the previous checkpoint.
    const fs::path tmp = dir.string() + ".tmp";
    std::error_code ec;
    fs::remove_all(tmp, ec);
    fs::create_directories(tmp, ec);
    if (ec) throw IoError("cannot create " + tmp.string() + ": " + ec.message());

    std::string tokenizer = meta.tokenizer;
    if (tokenizer.rfind("wordpiece:", 0) == 0) {
        const fs::path src = tokenizer.substr(std::string("wordpiece:").size());
        fs::copy_file(src, tmp / "vocab.txt", fs::copy_options::overwrite_existing, ec);
        if (ec) throw IoError("cannot copy WordPiece vocabulary " + src.string() + ": " + ec.message());
        tokenizer = "wordpiece:vocab.txt";
    }

    json manifest = {{"encoder", model.encoder->identifier()},
                     {"hidden_size", model.encoder->hidden_size()},
                     {"num_classes", model.head.num_classes()},
                     {"boolean_labels", json::array()},
                     {"created", utc_timestamp()},
                     {"tokenizer", tokenizer},
                     {"window", meta.window},
                     {"config_fingerprint", meta.config_fingerprint},
                     {"encoder_config", model.encoder->config_json()}};
    for (auto name : kBooleanLabelNames) manifest["boolean_labels"].push_back(std::string(name));

    write_text(tmp / "manifest.json", manifest.dump(2) + "\n");
    vocabulary.save(tmp / "vocabulary.json");
    write_params(tmp / "encoder.bin", model.encoder->parameters());
    write_params(tmp / "head.bin", model.head.parameters());
    if (optimizer) {
        std::ofstream out(tmp / "optimizer.bin", std::ios::binary);
        if (!out) throw IoError("cannot write optimizer state");
        optimizer->write_state(out);
        if (!out) throw IoError("write failed: optimizer state");
    }
    if (!meta.state.is_null()) write_text(tmp / "state.json", meta.state.dump(2) + "\n");

    fs::remove_all(dir, ec);
    fs::rename(tmp, dir, ec);
    if (ec) throw IoError("cannot move checkpoint into " + dir.string() + ": " + ec.message());
}

LoadedCheckpoint load_checkpoint(const fs::path& dir) {
    if (!checkpoint_exists(dir)) {
        throw IoError("no checkpoint at " + dir.string() + " (expected manifest.json and encoder.bin)");
    }
    LoadedCheckpoint ck;
    ck.dir = dir;
    ck.manifest = read_json(dir / "manifest.json");
    const auto& m = ck.manifest;
    for (const char* key : {"encoder", "hidden_size", "num_classes", "boolean_labels", "created",
                            "tokenizer", "window", "encoder_config"}) {
        if (!m.contains(key)) throw SchemaError(dir.string() + "/manifest.json: missing '" + key + "'");
    }
    std::vector<std::string> labels;
    try {
        labels = m["boolean_labels"].get<std::vector<std::string>>();
        ck.meta.tokenizer = m["tokenizer"].get<std::string>();
        ck.meta.window = m["window"].get<std::size_t>();
        ck.meta.config_fingerprint = m.value("config_fingerprint", std::string());
    } catch (const json::exception& e) {
        throw SchemaError(dir.string() + "/manifest.json: " + e.what());
    }
    if (labels != std::vector<std::string>(kBooleanLabelNames.begin(), kBooleanLabelNames.end())) {
        throw SchemaError(dir.string() + ": boolean label order differs from this build");
    }

    if (!fs::exists(dir / "vocabulary.json")) {
        throw SchemaError(dir.string() + ": missing vocabulary.json");
    }
    ck.vocabulary = LabelVocabulary::load(dir / "vocabulary.json");
    const auto num_classes = m["num_classes"].get<std::size_t>();
    if (ck.vocabulary.size() != num_classes) {
        throw SchemaError(dir.string() + ": manifest declares " + std::to_string(num_classes) +
                          " classes but vocabulary.json has " +
                          std::to_string(ck.vocabulary.size()));
    }

    auto encoder = make_encoder(m["encoder_config"]);
    if (encoder->hidden_size() != m["hidden_size"].get<std::size_t>()) {
        throw SchemaError(dir.string() + ": hidden_size disagrees with encoder_config");
    }
    read_params(dir / "encoder.bin", encoder->parameters());
    ck.model = std::make_unique<Model>(std::move(encoder), num_classes);
    read_params(dir / "head.bin", ck.model->head.parameters());

    ck.tokenizer = make_tokenizer(ck.meta.tokenizer, dir);
    if (ck.tokenizer->vocabulary_size() > ck.model->encoder->vocabulary_size()) {
        throw SchemaError(dir.string() + ": tokenizer vocabulary exceeds encoder embedding table");
    }
    if (fs::exists(dir / "state.json")) ck.meta.state = read_json(dir / "state.json");
    return ck;
}

void load_optimizer_state(const fs::path& dir, AdamW& optimizer) {
    std::ifstream in(dir / "optimizer.bin", std::ios::binary);
    if (!in) throw IoError("no optimizer state in " + dir.string());
    optimizer.read_state(in, (dir / "optimizer.bin").string());
}

}  // namespace tracs
