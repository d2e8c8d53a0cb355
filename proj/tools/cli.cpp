#include "cli.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <set>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "tracs/checkpoint.hpp"
#include "tracs/chunker.hpp"
#include "tracs/corpus.hpp"
#include "tracs/errors.hpp"
#include "tracs/inference.hpp"
#include "tracs/metrics.hpp"
#include "tracs/report.hpp"
#include "tracs/run_config.hpp"
#include "tracs/synth.hpp"
#include "tracs/trainer.hpp"

namespace tracs::cli {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string utc_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

json read_json_file(const fs::path& path, const std::string& what) {
    std::ifstream in(path);
    if (!in) throw ConfigError("missing " + what + " " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw SchemaError(path.string() + ": " + e.what());
    }
}

void write_json_file(const fs::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << "\n";
}

void require(const std::string& value, const char* flag) {
    if (value.empty()) throw ConfigError(std::string(flag) + " is required");
}

void require_file(const std::string& value, const char* flag) {
    require(value, flag);
    if (!fs::is_regular_file(value)) throw ConfigError(std::string(flag) + ": no such file " + value);
}

json budget_json(const TokenBudget& b) {
    return {{"stored", b.stored}, {"content", b.content}, {"chunks", b.chunks}};
}

// A relative WordPiece path is made absolute so later commands run from
// another directory still find the vocabulary.
std::string canonical_tokenizer(const std::string& id) {
    const std::string prefix = "wordpiece:";
    if (id.rfind(prefix, 0) == 0) {
        return prefix + fs::absolute(id.substr(prefix.size())).lexically_normal().string();
    }
    return id;
}

// ------------------------------------------------------------------ commands

void cmd_preprocess(RunConfig cfg, std::ostream& out) {
    require_file(cfg.paths.input, "--input");
    require(cfg.paths.out, "--out");
    cfg.tokenizer = canonical_tokenizer(cfg.tokenizer);
    const fs::path dir = cfg.paths.out;

    IngestStats stats;
    const auto records = load_csv(cfg.paths.input, &stats);
    const auto tokenizer = make_tokenizer(cfg.tokenizer, fs::current_path());

    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    // Stale shards from an earlier run would be picked up by train.
    for (const auto& old : list_shards(dir)) fs::remove(old);

    ShardWriter writer(dir, cfg.shard_size);
    TokenBudget all, selected;
    std::size_t labeled = 0;
    for (const auto& r : records) {
        auto entry = chunk_record(r, *tokenizer, cfg.window);
        all += token_budget(entry.chunks);
        entry.chunks = select_chunks(entry.chunks, cfg.train.mode, cfg.train.k, cfg.train.seed);
        selected += token_budget(entry.chunks);
        writer.add(entry);
        if (r.is_labeled()) ++labeled;
    }
    const auto files = writer.finish();

    fs::remove(dir / "vocabulary.json", ec);
    if (labeled > 0) {
        std::vector<std::string> names;
        for (const auto& r : records) {
            if (r.telescope) names.push_back(*r.telescope);
        }
        LabelVocabulary(names).save(dir / "vocabulary.json");
    }

    json shard_names = json::array();
    for (const auto& f : files) shard_names.push_back(f.filename().string());
    const json manifest = {{"created", utc_now()},
                           {"input", cfg.paths.input},
                           {"records", records.size()},
                           {"entries", writer.entries_written()},
                           {"labeled_records", labeled},
                           {"shards", files.size()},
                           {"shard_files", shard_names},
                           {"shard_size", cfg.shard_size},
                           {"window", cfg.window},
                           {"tokenizer", tokenizer->identifier()},
                           {"mode", std::string(to_string(cfg.train.mode))},
                           {"k", cfg.train.k},
                           {"seed", cfg.train.seed},
                           {"token_budget", budget_json(selected)},
                           {"token_budget_all_chunks", budget_json(all)},
                           {"ingest",
                            {{"null_literal_cells", stats.null_literal_cells},
                             {"empty_text_cells", stats.empty_text_cells}}}};
    write_json_file(dir / "manifest.json", manifest);
    cfg.echo(dir);

    out << "preprocess: " << records.size() << " records -> " << files.size() << " shards, "
        << selected.chunks << " chunks, " << selected.stored << " stored tokens (" << selected.content
        << " content) in " << dir.string() << "\n";
}

void cmd_train(RunConfig cfg, bool resume, std::ostream& out) {
    require(cfg.paths.shards, "--shards");
    require(cfg.paths.out, "--out");
    if (!fs::is_directory(cfg.paths.shards)) throw ConfigError("--shards: no such directory " + cfg.paths.shards);
    const fs::path shards = cfg.paths.shards;
    const fs::path dir = cfg.paths.out;

    const json manifest = read_json_file(shards / "manifest.json", "shard manifest");
    if (!fs::exists(shards / "vocabulary.json")) {
        throw ConfigError("no vocabulary.json in " + shards.string() +
                          "; preprocess a labeled corpus before training");
    }
    const auto vocabulary = LabelVocabulary::load(shards / "vocabulary.json");
    const auto paths = list_shards(shards);
    if (paths.empty()) throw ValidationError("no shard-*.json files in " + shards.string());

    try {
        cfg.tokenizer = manifest.at("tokenizer").get<std::string>();
        cfg.window = manifest.at("window").get<std::size_t>();
    } catch (const json::exception& e) {
        throw SchemaError((shards / "manifest.json").string() + ": " + e.what());
    }
    cfg.validate();
    const auto tokenizer = make_tokenizer(cfg.tokenizer, shards);
    if (cfg.encoder.vocabulary_size < tokenizer->vocabulary_size()) {
        throw ConfigError("encoder.vocabulary_size " + std::to_string(cfg.encoder.vocabulary_size) +
                          " is smaller than the tokenizer vocabulary " +
                          std::to_string(tokenizer->vocabulary_size()));
    }

    const auto chunks = load_shards(paths);
    Model model(make_encoder(cfg.encoder.to_json()), vocabulary.size(), cfg.train.head_init_seed);
    cfg.echo(dir);

    TrainContext ctx;
    ctx.out_dir = dir;
    ctx.tokenizer = tokenizer->identifier();
    ctx.window = cfg.window;
    ctx.pad_id = tokenizer->special_tokens().pad;
    ctx.resume = resume;
    const auto result = train(cfg.train, chunks, model, vocabulary, ctx);

    out << "train: " << result.steps << "/" << result.total_steps << " steps, "
        << result.train_documents << " train / " << result.validation_documents
        << " validation documents, best epoch " << result.best_epoch << " (val composite "
        << result.best_val_composite << ") -> " << result.best_dir.string() << "\n";
}

void cmd_predict(const RunConfig& cfg, std::ostream& out) {
    require(cfg.paths.checkpoint, "--checkpoint");
    require_file(cfg.paths.input, "--input");
    require(cfg.paths.out, "--out");
    if (!checkpoint_exists(cfg.paths.checkpoint)) {
        throw ConfigError("--checkpoint: " + cfg.paths.checkpoint +
                          " is not a checkpoint directory (expected manifest.json and encoder.bin)");
    }
    const auto ck = load_checkpoint(cfg.paths.checkpoint);
    check_compatible(*ck.model, ck.vocabulary, *ck.tokenizer);
    const auto records = load_csv(cfg.paths.input);
    const auto preds = predict_corpus(*ck.model, *ck.tokenizer, ck.vocabulary, records,
                                      ck.meta.window, AggregationConfig{cfg.train.threshold});
    write_predictions_csv(cfg.paths.out, preds);
    if (!cfg.paths.evidence.empty()) write_evidence_jsonl(cfg.paths.evidence, preds);
    out << "predict: " << preds.size() << " documents -> " << cfg.paths.out << "\n";
}

LabelVocabulary evaluation_vocabulary(const std::string& vocabulary_path,
                                      const std::vector<DocumentLabels>& gold) {
    if (!vocabulary_path.empty()) return LabelVocabulary::load(vocabulary_path);
    std::vector<std::string> names;
    for (const auto& g : gold) names.push_back(g.telescope);
    if (names.empty()) throw ValidationError("gold file has no documents");
    return LabelVocabulary(names);
}

void cmd_evaluate(const RunConfig& cfg, const std::string& vocabulary_path, std::ostream& out) {
    require_file(cfg.paths.pred, "--pred");
    require_file(cfg.paths.gold, "--gold");
    require(cfg.paths.out, "--out");
    const auto preds = read_labels_csv(cfg.paths.pred);
    const auto gold = read_labels_csv(cfg.paths.gold);
    const auto vocabulary = evaluation_vocabulary(vocabulary_path, gold);
    const auto report = evaluate(preds, gold, vocabulary, cfg.train.bool_f1);
    write_metrics_json(cfg.paths.out, report);
    out << "evaluate: composite " << report.composite << ", multiclass F1 " << report.multiclass_f1
        << " over " << report.n_documents << " documents -> " << cfg.paths.out << "\n";
}

void cmd_report(const RunConfig& cfg, const std::string& vocabulary_path, std::size_t rows,
                std::ostream& out, std::ostream& err) {
    require_file(cfg.paths.pred, "--pred");
    require_file(cfg.paths.gold, "--gold");
    require(cfg.paths.out, "--out");
    const auto preds = read_labels_csv(cfg.paths.pred);
    const auto gold = read_labels_csv(cfg.paths.gold);
    const auto vocabulary = evaluation_vocabulary(vocabulary_path, gold);
    std::vector<DocumentPrediction> evidence;
    const bool have_evidence = !cfg.paths.evidence.empty() && fs::exists(cfg.paths.evidence);
    if (!cfg.paths.evidence.empty() && !have_evidence) {
        err << "warning: evidence file " << cfg.paths.evidence << " not found\n";
    }
    if (have_evidence) evidence = read_evidence_jsonl(cfg.paths.evidence);

    ReportOptions options;
    options.correct_rows = rows;
    options.incorrect_rows = rows;
    options.seed = cfg.train.seed;
    options.variant = cfg.train.bool_f1;
    const auto analysis =
        error_analysis_report(preds, gold, vocabulary, have_evidence ? &evidence : nullptr, options);
    for (const auto& w : analysis.warnings) err << "warning: " << w << "\n";
    analysis.write(cfg.paths.out);
    cfg.echo(cfg.paths.out);
    out << "report: " << analysis.incorrect_examples.size() << " incorrect and "
        << analysis.correct_examples.size() << " correct examples -> " << cfg.paths.out << "\n";
}

void cmd_synth(const std::string& spec_path, const std::string& out_path,
               const std::optional<std::uint64_t>& seed, std::ostream& out) {
    require_file(spec_path, "--spec");
    require(out_path, "--out");
    auto spec = SynthSpec::load(spec_path);
    if (seed) spec.seed = *seed;
    const SyntheticCorpus corpus(spec);
    corpus.write_csv(out_path);
    out << "synth: " << corpus.size() << " documents -> " << out_path << "\n";
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    const RunConfig defaults;
    CLI::App app{"tracs: chunked multi-task telescope reference classification"};
    app.require_subcommand(1);
    app.footer("\nRunConfig fields and defaults (keys accepted by --config):\n" +
               RunConfig::defaults_help());

    std::string config_path, input, out_path, shards, checkpoint, pred, gold, evidence, tokenizer,
        vocabulary, spec;
    std::size_t window = defaults.window, shard_size = defaults.shard_size, k = defaults.train.k,
                epochs = defaults.train.epochs, batch_size = defaults.train.batch_size,
                rows = ReportOptions{}.correct_rows;
    std::uint64_t seed = defaults.train.seed;
    double lr = defaults.train.learning_rate, threshold = defaults.train.threshold;
    std::string mode(to_string(defaults.train.mode)), bool_f1(to_string(defaults.train.bool_f1));
    bool resume = false;

    std::vector<std::pair<CLI::Option*, std::function<void(RunConfig&)>>> overrides;
    auto add = [&](CLI::App* sub, const std::string& name, auto& var, const std::string& help,
                   std::function<void(RunConfig&)> apply) {
        auto* opt = sub->add_option(name, var, help)->capture_default_str();
        if (apply) overrides.emplace_back(opt, std::move(apply));
        return opt;
    };
    auto add_config = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON run configuration (flags override it)");
    };
    auto add_seed = [&](CLI::App* sub) {
        add(sub, "--seed", seed, "Global seed", [&](RunConfig& c) { c.train.seed = seed; });
    };

    auto* pre = app.add_subcommand("preprocess", "Chunk a CSV corpus into JSON shards");
    add(pre, "--input", input, "Corpus CSV", [&](RunConfig& c) { c.paths.input = input; })->required();
    add(pre, "--out", out_path, "Output shard directory", [&](RunConfig& c) { c.paths.out = out_path; })->required();
    add(pre, "--window", window, "Stored tokens per chunk, including [CLS] and [SEP]",
        [&](RunConfig& c) { c.window = window; });
    add(pre, "--shard-size", shard_size, "Entries per shard file",
        [&](RunConfig& c) { c.shard_size = shard_size; });
    add(pre, "--mode", mode, "Chunk selection: first|sample",
        [&](RunConfig& c) { c.train.mode = parse_selection_mode(mode); });
    add(pre, "--k", k, "Chunks per entry in sample mode", [&](RunConfig& c) { c.train.k = k; });
    add(pre, "--tokenizer", tokenizer, "hash-word:N or wordpiece:<vocab.txt>",
        [&](RunConfig& c) { c.tokenizer = tokenizer; });
    add_seed(pre);
    add_config(pre);

    auto* tr = app.add_subcommand("train", "Fine-tune encoder and heads on shards");
    add(tr, "--shards", shards, "Shard directory from preprocess",
        [&](RunConfig& c) { c.paths.shards = shards; })->required();
    add(tr, "--out", out_path, "Run directory (best/, last/, train_log.jsonl)",
        [&](RunConfig& c) { c.paths.out = out_path; })->required();
    add_config(tr);
    add_seed(tr);
    add(tr, "--epochs", epochs, "Training epochs", [&](RunConfig& c) { c.train.epochs = epochs; });
    add(tr, "--lr", lr, "Peak learning rate", [&](RunConfig& c) { c.train.learning_rate = lr; });
    add(tr, "--batch-size", batch_size, "Chunks per batch",
        [&](RunConfig& c) { c.train.batch_size = batch_size; });
    add(tr, "--mode", mode, "Chunk selection: first|sample",
        [&](RunConfig& c) { c.train.mode = parse_selection_mode(mode); });
    add(tr, "--k", k, "Chunks per entry in sample mode", [&](RunConfig& c) { c.train.k = k; });
    tr->add_flag("--resume", resume, "Continue from <out>/last");

    auto* pr = app.add_subcommand("predict", "Predict document labels by majority vote");
    add(pr, "--checkpoint", checkpoint, "Checkpoint directory",
        [&](RunConfig& c) { c.paths.checkpoint = checkpoint; })->required();
    add(pr, "--input", input, "Corpus CSV (labels optional)",
        [&](RunConfig& c) { c.paths.input = input; })->required();
    add(pr, "--out", out_path, "Predictions CSV", [&](RunConfig& c) { c.paths.out = out_path; })->required();
    add(pr, "--evidence", evidence, "Optional JSONL with vote tallies",
        [&](RunConfig& c) { c.paths.evidence = evidence; });
    add(pr, "--threshold", threshold, "Sigmoid threshold for a boolean yes-vote",
        [&](RunConfig& c) { c.train.threshold = threshold; });
    add_config(pr);

    auto* ev = app.add_subcommand("evaluate", "Score predictions against gold labels");
    add(ev, "--pred", pred, "Predictions CSV", [&](RunConfig& c) { c.paths.pred = pred; })->required();
    add(ev, "--gold", gold, "Gold CSV (predictions shape or labeled corpus)",
        [&](RunConfig& c) { c.paths.gold = gold; })->required();
    add(ev, "--out", out_path, "Metrics JSON", [&](RunConfig& c) { c.paths.out = out_path; })->required();
    add(ev, "--bool-f1", bool_f1, "Boolean F1 variant: positive|macro_binary",
        [&](RunConfig& c) { c.train.bool_f1 = parse_bool_f1_variant(bool_f1); });
    ev->add_option("--vocabulary", vocabulary, "vocabulary.json fixing the class set (default: gold classes)");
    add_config(ev);

    auto* rp = app.add_subcommand("report", "Error analysis, confusion matrix CSV and heatmap");
    add(rp, "--pred", pred, "Predictions CSV", [&](RunConfig& c) { c.paths.pred = pred; })->required();
    add(rp, "--gold", gold, "Gold CSV", [&](RunConfig& c) { c.paths.gold = gold; })->required();
    add(rp, "--evidence", evidence, "Evidence JSONL from predict (optional)",
        [&](RunConfig& c) { c.paths.evidence = evidence; });
    add(rp, "--out", out_path, "Report directory", [&](RunConfig& c) { c.paths.out = out_path; })->required();
    add(rp, "--bool-f1", bool_f1, "Boolean F1 variant: positive|macro_binary",
        [&](RunConfig& c) { c.train.bool_f1 = parse_bool_f1_variant(bool_f1); });
    add(rp, "--rows", rows, "Example rows per table", {});
    rp->add_option("--vocabulary", vocabulary, "vocabulary.json fixing the class set");
    add_seed(rp);
    add_config(rp);

    auto* sy = app.add_subcommand("synth", "Generate a synthetic keyword-correlated corpus");
    sy->add_option("--spec", spec, "Generator spec JSON")->required();
    sy->add_option("--out", out_path, "Output CSV")->required();
    auto* synth_seed = sy->add_option("--seed", seed, "Override the spec seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        if (sy->parsed()) {
            std::optional<std::uint64_t> s;
            if (synth_seed->count()) s = seed;
            cmd_synth(spec, out_path, s, out);
            return 0;
        }
        RunConfig cfg = config_path.empty() ? RunConfig{} : RunConfig::load(config_path);
        for (auto& [opt, apply] : overrides) {
            if (opt->count() > 0) apply(cfg);
        }
        cfg.validate();
        if (pre->parsed()) cmd_preprocess(cfg, out);
        else if (tr->parsed()) cmd_train(cfg, resume, out);
        else if (pr->parsed()) cmd_predict(cfg, out);
        else if (ev->parsed()) cmd_evaluate(cfg, vocabulary, out);
        else if (rp->parsed()) cmd_report(cfg, vocabulary, rows, out, err);
        return 0;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return e.is_input_error() ? 2 : 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    std::vector<const char*> argv{"tracs"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace tracs::cli
