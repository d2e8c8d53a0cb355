// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit when
// any fails. `--full-budget` runs only the full-size token-budget count.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "pipeline.hpp"
#include "support.hpp"
#include "tracs/chunker.hpp"
#include "tracs/inference.hpp"
#include "tracs/loss.hpp"
#include "tracs/metrics.hpp"
#include "tracs/rng.hpp"
#include "tracs/run_config.hpp"
#include "tracs/synth.hpp"
#include "tracs/trainer.hpp"

using namespace tracs;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double x, int precision = 4) {
    std::ostringstream s;
    s << std::setprecision(precision) << x;
    return s.str();
}

json read_json(const fs::path& p) { return json::parse(testing::slurp(p)); }

SynthSpec spec_with(std::size_t total, std::size_t tokens, std::uint64_t seed) {
    SynthSpec s;
    const std::size_t per = total / 3;
    s.docs_per_class = {per + (total % 3 > 0), per + (total % 3 > 1), per};
    s.tokens_per_doc = tokens;
    s.seed = seed;
    return s;
}

bool cli_ok(const std::vector<std::string>& args, std::string& detail) {
    const auto r = testing::run_cli(args);
    if (r.code != 0) detail = args[0] + " exited " + std::to_string(r.code) + ": " + r.err;
    return r.code == 0;
}

// ---------------------------------------------------------------- 1
Outcome shard_arithmetic(const fs::path& work) {
    const auto t0 = Clock::now();
    SyntheticCorpus(spec_with(80385, 8, 1)).write_csv(work / "c1.csv");
    Outcome o;
    if (!cli_ok({"preprocess", "--input", (work / "c1.csv").string(), "--out", (work / "c1").string()}, o.detail))
        return o;
    const auto m = read_json(work / "c1" / "manifest.json");
    const auto files = list_shards(work / "c1").size();
    const double secs = seconds_since(t0);
    o.pass = files == 81 && m["shards"] == 81 && m["entries"] == 80385 && secs < 120.0;
    o.detail = std::to_string(files) + " shard files, " + m["entries"].dump() + " entries, " + fmt(secs, 3) + " s";
    return o;
}

// ---------------------------------------------------------------- 2
// Each document holds exactly 10 windows of content, so first mode stores
// 512 tokens per record and sample mode with k 10 stores 5120.
constexpr std::size_t kTenChunkTokens = 10 * 510;

Outcome token_budget_scaled(const fs::path& work) {
    const std::size_t n = 1000;
    SyntheticCorpus(spec_with(n, kTenChunkTokens, 2)).write_csv(work / "c2.csv");
    Outcome o;
    for (const char* mode : {"first", "sample"}) {
        if (!cli_ok({"preprocess", "--input", (work / "c2.csv").string(), "--out", (work / ("c2-" + std::string(mode))).string(),
                     "--mode", mode, "--k", "10"},
                    o.detail))
            return o;
    }
    const auto first = read_json(work / "c2-first" / "manifest.json")["token_budget"]["stored"].get<std::uint64_t>();
    const auto sample = read_json(work / "c2-sample" / "manifest.json")["token_budget"]["stored"].get<std::uint64_t>();
    o.pass = first == n * 512 && sample == 10 * first;
    o.detail = "first " + std::to_string(first) + " (want " + std::to_string(n * 512) + "), sample " +
               std::to_string(sample) + " (want " + std::to_string(10 * n * 512) + ")";
    return o;
}

Outcome token_budget_full() {
    const auto t0 = Clock::now();
    const SyntheticCorpus corpus(spec_with(80385, kTenChunkTokens, 2));
    const HashWordTokenizer tok;
    TokenBudget first, sample;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const auto entry = chunk_record(corpus.record(i), tok);
        first += token_budget(select_chunks(entry.chunks, SelectionMode::first));
        sample += token_budget(select_chunks(entry.chunks, SelectionMode::sample, 10));
    }
    Outcome o;
    o.pass = first.stored == 41157120ULL && sample.stored == 411571200ULL;
    o.detail = "first " + std::to_string(first.stored) + ", sample " + std::to_string(sample.stored) + ", " +
               fmt(seconds_since(t0), 3) + " s";
    return o;
}

// ---------------------------------------------------------------- 3
Outcome chunker_properties() {
    Rng rng(20240501);
    const HashWordTokenizer tok(997);
    const auto sp = tok.special_tokens();
    std::size_t failures = 0, docs = 0;
    for (; docs < 1200; ++docs) {
        const std::size_t window = 8 + uniform_below(rng, 120);
        const std::size_t n = uniform_below(rng, 600);
        std::vector<TokenId> content(n);
        for (auto& t : content) t = static_cast<TokenId>(4 + uniform_below(rng, 993));
        auto chunks = chunk_tokens(content, sp, window);
        std::vector<TokenId> joined;
        for (std::size_t i = 0; i < chunks.size(); ++i) {
            const auto& c = chunks[i].token_ids;
            if (c.size() > window || c.front() != sp.cls || c.back() != sp.sep || chunks[i].chunk_index != i ||
                chunks[i].n_chunks != chunks.size())
                ++failures;
            joined.insert(joined.end(), c.begin() + 1, c.end() - 1);
        }
        const std::size_t expected = std::max<std::size_t>(1, (n + window - 3) / (window - 2));
        if (joined != content || chunks.size() != expected) ++failures;

        PaperRecord r;
        r.bibcode = "doc" + std::to_string(docs);
        r.body = "w" + std::to_string(n) + " x y z";
        r.telescope = "HST";
        r.booleans = BooleanLabels{docs % 2 == 0, false, docs % 3 == 0, true};
        const auto e = chunk_record(r, tok, window);
        for (const auto& c : e.chunks)
            if (c.telescope != r.telescope || c.booleans != r.booleans || c.bibcode != r.bibcode) ++failures;

        for (auto& c : chunks) c.bibcode = r.bibcode;
        const std::uint64_t seed = uniform_below(rng, 1000);
        const std::size_t k = 1 + uniform_below(rng, 12);
        const auto a = select_chunks(chunks, SelectionMode::sample, k, seed);
        const auto b = select_chunks(chunks, SelectionMode::sample, k, seed);
        if (a != b || a.size() != std::min(k, chunks.size())) ++failures;
        for (std::size_t i = 1; i < a.size(); ++i)
            if (a[i - 1].chunk_index >= a[i].chunk_index) ++failures;
    }

    std::vector<Chunk> five(5);
    for (std::size_t i = 0; i < 5; ++i) {
        five[i].chunk_index = i;
        five[i].n_chunks = 5;
    }
    std::array<std::size_t, 5> hits{};
    for (std::size_t trial = 0; trial < 10000; ++trial) {
        for (auto& c : five) c.bibcode = "u" + std::to_string(trial);
        for (const auto& c : select_chunks(five, SelectionMode::sample, 2, 7)) ++hits[c.chunk_index];
    }
    double worst = 0;
    for (auto h : hits) worst = std::max(worst, std::abs(h / 10000.0 - 0.4));
    Outcome o;
    o.pass = failures == 0 && worst <= 0.02;
    o.detail = std::to_string(docs) + " documents, " + std::to_string(failures) + " violations, uniformity deviation " +
               fmt(worst, 3);
    return o;
}

// ---------------------------------------------------------------- 4
Outcome loss_correctness() {
    const std::vector<double> zeros3{0, 0, 0};
    const std::array<double, 4> zeros4{};
    const double uniform = joint_loss(zeros3, 0, zeros4, {true, false, true, false}).value;
    const bool value_ok = std::abs(uniform - 1.79176) < 1e-5 && std::abs(uniform - (std::log(3.0) + std::log(2.0))) < 1e-6;

    Rng rng(77);
    double worst = 0;
    for (int draw = 0; draw < 100; ++draw) {
        std::vector<double> t(3);
        std::array<double, 4> b{};
        for (auto& x : t) x = 3.0 * standard_normal(rng);
        for (auto& x : b) x = 3.0 * standard_normal(rng);
        const std::size_t target = uniform_below(rng, 3);
        BooleanLabels y{};
        for (auto& v : y) v = uniform_below(rng, 2) == 1;
        const auto l = joint_loss(t, target, b, y);
        const double h = 1e-5;
        auto rel = [](double a, double n) { return std::abs(a - n) / std::max(1e-3, std::abs(a) + std::abs(n)); };
        for (std::size_t i = 0; i < 3; ++i) {
            auto up = t, dn = t;
            up[i] += h;
            dn[i] -= h;
            worst = std::max(worst, rel(l.d_telescope[i], (joint_loss(up, target, b, y).value -
                                                          joint_loss(dn, target, b, y).value) / (2 * h)));
        }
        for (std::size_t i = 0; i < 4; ++i) {
            auto up = b, dn = b;
            up[i] += h;
            dn[i] -= h;
            worst = std::max(worst, rel(l.d_booleans[i], (joint_loss(t, target, up, y).value -
                                                         joint_loss(t, target, dn, y).value) / (2 * h)));
        }
    }
    Outcome o;
    o.pass = value_ok && worst < 1e-4;
    o.detail = "uniform loss " + fmt(uniform, 10) + ", worst relative gradient error " + fmt(worst, 3);
    return o;
}

// ---------------------------------------------------------------- 5
std::size_t oracle_plurality(const std::vector<std::vector<double>>& rows, std::size_t K) {
    std::vector<int> votes(K, 0);
    std::vector<long double> mean(K, 0);
    for (const auto& r : rows) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < K; ++c)
            if (r[c] > r[best]) best = c;
        ++votes[best];
        long double z = 0;
        for (double x : r) z += std::exp(static_cast<long double>(x));
        for (std::size_t c = 0; c < K; ++c) mean[c] += std::exp(static_cast<long double>(r[c])) / z;
    }
    const int top = *std::max_element(votes.begin(), votes.end());
    std::size_t winner = K;
    for (std::size_t c = 0; c < K; ++c)
        if (votes[c] == top && (winner == K || mean[c] > mean[winner] + 1e-12L)) winner = c;
    return winner;
}

Outcome voting_oracle() {
    std::size_t mismatches = 0, configs = 0;
    for (std::size_t K = 1; K <= 3; ++K) {
        std::vector<std::string> names;
        for (std::size_t c = 0; c < K; ++c) names.push_back("C" + std::to_string(c));
        const LabelVocabulary v(names);
        for (std::size_t n = 1; n <= 4; ++n) {
            const std::size_t options = 2 * K;
            std::size_t total = 1;
            for (std::size_t i = 0; i < n; ++i) total *= options;
            for (std::size_t code = 0; code < total; ++code, ++configs) {
                std::vector<std::vector<double>> rows;
                std::vector<ChunkPrediction> preds;
                std::size_t rest = code;
                for (std::size_t i = 0; i < n; ++i, rest /= options) {
                    std::vector<double> row(K, 0.0);
                    row[(rest % options) / 2] = 1.0 + static_cast<double>(rest % 2);
                    rows.push_back(row);
                    preds.emplace_back("d", i, row, std::array<double, 4>{});
                }
                if (aggregate(preds, v).telescope_id != oracle_plurality(rows, K)) ++mismatches;
            }
        }
    }
    // Boolean ties: one yes and one no vote, decided by the mean probability.
    const LabelVocabulary v({"A"});
    struct TieCase {
        double yes, no;
        bool expected;
    };
    const std::vector<TieCase> ties{{3.0, -1.0, true}, {1.0, -3.0, false}, {2.0, -2.0, true}, {0.0, -5.0, false}};
    for (const auto& t : ties) {
        const std::vector<ChunkPrediction> p{{"d", 0, {0.0}, {t.yes, t.yes, t.yes, t.yes}},
                                             {"d", 1, {0.0}, {t.no, t.no, t.no, t.no}}};
        const auto d = aggregate(p, v);
        for (int b = 0; b < 4; ++b)
            if (d.booleans[b] != t.expected || !d.boolean_tie_broken[b]) ++mismatches;
    }
    Outcome o;
    o.pass = mismatches == 0;
    o.detail = std::to_string(configs) + " vote configurations plus " + std::to_string(ties.size()) +
               " boolean tie cases, " + std::to_string(mismatches) + " mismatches";
    return o;
}

// ---------------------------------------------------------------- 6
Outcome metric_oracle() {
    auto naive_f1 = [](int tp, int fp, int fn) { return 2 * tp + fp + fn == 0 ? 0.0 : 2.0 * tp / (2 * tp + fp + fn); };
    Rng rng(99);
    double worst = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 1 + uniform_below(rng, 200), K = 1 + uniform_below(rng, 4);
        std::vector<std::size_t> p(n), g(n);
        std::array<std::vector<std::uint8_t>, 4> bp, bg;
        for (std::size_t i = 0; i < n; ++i) {
            p[i] = uniform_below(rng, K);
            g[i] = uniform_below(rng, K);
            for (int b = 0; b < 4; ++b) {
                bp[b].push_back(uniform_below(rng, 4) == 0);
                bg[b].push_back(uniform_below(rng, 3) == 0);
            }
        }
        double macro = 0;
        for (std::size_t c = 0; c < K; ++c) {
            int tp = 0, fp = 0, fn = 0;
            for (std::size_t i = 0; i < n; ++i) {
                tp += p[i] == c && g[i] == c;
                fp += p[i] == c && g[i] != c;
                fn += p[i] != c && g[i] == c;
            }
            macro += naive_f1(tp, fp, fn) / K;
        }
        const double got_macro = macro_f1_multiclass(p, g, K);
        worst = std::max(worst, std::abs(got_macro - macro));
        double bool_mean = 0;
        std::array<double, 4> got_bool{};
        for (int b = 0; b < 4; ++b) {
            int tp = 0, fp = 0, fn = 0;
            for (std::size_t i = 0; i < n; ++i) {
                tp += bp[b][i] && bg[b][i];
                fp += bp[b][i] && !bg[b][i];
                fn += !bp[b][i] && bg[b][i];
            }
            bool_mean += naive_f1(tp, fp, fn) / 4;
            got_bool[b] = f1_binary(bp[b], bg[b]);
            worst = std::max(worst, std::abs(got_bool[b] - naive_f1(tp, fp, fn)));
        }
        worst = std::max(worst, std::abs(composite_metric(got_macro, got_bool) - (macro + bool_mean) / 2));
    }
    const double c = composite_metric(0.8, std::array<double, 4>{0.6, 0.6, 0.6, 0.6});
    Outcome o;
    o.pass = worst < 1e-9 && c == 0.7;
    o.detail = "1000 corpora, worst deviation " + fmt(worst, 3) + ", composite(0.8, 0.6 x4) = " + fmt(c, 15) + (c == 0.7 ? " (== 0.7)" : " (!= 0.7)");
    return o;
}

// ---------------------------------------------------------------- 7 and 9
struct TrainedRun {
    fs::path dir;
    bool ok = false;
    std::string error;
};

TrainedRun train_reference(const fs::path& work) {
    TrainedRun run;
    run.dir = work / "c7";
    fs::create_directories(run.dir);
    SyntheticCorpus(spec_with(300, 600, 0)).write_csv(run.dir / "train.csv");
    SyntheticCorpus(spec_with(150, 600, 1000)).write_csv(run.dir / "heldout.csv");
    testing::write_json(run.dir / "run.json", testing::tiny_run_config());
    const auto p = [&](const char* name) { return (run.dir / name).string(); };
    run.ok = cli_ok({"preprocess", "--input", p("train.csv"), "--out", p("shards"), "--config", p("run.json")}, run.error) &&
             cli_ok({"train", "--shards", p("shards"), "--out", p("run"), "--config", p("run.json")}, run.error);
    return run;
}

Outcome directional(const TrainedRun& run, double train_seconds) {
    Outcome o;
    if (!run.ok) {
        o.detail = run.error;
        return o;
    }
    const auto t0 = Clock::now();
    const auto p = [&](const char* name) { return (run.dir / name).string(); };
    if (!cli_ok({"predict", "--checkpoint", p("run/best"), "--input", p("train.csv"), "--out", p("pred_train.csv")}, o.detail) ||
        !cli_ok({"predict", "--checkpoint", p("run/best"), "--input", p("heldout.csv"), "--out", p("pred_heldout.csv")}, o.detail))
        return o;

    const auto train_records = load_csv(run.dir / "train.csv");
    const auto heldout_records = load_csv(run.dir / "heldout.csv");
    const auto cfg = RunConfig::load(run.dir / "run.json");
    const auto vocabulary = LabelVocabulary::load(run.dir / "shards" / "vocabulary.json");

    // Training split: the documents the trainer did not hold out for validation.
    const auto [train_part, val_part] =
        split_train_validation(train_records, cfg.train.validation_fraction, cfg.train.seed);
    std::set<std::string> train_ids;
    for (const auto& r : train_part) train_ids.insert(r.bibcode);
    std::vector<DocumentLabels> train_preds;
    for (const auto& d : read_labels_csv(run.dir / "pred_train.csv"))
        if (train_ids.count(d.bibcode)) train_preds.push_back(d);
    const double train_score = evaluate(train_preds, gold_labels(train_part), vocabulary).composite;
    const double fine_tuned =
        evaluate(read_labels_csv(run.dir / "pred_heldout.csv"), gold_labels(heldout_records), vocabulary).composite;

    const double random = random_baseline(heldout_records, vocabulary, cfg.train.seed).composite;
    Model frozen(make_encoder(cfg.encoder.to_json()), vocabulary.size(), cfg.train.head_init_seed);
    frozen.encoder->set_mode(EncoderMode::frozen);
    const auto tokenizer = make_tokenizer(cfg.tokenizer);
    const double frozen_score = frozen_baseline(frozen, *tokenizer, vocabulary, heldout_records, cfg.window).composite;

    const bool ordering = (fine_tuned > random && random > frozen_score) ||
                          (fine_tuned >= random + 0.3 && fine_tuned >= frozen_score + 0.3);
    const double total = train_seconds + seconds_since(t0);
    o.pass = ordering && train_score >= 0.95 && fine_tuned >= 0.8 && total < 300.0;
    o.detail = "fine-tuned train " + fmt(train_score) + ", held-out " + fmt(fine_tuned) + ", random " + fmt(random) +
               ", frozen heads " + fmt(frozen_score) + ", " + fmt(total, 3) + " s";
    return o;
}

Outcome submission_shape(const TrainedRun& run, const fs::path& work) {
    Outcome o;
    if (!run.ok) {
        o.detail = run.error;
        return o;
    }
    auto spec = spec_with(9194, 300, 4242);
    spec.labeled = false;
    SyntheticCorpus(spec).write_csv(work / "test9194.csv");
    const auto t0 = Clock::now();
    if (!cli_ok({"predict", "--checkpoint", (run.dir / "run" / "best").string(), "--input", (work / "test9194.csv").string(),
                 "--out", (work / "pred9194.csv").string()},
                o.detail))
        return o;
    const double secs = seconds_since(t0);
    const auto text = testing::slurp(work / "pred9194.csv");
    const auto lines = static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
    const bool header = text.rfind("bibcode,telescope,science,instrumentation,mention,not_telescope\n", 0) == 0;
    o.pass = header && lines == 9195 && read_labels_csv(work / "pred9194.csv").size() == 9194 && secs < 600.0;
    o.detail = std::to_string(lines - 1) + " prediction rows, header " + (header ? "ok" : "wrong") + ", " + fmt(secs, 3) + " s";
    return o;
}

// ---------------------------------------------------------------- 8
Outcome determinism(const fs::path& work) {
    const fs::path base = work / "c8";
    fs::create_directories(base);
    auto spec = spec_with(90, 400, 5);
    spec.skew = {0.5, 0.5, 0.5, 0.5};
    SyntheticCorpus(spec).write_csv(base / "corpus.csv");
    auto cfg = testing::tiny_run_config();
    cfg["epochs"] = 3;
    testing::write_json(base / "run.json", cfg);
    Outcome o;
    std::vector<std::string> metrics;
    for (const char* name : {"a", "b"}) {
        const fs::path d = base / name;
        const auto p = [&](const char* f) { return (d / f).string(); };
        fs::create_directories(d);
        if (!cli_ok({"preprocess", "--input", (base / "corpus.csv").string(), "--out", p("shards"), "--config",
                     (base / "run.json").string(), "--seed", "17"},
                    o.detail) ||
            !cli_ok({"train", "--shards", p("shards"), "--out", p("run"), "--config", (base / "run.json").string(),
                     "--seed", "17"},
                    o.detail) ||
            !cli_ok({"predict", "--checkpoint", p("run/best"), "--input", (base / "corpus.csv").string(), "--out",
                     p("pred.csv")},
                    o.detail) ||
            !cli_ok({"evaluate", "--pred", p("pred.csv"), "--gold", (base / "corpus.csv").string(), "--out",
                     p("metrics.json")},
                    o.detail))
            return o;
        metrics.push_back(testing::slurp(d / "metrics.json"));
    }
    o.pass = metrics[0] == metrics[1] && !metrics[0].empty();
    o.detail = o.pass ? "metrics JSON byte-identical across two runs" : "metrics JSON differs between runs";
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    const bool full_budget = argc > 1 && std::strcmp(argv[1], "--full-budget") == 0;
    testing::TempDir work;
    int failed = 0;
    auto report = [&](int id, const std::string& name, const std::function<Outcome()>& fn) {
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o.detail = std::string("exception: ") + e.what();
        }
        if (!o.pass) ++failed;
        std::cout << "criterion " << id << " " << (o.pass ? "PASS" : "FAIL") << "  " << name << ": " << o.detail
                  << std::endl;
    };

    if (full_budget) {
        report(2, "token budget, full 80385-record count", token_budget_full);
        return failed ? 1 : 0;
    }

    report(1, "shard arithmetic", [&] { return shard_arithmetic(work.path()); });
    report(2, "token budget, 1000-record scaled check", [&] { return token_budget_scaled(work.path()); });
    report(3, "chunker properties", chunker_properties);
    report(4, "loss correctness", loss_correctness);
    report(5, "voting oracle", voting_oracle);
    report(6, "metric oracle", metric_oracle);
    const auto t0 = Clock::now();
    const TrainedRun run = train_reference(work.path());
    const double train_seconds = seconds_since(t0);
    report(7, "directional reproduction", [&] { return directional(run, train_seconds); });
    report(8, "determinism", [&] { return determinism(work.path()); });
    report(9, "submission shape", [&] { return submission_shape(run, work.path()); });
    std::cout << (failed ? std::to_string(failed) + " criteria failed" : std::string("all criteria passed")) << std::endl;
    return failed ? 1 : 0;
}
