#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>

#include "support.hpp"
#include "tracs/errors.hpp"
#include "tracs/inference.hpp"
#include "tracs/rng.hpp"

using namespace tracs;

namespace {

LabelVocabulary vocab(std::size_t k) {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < k; ++i) names.push_back(std::string(1, static_cast<char>('A' + i)));
    return LabelVocabulary(names);
}

ChunkPrediction chunk(std::size_t index, std::vector<double> tel, std::array<double, 4> b = {}) {
    return ChunkPrediction("doc", index, std::move(tel), b);
}

// Plurality over per-chunk argmax; ties by the largest mean softmax
// probability, remaining ties to the lowest class id.
std::size_t oracle_telescope(const std::vector<std::vector<double>>& logits, std::size_t K) {
    std::vector<int> votes(K, 0);
    std::vector<long double> mean(K, 0.0L);
    for (const auto& row : logits) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < K; ++c)
            if (row[c] > row[best]) best = c;
        ++votes[best];
        long double z = 0;
        for (double x : row) z += std::exp(static_cast<long double>(x));
        for (std::size_t c = 0; c < K; ++c) mean[c] += std::exp(static_cast<long double>(row[c])) / z;
    }
    const int top = *std::max_element(votes.begin(), votes.end());
    long double best_p = -1;
    std::size_t winner = K;
    for (std::size_t c = 0; c < K; ++c) {
        if (votes[c] != top) continue;
        const long double p = mean[c] / logits.size();
        if (winner == K || p > best_p + 1e-12L) {
            winner = c;
            best_p = p;
        }
    }
    return winner;
}

bool oracle_boolean(const std::vector<double>& logits, double threshold) {
    int yes = 0;
    long double mean = 0;
    for (double x : logits) {
        const long double p = 1.0L / (1.0L + std::exp(-static_cast<long double>(x)));
        if (p >= threshold) ++yes;
        mean += p;
    }
    const int no = static_cast<int>(logits.size()) - yes;
    if (yes != no) return yes > no;
    return mean / logits.size() >= threshold - 1e-12L;
}

Model tiny_model(std::size_t classes, std::size_t vocab_size = 256) {
    TransformerConfig c;
    c.vocabulary_size = vocab_size;
    c.hidden_size = 8;
    c.layers = 1;
    c.heads = 2;
    c.ffn_size = 16;
    c.max_positions = 32;
    return Model(std::make_unique<TransformerEncoder>(c), classes);
}

PaperRecord record(std::string id, std::string text) {
    PaperRecord r;
    r.bibcode = std::move(id);
    r.body = std::move(text);
    return r;
}

}  // namespace

TEST_CASE("aggregate examples") {
    const auto v = vocab(3);
    SUBCASE("clear plurality") {
        const std::vector<ChunkPrediction> p{chunk(0, {2, 0, 0}), chunk(1, {2, 0, 0}), chunk(2, {0, 3, 0})};
        const auto d = aggregate(p, v);
        CHECK(d.telescope == "A");
        CHECK(d.telescope_votes == std::vector<std::size_t>{2, 1, 0});
        CHECK_FALSE(d.telescope_tie_broken);
        CHECK(d.n_chunks == 3);
    }
    SUBCASE("vote tie broken by mean probability") {
        const std::vector<ChunkPrediction> p{chunk(0, {1, 0, 0}), chunk(1, {0, 4, 0})};
        const auto d = aggregate(p, v);
        CHECK(d.telescope == "B");
        CHECK(d.telescope_tie_broken);
    }
    SUBCASE("exact tie goes to the lowest id") {
        const std::vector<ChunkPrediction> p{chunk(0, {0, 0, 2}), chunk(1, {0, 2, 0})};
        CHECK(aggregate(p, v).telescope == "B");
    }
    SUBCASE("single chunk is the identity") {
        const std::vector<ChunkPrediction> p{chunk(0, {0.1, 0.3, 0.2}, {1, -1, 0.2, -0.2})};
        const auto d = aggregate(p, v);
        CHECK(d.telescope == "B");
        CHECK(d.booleans == BooleanLabels{true, false, true, false});
        CHECK(d.boolean_tie_broken == std::array<bool, 4>{});
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(aggregate(std::vector<ChunkPrediction>{}, v), ValidationError);
        std::vector<ChunkPrediction> mixed{chunk(0, {0, 0, 0}), ChunkPrediction("other", 1, {0, 0, 0}, {})};
        CHECK_THROWS_AS(aggregate(mixed, v), ValidationError);
        CHECK_THROWS_AS(aggregate(std::vector<ChunkPrediction>{chunk(0, {0, 0})}, v), ValidationError);
    }
}

TEST_CASE("boolean tie-break cases") {
    const auto v = vocab(2);
    // 1 yes, 1 no: the mean probability decides.
    auto tie = [&](double a, double b, double threshold = 0.5) {
        AggregationConfig cfg;
        cfg.threshold = threshold;
        const std::vector<ChunkPrediction> p{chunk(0, {0, 0}, {a, a, a, a}), chunk(1, {0, 0}, {b, b, b, b})};
        const auto d = aggregate(p, v, cfg);
        CHECK(d.boolean_tie_broken[0]);
        CHECK(d.boolean_votes[0] == std::array<std::size_t, 2>{1, 1});
        return d.booleans[0];
    };
    CHECK(tie(3.0, -1.0));
    CHECK_FALSE(tie(1.0, -3.0));
    // Symmetric logits give a mean of exactly one half, which counts as yes.
    CHECK(tie(2.0, -2.0));
    CHECK(tie(0.7, -0.7));
    // A logit of 0 votes yes, but the tied mean falls below one half.
    CHECK_FALSE(tie(0.0, -5.0, 0.5));
    // 2 yes vs 1 no: no tie-break.
    const std::vector<ChunkPrediction> p{chunk(0, {0, 0}, {0.1, 0, 0, 0}), chunk(1, {0, 0}, {0.1, 0, 0, 0}),
                                         chunk(2, {0, 0}, {-9, 0, 0, 0})};
    const auto d = aggregate(p, v);
    CHECK(d.booleans[0]);
    CHECK_FALSE(d.boolean_tie_broken[0]);
    // Logit 0 is a yes vote at threshold 0.5, so four zero logits are unanimous.
    CHECK(d.booleans[1]);
}

TEST_CASE("telescope aggregation matches the brute-force oracle exhaustively") {
    // Each chunk votes for one class with strength 1 or 2; every assignment
    // over up to 4 chunks and up to 3 classes is checked.
    std::size_t mismatches = 0, cases = 0;
    for (std::size_t K = 1; K <= 3; ++K) {
        const auto v = vocab(K);
        for (std::size_t n = 1; n <= 4; ++n) {
            const std::size_t options = 2 * K;
            std::size_t total = 1;
            for (std::size_t i = 0; i < n; ++i) total *= options;
            for (std::size_t code = 0; code < total; ++code) {
                std::vector<std::vector<double>> logits;
                std::vector<ChunkPrediction> preds;
                std::size_t rest = code;
                for (std::size_t i = 0; i < n; ++i) {
                    const std::size_t opt = rest % options;
                    rest /= options;
                    std::vector<double> row(K, 0.0);
                    row[opt / 2] = 1.0 + static_cast<double>(opt % 2);
                    logits.push_back(row);
                    preds.push_back(chunk(i, row));
                }
                ++cases;
                if (aggregate(preds, v).telescope_id != oracle_telescope(logits, K)) ++mismatches;
            }
        }
    }
    CHECK(cases == 30 + 340 + 1554);
    CHECK(mismatches == 0);
}

TEST_CASE("boolean aggregation matches the oracle exhaustively") {
    const auto v = vocab(2);
    const std::array<double, 5> levels{-2.0, -0.5, 0.0, 0.5, 2.0};
    std::size_t mismatches = 0;
    for (double threshold : {0.5, 0.3}) {
        AggregationConfig cfg;
        cfg.threshold = threshold;
        for (std::size_t n = 1; n <= 4; ++n) {
            std::size_t total = 1;
            for (std::size_t i = 0; i < n; ++i) total *= levels.size();
            for (std::size_t code = 0; code < total; ++code) {
                std::vector<double> xs;
                std::vector<ChunkPrediction> preds;
                std::size_t rest = code;
                for (std::size_t i = 0; i < n; ++i) {
                    const double x = levels[rest % levels.size()];
                    rest /= levels.size();
                    xs.push_back(x);
                    preds.push_back(chunk(i, {0, 0}, {x, -x, x, 0}));
                }
                const auto d = aggregate(preds, v, cfg);
                std::vector<double> neg;
                for (double x : xs) neg.push_back(-x);
                if (d.booleans[0] != oracle_boolean(xs, threshold)) ++mismatches;
                if (d.booleans[1] != oracle_boolean(neg, threshold)) ++mismatches;
            }
        }
    }
    CHECK(mismatches == 0);
}

TEST_CASE("aggregate is invariant to chunk order") {
    Rng rng(5);
    const auto v = vocab(3);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 1 + uniform_below(rng, 7);
        std::vector<ChunkPrediction> preds;
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> t(3);
            std::array<double, 4> b{};
            for (auto& x : t) x = static_cast<double>(uniform_below(rng, 3));
            for (auto& x : b) x = static_cast<double>(uniform_below(rng, 5)) - 2.0;
            preds.push_back(chunk(i, t, b));
        }
        const auto ref = aggregate(preds, v);
        std::shuffle(preds.begin(), preds.end(), rng);
        const auto got = aggregate(preds, v);
        CHECK(got.telescope_id == ref.telescope_id);
        CHECK(got.booleans == ref.booleans);
        CHECK(got.mean_telescope_probability == ref.mean_telescope_probability);
    }
}

TEST_CASE("adding a vote for the winner keeps it the winner") {
    Rng rng(8);
    const auto v = vocab(3);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 1 + uniform_below(rng, 5);
        std::vector<ChunkPrediction> preds;
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> t(3, 0.0);
            t[uniform_below(rng, 3)] = 1.0 + static_cast<double>(uniform_below(rng, 3));
            preds.push_back(chunk(i, t));
        }
        const auto before = aggregate(preds, v);
        std::vector<double> t(3, 0.0);
        t[before.telescope_id] = 2.0;
        preds.push_back(chunk(n, t));
        CHECK(aggregate(preds, v).telescope_id == before.telescope_id);
    }
}

TEST_CASE("predict_document covers every chunk") {
    const Model m = tiny_model(2);
    const HashWordTokenizer tok(256);
    std::string text;
    for (int i = 0; i < 65; ++i) text += "w" + std::to_string(i) + " ";
    const auto preds = predict_document(m, tok, record("x", text), 16);
    // 65 words at 14 content tokens per chunk.
    CHECK(preds.size() == 5);
    for (std::size_t i = 0; i < preds.size(); ++i) CHECK(preds[i].chunk_index == i);
    CHECK(predict_document(m, tok, record("e", ""), 16).size() == 1);
}

TEST_CASE("check_compatible") {
    const Model m = tiny_model(2, 256);
    CHECK_NOTHROW(check_compatible(m, vocab(2), HashWordTokenizer(256)));
    CHECK_THROWS_AS(check_compatible(m, vocab(3), HashWordTokenizer(256)), ConfigError);
    CHECK_THROWS_AS(check_compatible(m, vocab(2), HashWordTokenizer(1024)), ConfigError);
}

TEST_CASE("prediction CSV shape and evidence round trip") {
    testing::TempDir dir;
    const Model m = tiny_model(2);
    const HashWordTokenizer tok(256);
    const auto v = vocab(2);
    std::vector<PaperRecord> recs{record("p1", "alpha beta gamma"), record("p2", "delta")};
    const auto preds = predict_corpus(m, tok, v, recs, 16);
    REQUIRE(preds.size() == 2);
    write_predictions_csv(dir / "pred.csv", preds);
    const auto text = testing::slurp(dir / "pred.csv");
    CHECK(text.rfind("bibcode,telescope,science,instrumentation,mention,not_telescope\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 3);
    const auto back = read_labels_csv(dir / "pred.csv");
    CHECK(back[0] == preds[0].labels());
    CHECK(back[1] == preds[1].labels());

    write_evidence_jsonl(dir / "ev.jsonl", preds);
    const auto ev = read_evidence_jsonl(dir / "ev.jsonl");
    REQUIRE(ev.size() == 2);
    CHECK(ev[0].to_json() == preds[0].to_json());
    CHECK(ev[1].telescope_votes == preds[1].telescope_votes);

    write_predictions_csv(dir / "empty.csv", {});
    CHECK(testing::slurp(dir / "empty.csv") ==
          "bibcode,telescope,science,instrumentation,mention,not_telescope\n");
    CHECK(predict_corpus(m, tok, v, {}, 16).empty());
}

TEST_CASE("frozen baseline is deterministic") {
    const HashWordTokenizer tok(256);
    const auto v = vocab(2);
    std::vector<PaperRecord> recs;
    for (int i = 0; i < 10; ++i) {
        auto r = record("d" + std::to_string(i), "token" + std::to_string(i) + " common words here");
        r.telescope = v.name_of(i % 2);
        r.booleans = BooleanLabels{i % 3 == 0, false, true, i % 2 == 0};
        recs.push_back(r);
    }
    Model a = tiny_model(2);
    Model b = tiny_model(2);
    a.encoder->set_mode(EncoderMode::frozen);
    b.encoder->set_mode(EncoderMode::frozen);
    CHECK_THROWS_AS(frozen_baseline(tiny_model(2), tok, v, recs, 16), ConfigError);
    const auto ra = frozen_baseline(a, tok, v, recs, 16);
    const auto rb = frozen_baseline(b, tok, v, recs, 16);
    CHECK(ra.full_json() == rb.full_json());
    CHECK(ra.n_documents == 10);
}
