#include "tracs/inference.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "tracs/csv.hpp"
#include "tracs/errors.hpp"
#include "tracs/loss.hpp"

namespace tracs {

using nlohmann::json;

std::vector<ChunkPrediction> predict_document(const Model& model, const Tokenizer& tokenizer,
                                              const PaperRecord& record, std::size_t window) {
    const auto entry = chunk_record(record, tokenizer, window);
    std::vector<ChunkPrediction> out;
    out.reserve(entry.chunks.size());
    for (const auto& c : entry.chunks) out.push_back(forward_chunk(model, c));
    return out;
}

// Mean probabilities closer than this count as equal, so that summation
// order cannot decide a tie.
constexpr double kProbabilityTieTolerance = 1e-12;

DocumentPrediction aggregate(std::span<const ChunkPrediction> predictions,
                             const LabelVocabulary& vocabulary, const AggregationConfig& config) {
    if (predictions.empty()) throw ValidationError("aggregate: no chunk predictions");
    const std::size_t K = vocabulary.size();
    for (const auto& p : predictions) {
        if (p.bibcode != predictions.front().bibcode) {
            throw ValidationError("aggregate: mixed bibcodes (" + predictions.front().bibcode + ", " +
                                  p.bibcode + ")");
        }
        if (p.telescope_logits.size() != K) {
            throw ValidationError("aggregate: chunk has " + std::to_string(p.telescope_logits.size()) +
                                  " telescope logits, vocabulary has " + std::to_string(K));
        }
    }
    // Canonical order so floating-point sums do not depend on input order.
    std::vector<const ChunkPrediction*> ordered;
    for (const auto& p : predictions) ordered.push_back(&p);
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const auto* a, const auto* b) { return a->chunk_index < b->chunk_index; });

    DocumentPrediction d;
    d.bibcode = predictions.front().bibcode;
    d.n_chunks = predictions.size();
    d.telescope_votes.assign(K, 0);
    d.mean_telescope_probability.assign(K, 0.0);
    std::array<double, kNumBooleanLabels> prob_sum{};

    for (const auto* p : ordered) {
        const auto& logits = p->telescope_logits;
        // argmax, first index on exact ties
        const auto best = static_cast<std::size_t>(
            std::max_element(logits.begin(), logits.end()) - logits.begin());
        ++d.telescope_votes[best];
        const auto probs = softmax(logits);
        for (std::size_t c = 0; c < K; ++c) d.mean_telescope_probability[c] += probs[c];
        for (std::size_t b = 0; b < kNumBooleanLabels; ++b) {
            const double prob = sigmoid(p->boolean_logits[b]);
            prob_sum[b] += prob;
            ++d.boolean_votes[b][prob >= config.threshold ? 0 : 1];
        }
    }
    const auto n = static_cast<double>(predictions.size());
    for (auto& v : d.mean_telescope_probability) v /= n;
    for (std::size_t b = 0; b < kNumBooleanLabels; ++b) d.mean_boolean_probability[b] = prob_sum[b] / n;

    const std::size_t top = *std::max_element(d.telescope_votes.begin(), d.telescope_votes.end());
    std::vector<std::size_t> tied;
    for (std::size_t c = 0; c < K; ++c) {
        if (d.telescope_votes[c] == top) tied.push_back(c);
    }
    std::size_t winner = tied.front();
    if (tied.size() > 1) {
        d.telescope_tie_broken = true;
        for (auto c : tied) {
            if (d.mean_telescope_probability[c] > d.mean_telescope_probability[winner] + kProbabilityTieTolerance) {
                winner = c;
            }
        }
    }
    d.telescope_id = winner;
    d.telescope = vocabulary.name_of(winner);

    for (std::size_t b = 0; b < kNumBooleanLabels; ++b) {
        const auto [yes, no] = std::pair{d.boolean_votes[b][0], d.boolean_votes[b][1]};
        if (yes != no) {
            d.booleans[b] = yes > no;
        } else {
            d.boolean_tie_broken[b] = true;
            d.booleans[b] = d.mean_boolean_probability[b] >= config.threshold - kProbabilityTieTolerance;
        }
    }
    return d;
}

void check_compatible(const Model& model, const LabelVocabulary& vocabulary,
                      const Tokenizer& tokenizer) {
    if (model.head.num_classes() != vocabulary.size()) {
        throw ConfigError("model head has " + std::to_string(model.head.num_classes()) +
                          " telescope classes but the vocabulary has " +
                          std::to_string(vocabulary.size()));
    }
    if (tokenizer.vocabulary_size() > model.encoder->vocabulary_size()) {
        throw ConfigError("tokenizer vocabulary (" + std::to_string(tokenizer.vocabulary_size()) +
                          ") exceeds the encoder embedding table (" +
                          std::to_string(model.encoder->vocabulary_size()) + ")");
    }
}

std::vector<DocumentPrediction> predict_corpus(const Model& model, const Tokenizer& tokenizer,
                                               const LabelVocabulary& vocabulary,
                                               const std::vector<PaperRecord>& records,
                                               std::size_t window, const AggregationConfig& config) {
    check_compatible(model, vocabulary, tokenizer);
    if (window > model.encoder->max_positions()) {
        throw ConfigError("window " + std::to_string(window) + " exceeds encoder max_positions " +
                          std::to_string(model.encoder->max_positions()));
    }
    std::vector<DocumentPrediction> out;
    out.reserve(records.size());
    for (const auto& r : records) {
        const auto chunks = predict_document(model, tokenizer, r, window);
        out.push_back(aggregate(chunks, vocabulary, config));
    }
    return out;
}

std::string predictions_csv(const std::vector<DocumentLabels>& labels) {
    std::ostringstream out;
    csv::write_row(out, csv::Row(kPredictionColumns.begin(), kPredictionColumns.end()));
    for (const auto& l : labels) {
        csv::Row row{l.bibcode, l.telescope};
        for (bool b : l.booleans) row.push_back(b ? "1" : "0");
        csv::write_row(out, row);
    }
    return out.str();
}

void write_predictions_csv(const std::filesystem::path& path,
                           const std::vector<DocumentPrediction>& predictions) {
    std::vector<DocumentLabels> labels;
    labels.reserve(predictions.size());
    for (const auto& p : predictions) labels.push_back(p.labels());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << predictions_csv(labels);
    if (!out) throw IoError("write failed: " + path.string());
}

std::vector<DocumentLabels> read_labels_csv(const std::filesystem::path& path) {
    const auto table = csv::read_file(path);
    const bool corpus_shape =
        std::find(table.header.begin(), table.header.end(), "body") != table.header.end();
    if (corpus_shape) return gold_labels(load_csv(path));

    std::array<std::size_t, kPredictionColumns.size()> col{};
    for (std::size_t c = 0; c < kPredictionColumns.size(); ++c) {
        const auto it = std::find(table.header.begin(), table.header.end(), kPredictionColumns[c]);
        if (it == table.header.end()) {
            throw SchemaError(path.string() + ": missing column '" + std::string(kPredictionColumns[c]) +
                              "'");
        }
        col[c] = static_cast<std::size_t>(it - table.header.begin());
    }
    std::vector<DocumentLabels> out;
    out.reserve(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        auto cell = [&](std::size_t c) -> const std::string& {
            if (col[c] >= row.size()) {
                throw ValidationError(path.string() + " line " + std::to_string(table.line_numbers[r]) +
                                      ": too few cells");
            }
            return row[col[c]];
        };
        DocumentLabels l;
        l.bibcode = cell(0);
        l.telescope = cell(1);
        if (l.bibcode.empty() || l.telescope.empty()) {
            throw ValidationError(path.string() + " line " + std::to_string(table.line_numbers[r]) +
                                  ": empty bibcode or telescope");
        }
        for (std::size_t b = 0; b < kNumBooleanLabels; ++b) {
            const auto v = parse_bool_cell(cell(2 + b));
            if (!v) {
                throw ValidationError(path.string() + " line " +
                                      std::to_string(table.line_numbers[r]) + ": bad boolean '" +
                                      cell(2 + b) + "'");
            }
            l.booleans[b] = *v;
        }
        out.push_back(std::move(l));
    }
    return out;
}

json DocumentPrediction::to_json() const {
    json bools = json::object(), votes = json::object(), ties = json::object(),
         probs = json::object();
    for (std::size_t b = 0; b < kNumBooleanLabels; ++b) {
        const std::string name(kBooleanLabelNames[b]);
        bools[name] = booleans[b] ? 1 : 0;
        votes[name] = {{"yes", boolean_votes[b][0]}, {"no", boolean_votes[b][1]}};
        ties[name] = boolean_tie_broken[b];
        probs[name] = mean_boolean_probability[b];
    }
    ties["telescope"] = telescope_tie_broken;
    return {{"bibcode", bibcode},
            {"telescope", telescope},
            {"telescope_id", telescope_id},
            {"booleans", bools},
            {"n_chunks", n_chunks},
            {"telescope_votes", telescope_votes},
            {"boolean_votes", votes},
            {"tie_broken", ties},
            {"mean_telescope_probability", mean_telescope_probability},
            {"mean_boolean_probability", probs}};
}

DocumentPrediction DocumentPrediction::from_json(const json& j) {
    DocumentPrediction d;
    try {
        d.bibcode = j.at("bibcode").get<std::string>();
        d.telescope = j.at("telescope").get<std::string>();
        d.telescope_id = j.at("telescope_id").get<std::size_t>();
        d.n_chunks = j.at("n_chunks").get<std::size_t>();
        d.telescope_votes = j.at("telescope_votes").get<std::vector<std::size_t>>();
        d.mean_telescope_probability = j.at("mean_telescope_probability").get<std::vector<double>>();
        d.telescope_tie_broken = j.at("tie_broken").at("telescope").get<bool>();
        for (std::size_t b = 0; b < kNumBooleanLabels; ++b) {
            const std::string name(kBooleanLabelNames[b]);
            d.booleans[b] = j.at("booleans").at(name).get<int>() != 0;
            d.boolean_votes[b][0] = j.at("boolean_votes").at(name).at("yes").get<std::size_t>();
            d.boolean_votes[b][1] = j.at("boolean_votes").at(name).at("no").get<std::size_t>();
            d.boolean_tie_broken[b] = j.at("tie_broken").at(name).get<bool>();
            d.mean_boolean_probability[b] = j.at("mean_boolean_probability").at(name).get<double>();
        }
    } catch (const json::exception& e) {
        throw SchemaError(std::string("evidence record: ") + e.what());
    }
    return d;
}

void write_evidence_jsonl(const std::filesystem::path& path,
                          const std::vector<DocumentPrediction>& predictions) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    for (const auto& p : predictions) out << p.to_json().dump() << "\n";
    if (!out) throw IoError("write failed: " + path.string());
}

std::vector<DocumentPrediction> read_evidence_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open evidence " + path.string());
    std::vector<DocumentPrediction> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        try {
            out.push_back(DocumentPrediction::from_json(json::parse(line)));
        } catch (const json::exception& e) {
            throw SchemaError(path.string() + " line " + std::to_string(n) + ": " + e.what());
        } catch (const SchemaError& e) {
            throw SchemaError(path.string() + " line " + std::to_string(n) + ": " + e.what());
        }
    }
    return out;
}

EvalReport frozen_baseline(const Model& model, const Tokenizer& tokenizer,
                           const LabelVocabulary& vocabulary,
                           const std::vector<PaperRecord>& records, std::size_t window,
                           const AggregationConfig& config, BoolF1Variant variant) {
    if (model.encoder->mode() != EncoderMode::frozen) {
        throw ConfigError("frozen baseline requires the encoder in frozen mode");
    }
    const auto gold = gold_labels(records);
    const auto preds = predict_corpus(model, tokenizer, vocabulary, records, window, config);
    std::vector<DocumentLabels> labels;
    labels.reserve(preds.size());
    for (const auto& p : preds) labels.push_back(p.labels());
    return evaluate(labels, gold, vocabulary, variant);
}

}  // namespace tracs
