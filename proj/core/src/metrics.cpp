#include "tracs/metrics.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "tracs/csv.hpp"
#include "tracs/errors.hpp"
#include "tracs/rng.hpp"

namespace tracs {

BoolF1Variant parse_bool_f1_variant(std::string_view s) {
    if (s == "positive") return BoolF1Variant::positive;
    if (s == "macro_binary") return BoolF1Variant::macro_binary;
    throw ConfigError("bool_f1 variant must be 'positive' or 'macro_binary', got '" +
                      std::string(s) + "'");
}

std::string_view to_string(BoolF1Variant v) {
    return v == BoolF1Variant::positive ? "positive" : "macro_binary";
}

namespace {

double f1_from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
    const std::size_t denom = 2 * tp + fp + fn;
    return denom == 0 ? 0.0 : static_cast<double>(2 * tp) / static_cast<double>(denom);
}

void check_lengths(std::size_t a, std::size_t b) {
    if (a != b) {
        throw ValidationError("prediction/gold length mismatch: " + std::to_string(a) + " vs " +
                              std::to_string(b));
    }
}

}  // namespace

double f1_binary(std::span<const std::uint8_t> predictions, std::span<const std::uint8_t> gold) {
    check_lengths(predictions.size(), gold.size());
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        const bool p = predictions[i] != 0;
        const bool g = gold[i] != 0;
        tp += p && g;
        fp += p && !g;
        fn += !p && g;
    }
    return f1_from_counts(tp, fp, fn);
}

double f1_boolean(std::span<const std::uint8_t> predictions, std::span<const std::uint8_t> gold,
                  BoolF1Variant variant) {
    const double pos = f1_binary(predictions, gold);
    if (variant == BoolF1Variant::positive) return pos;
    std::vector<std::uint8_t> np(predictions.size()), ng(gold.size());
    for (std::size_t i = 0; i < np.size(); ++i) np[i] = predictions[i] ? 0 : 1;
    for (std::size_t i = 0; i < ng.size(); ++i) ng[i] = gold[i] ? 0 : 1;
    return 0.5 * (pos + f1_binary(np, ng));
}

std::vector<double> per_class_f1(std::span<const std::size_t> predictions,
                                 std::span<const std::size_t> gold, std::size_t num_classes) {
    check_lengths(predictions.size(), gold.size());
    if (num_classes == 0) throw ValidationError("macro F1 needs at least one class");
    std::vector<std::size_t> tp(num_classes), fp(num_classes), fn(num_classes);
    for (std::size_t i = 0; i < gold.size(); ++i) {
        const auto p = predictions[i];
        const auto g = gold[i];
        if (p >= num_classes || g >= num_classes) {
            throw ValidationError("class id out of range 0.." + std::to_string(num_classes - 1));
        }
        if (p == g) {
            ++tp[g];
        } else {
            ++fp[p];
            ++fn[g];
        }
    }
    std::vector<double> f1(num_classes);
    for (std::size_t c = 0; c < num_classes; ++c) f1[c] = f1_from_counts(tp[c], fp[c], fn[c]);
    return f1;
}

double macro_f1_multiclass(std::span<const std::size_t> predictions,
                           std::span<const std::size_t> gold, std::size_t num_classes) {
    const auto f1 = per_class_f1(predictions, gold, num_classes);
    double sum = 0.0;
    for (double v : f1) sum += v;
    return sum / static_cast<double>(num_classes);
}

double composite_metric(double multiclass_f1, std::span<const double> boolean_f1s) {
    auto in_range = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!in_range(multiclass_f1)) throw ValidationError("multiclass F1 outside [0, 1]");
    if (boolean_f1s.empty()) throw ValidationError("composite needs boolean F1 values");
    double sum = 0.0;
    for (double v : boolean_f1s) {
        if (!in_range(v)) throw ValidationError("boolean F1 outside [0, 1]");
        sum += v;
    }
    return (multiclass_f1 + sum / static_cast<double>(boolean_f1s.size())) / 2.0;
}

std::size_t ConfusionMatrix::total() const {
    std::size_t t = 0;
    for (const auto& row : counts) {
        for (auto v : row) t += v;
    }
    return t;
}

std::string ConfusionMatrix::to_csv() const {
    std::ostringstream out;
    csv::Row header{"gold\\predicted"};
    header.insert(header.end(), classes.begin(), classes.end());
    csv::write_row(out, header);
    for (std::size_t g = 0; g < classes.size(); ++g) {
        csv::Row row{classes[g]};
        for (auto v : counts[g]) row.push_back(std::to_string(v));
        csv::write_row(out, row);
    }
    return out.str();
}

ConfusionMatrix confusion_matrix(std::span<const std::string> predictions,
                                 std::span<const std::string> gold,
                                 const LabelVocabulary& vocabulary) {
    check_lengths(predictions.size(), gold.size());
    ConfusionMatrix m;
    m.classes = vocabulary.classes();
    m.counts.assign(vocabulary.size(), std::vector<std::size_t>(vocabulary.size(), 0));
    for (std::size_t i = 0; i < gold.size(); ++i) {
        ++m.counts[vocabulary.index_of(gold[i])][vocabulary.index_of(predictions[i])];
    }
    return m;
}

nlohmann::json EvalReport::metrics_json() const {
    nlohmann::json bools = nlohmann::json::object();
    for (std::size_t b = 0; b < kNumBooleanLabels; ++b) {
        bools[std::string(kBooleanLabelNames[b])] = boolean_f1[b];
    }
    return {{"multiclass_f1", multiclass_f1},
            {"boolean_f1", bools},
            {"composite", composite},
            {"n_documents", n_documents}};
}

nlohmann::json EvalReport::full_json() const {
    auto j = metrics_json();
    nlohmann::json per_class = nlohmann::json::object();
    for (std::size_t c = 0; c < confusion.classes.size(); ++c) {
        per_class[confusion.classes[c]] = per_class_f1[c];
    }
    j["per_class_f1"] = per_class;
    j["classes"] = confusion.classes;
    j["confusion_matrix"] = confusion.counts;
    j["bool_f1_variant"] = std::string(to_string(variant));
    return j;
}

EvalReport evaluate(const std::vector<DocumentLabels>& predictions,
                    const std::vector<DocumentLabels>& gold, const LabelVocabulary& vocabulary,
                    BoolF1Variant variant) {
    std::unordered_map<std::string, const DocumentLabels*> by_id;
    for (const auto& p : predictions) {
        if (!by_id.emplace(p.bibcode, &p).second) {
            throw ValidationError("duplicate prediction for " + p.bibcode);
        }
    }
    const std::size_t n = gold.size();
    std::vector<std::size_t> pred_ids(n), gold_ids(n);
    std::vector<std::string> pred_names(n), gold_names(n);
    std::array<std::vector<std::uint8_t>, kNumBooleanLabels> pb, gb;
    for (auto& v : pb) v.resize(n);
    for (auto& v : gb) v.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto it = by_id.find(gold[i].bibcode);
        if (it == by_id.end()) throw ValidationError("no prediction for " + gold[i].bibcode);
        const auto& p = *it->second;
        pred_ids[i] = vocabulary.index_of(p.telescope);
        gold_ids[i] = vocabulary.index_of(gold[i].telescope);
        pred_names[i] = p.telescope;
        gold_names[i] = gold[i].telescope;
        for (std::size_t b = 0; b < kNumBooleanLabels; ++b) {
            pb[b][i] = p.booleans[b];
            gb[b][i] = gold[i].booleans[b];
        }
    }
    if (by_id.size() != n) {
        throw ValidationError("predictions contain " + std::to_string(by_id.size() - n) +
                              " bibcode(s) absent from gold");
    }

    EvalReport r;
    r.variant = variant;
    r.n_documents = n;
    r.per_class_f1 = per_class_f1(pred_ids, gold_ids, vocabulary.size());
    double sum = 0.0;
    for (double v : r.per_class_f1) sum += v;
    r.multiclass_f1 = sum / static_cast<double>(vocabulary.size());
    for (std::size_t b = 0; b < kNumBooleanLabels; ++b) {
        r.boolean_f1[b] = f1_boolean(pb[b], gb[b], variant);
    }
    r.composite = composite_metric(r.multiclass_f1, r.boolean_f1);
    r.confusion = confusion_matrix(pred_names, gold_names, vocabulary);
    return r;
}

std::vector<DocumentLabels> gold_labels(const std::vector<PaperRecord>& records) {
    std::vector<DocumentLabels> out;
    out.reserve(records.size());
    for (const auto& r : records) {
        if (!r.is_labeled()) throw ValidationError("record " + r.bibcode + " is unlabeled");
        out.push_back({r.bibcode, *r.telescope, *r.booleans});
    }
    return out;
}

BaselinePrior parse_baseline_prior(std::string_view s) {
    if (s == "uniform") return BaselinePrior::uniform;
    if (s == "empirical") return BaselinePrior::empirical;
    throw ConfigError("unknown baseline prior '" + std::string(s) + "' (expected uniform or empirical)");
}

std::string_view to_string(BaselinePrior p) {
    return p == BaselinePrior::uniform ? "uniform" : "empirical";
}

EvalReport random_baseline(const std::vector<PaperRecord>& records,
                           const LabelVocabulary& vocabulary, std::uint64_t seed,
                           BoolF1Variant variant, BaselinePrior prior) {
    const auto gold = gold_labels(records);
    if (vocabulary.size() == 0) throw ValidationError("random baseline needs a vocabulary");
    const std::size_t K = vocabulary.size();

    std::vector<double> class_cdf(K);
    std::array<double, kNumBooleanLabels> positive_rate{};
    if (prior == BaselinePrior::uniform || gold.empty()) {
        for (std::size_t c = 0; c < K; ++c) class_cdf[c] = static_cast<double>(c + 1) / K;
        positive_rate.fill(0.5);
    } else {
        std::vector<double> counts(K, 0.0);
        for (const auto& g : gold) {
            counts[vocabulary.index_of(g.telescope)] += 1.0;
            for (std::size_t b = 0; b < kNumBooleanLabels; ++b) positive_rate[b] += g.booleans[b];
        }
        double acc = 0.0;
        for (std::size_t c = 0; c < K; ++c) class_cdf[c] = (acc += counts[c] / gold.size());
        for (auto& r : positive_rate) r /= static_cast<double>(gold.size());
    }

    Rng rng(derive_seed(seed, "random-baseline"));
    std::vector<DocumentLabels> preds;
    preds.reserve(gold.size());
    for (const auto& g : gold) {
        DocumentLabels p;
        p.bibcode = g.bibcode;
        if (prior == BaselinePrior::uniform) {
            p.telescope = vocabulary.name_of(uniform_below(rng, K));
            for (auto& b : p.booleans) b = uniform_below(rng, 2) == 1;
        } else {
            const double u = uniform_unit(rng);
            const auto it = std::upper_bound(class_cdf.begin(), class_cdf.end() - 1, u);
            p.telescope = vocabulary.name_of(static_cast<std::size_t>(it - class_cdf.begin()));
            for (std::size_t b = 0; b < kNumBooleanLabels; ++b) {
                p.booleans[b] = uniform_unit(rng) < positive_rate[b];
            }
        }
        preds.push_back(std::move(p));
    }
    return evaluate(preds, gold, vocabulary, variant);
}

void write_metrics_json(const std::filesystem::path& path, const EvalReport& report) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << report.metrics_json().dump(2) << "\n";
}

}  // namespace tracs
