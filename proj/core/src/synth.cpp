#include "tracs/synth.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "tracs/errors.hpp"
#include "tracs/rng.hpp"

namespace tracs {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::string_view kFiller[] = {
    "we",         "the",         "of",         "and",        "in",          "a",
    "to",         "is",          "with",       "for",        "that",        "this",
    "galaxy",     "star",        "cluster",    "emission",   "spectrum",    "flux",
    "redshift",   "halo",        "disk",       "accretion",  "outflow",     "jet",
    "nebula",     "supernova",   "remnant",    "quasar",     "dust",        "gas",
    "model",      "fit",         "parameter",  "sample",     "survey",      "field",
    "source",     "catalog",     "luminosity", "mass",       "temperature", "density",
    "velocity",   "metallicity", "abundance",  "profile",    "region",      "population",
    "evolution",  "formation",   "structure",  "scale",      "distance",    "energy",
    "band",       "line",        "continuum",  "absorption", "variability", "periodic",
    "burst",      "transient",   "binary",     "pulsar",     "neutron",     "black",
    "hole",       "merger",      "interaction","feedback",   "wind",        "shock",
    "magnetic",   "radiation",   "thermal",    "component",  "result",      "analysis",
    "method",     "estimate",    "uncertainty","error",      "systematic",  "trend",
    "relation",   "correlation", "ratio",      "fraction",   "rate",        "history",
    "simulation", "theory",      "prediction", "constraint", "limit",       "detection"};

// Context words placed around a class name so the name appears in varying surroundings.
constexpr std::array<std::string_view, 8> kClassContext = {
    "observations", "archive", "imaging", "program", "data", "pointing", "campaign", "proposal"};

// Cue words per boolean label, used when the label is true.
constexpr std::array<std::array<std::string_view, 4>, kNumBooleanLabels> kLabelCues = {{
    {"analyze", "reduced", "measured", "derived"},
    {"detector", "calibration", "optics", "instrument"},
    {"previously", "cited", "reported", "referenced"},
    {"namesake", "unrelated", "homonym", "coincidental"},
}};

std::string lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

// Builds sentences whose total hash-word token count is exactly `budget`.
// Every sentence is words followed by one "." token.
class TextBuilder {
public:
    TextBuilder(const SynthSpec& spec, std::size_t cls, const BooleanLabels& labels, Rng& rng)
        : spec_(spec), cls_(cls), labels_(labels), rng_(rng) {}

    std::string take(std::size_t budget) {
        std::string out;
        while (budget > 0) {
            auto words = sentence();
            // Leave room for the closing period.
            if (words.size() + 1 > budget) words.resize(budget - (budget > 1 ? 1 : 0));
            const bool close = words.size() < budget;
            for (std::size_t i = 0; i < words.size(); ++i) {
                if (!out.empty()) out += ' ';
                out += words[i];
            }
            budget -= words.size();
            if (close) {
                out += '.';
                --budget;
            }
        }
        return out;
    }

private:
    std::vector<std::string> sentence() {
        const std::size_t n = 6 + uniform_below(rng_, 7);
        std::vector<std::string> words;
        words.reserve(n + 6);
        for (std::size_t i = 0; i < n; ++i) {
            words.emplace_back(kFiller[uniform_below(rng_, std::size(kFiller))]);
        }
        auto insert = [&](std::string w) {
            words.insert(words.begin() + static_cast<std::ptrdiff_t>(uniform_below(rng_, words.size() + 1)),
                         std::move(w));
        };
        // Class cue: own class with probability `correlation`, else a random class.
        std::size_t c = cls_;
        if (uniform_unit(rng_) >= spec_.correlation) c = uniform_below(rng_, spec_.classes.size());
        insert(lower(spec_.classes[c]) + " " +
               std::string(kClassContext[uniform_below(rng_, kClassContext.size())]));
        for (std::size_t b = 0; b < kNumBooleanLabels; ++b) {
            if (labels_[b] && uniform_unit(rng_) < spec_.correlation) {
                insert(std::string(kLabelCues[b][uniform_below(rng_, kLabelCues[b].size())]));
            }
        }
        // Multi-word inserts were joined with a space; split them back out.
        std::vector<std::string> flat;
        for (auto& w : words) {
            std::size_t start = 0;
            for (std::size_t i = 0; i <= w.size(); ++i) {
                if (i == w.size() || w[i] == ' ') {
                    if (i > start) flat.push_back(w.substr(start, i - start));
                    start = i + 1;
                }
            }
        }
        return flat;
    }

    const SynthSpec& spec_;
    std::size_t cls_;
    const BooleanLabels& labels_;
    Rng& rng_;
};

}  // namespace

void SynthSpec::validate() const {
    if (classes.empty()) throw ConfigError("synth: at least one class required");
    std::vector<std::string> sorted = classes;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        throw ConfigError("synth: class names must be distinct");
    }
    for (const auto& c : classes) {
        if (c.empty()) throw ConfigError("synth: empty class name");
        for (char ch : c) {
            if (!std::isalnum(static_cast<unsigned char>(ch))) {
                throw ConfigError("synth: class name '" + c + "' must be alphanumeric");
            }
        }
    }
    if (docs_per_class.size() != classes.size()) {
        throw ConfigError("synth: docs_per_class needs one count per class");
    }
    if (total_documents() == 0) throw ConfigError("synth: spec produces zero documents");
    if (!(correlation >= 0.0 && correlation <= 1.0)) throw ConfigError("synth: correlation must lie in [0, 1]");
    for (double s : skew) {
        if (!(s >= 0.0 && s <= 1.0)) throw ConfigError("synth: skew values must lie in [0, 1]");
    }
}

std::size_t SynthSpec::total_documents() const {
    std::size_t n = 0;
    for (auto d : docs_per_class) n += d;
    return n;
}

json SynthSpec::to_json() const {
    json sk = json::object();
    for (std::size_t b = 0; b < kNumBooleanLabels; ++b) sk[std::string(kBooleanLabelNames[b])] = skew[b];
    return {{"classes", classes},         {"docs_per_class", docs_per_class},
            {"tokens_per_doc", tokens_per_doc}, {"correlation", correlation},
            {"skew", sk},                 {"seed", seed},
            {"labeled", labeled}};
}

SynthSpec SynthSpec::from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("synth spec must be a JSON object");
    static const std::array<std::string_view, 7> keys = {
        "classes", "docs_per_class", "tokens_per_doc", "correlation", "skew", "seed", "labeled"};
    for (const auto& [key, value] : j.items()) {
        if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
            throw ConfigError("synth spec: unknown key '" + key + "'");
        }
    }
    SynthSpec s;
    try {
        if (j.contains("classes")) s.classes = j["classes"].get<std::vector<std::string>>();
        if (j.contains("docs_per_class")) {
            const auto& d = j["docs_per_class"];
            if (d.is_array()) {
                s.docs_per_class = d.get<std::vector<std::size_t>>();
            } else {
                s.docs_per_class.assign(s.classes.size(), d.get<std::size_t>());
            }
        } else {
            s.docs_per_class.assign(s.classes.size(), 100);
        }
        s.tokens_per_doc = j.value("tokens_per_doc", s.tokens_per_doc);
        s.correlation = j.value("correlation", s.correlation);
        if (j.contains("skew")) {
            for (const auto& [label, value] : j["skew"].items()) {
                const auto it = std::find(kBooleanLabelNames.begin(), kBooleanLabelNames.end(), label);
                if (it == kBooleanLabelNames.end()) {
                    throw ConfigError("synth spec: unknown skew label '" + label + "'");
                }
                s.skew[static_cast<std::size_t>(it - kBooleanLabelNames.begin())] = value.get<double>();
            }
        }
        s.seed = j.value("seed", s.seed);
        s.labeled = j.value("labeled", s.labeled);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("synth spec: ") + e.what());
    }
    s.validate();
    return s;
}

SynthSpec SynthSpec::load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open synth spec " + path.string());
    try {
        return from_json(json::parse(in));
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

SyntheticCorpus::SyntheticCorpus(SynthSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    for (std::size_t c = 0; c < spec_.classes.size(); ++c) {
        class_of_.insert(class_of_.end(), spec_.docs_per_class[c], c);
    }
    Rng rng(derive_seed(spec_.seed, "order"));
    for (std::size_t i = class_of_.size(); i > 1; --i) {
        std::swap(class_of_[i - 1], class_of_[uniform_below(rng, i)]);
    }
}

PaperRecord SyntheticCorpus::record(std::size_t i) const {
    const std::size_t cls = class_of_.at(i);
    Rng rng(derive_seed(spec_.seed, static_cast<std::uint64_t>(i)));
    BooleanLabels labels{};
    for (std::size_t b = 0; b < kNumBooleanLabels; ++b) labels[b] = uniform_unit(rng) >= spec_.skew[b];

    PaperRecord r;
    const int year = 2000 + static_cast<int>(i % 25);
    char id[64];
    std::snprintf(id, sizeof id, "%dSYN..%07zu", year, i);
    r.bibcode = std::string(id) + "_" + spec_.classes[cls];
    r.author = "Author" + std::to_string(uniform_below(rng, 5000)) + ", A.";
    r.year = year;

    // Split the token budget: ~3% title, ~12% abstract, ~6% acknowledgments,
    // ~2% grants, the rest body.
    const std::size_t n = spec_.tokens_per_doc;
    const std::size_t title = std::min<std::size_t>(n, (n * 3 + 99) / 100);
    const std::size_t abstract = std::min(n - title, n * 12 / 100);
    const std::size_t ack = std::min(n - title - abstract, n * 6 / 100);
    const std::size_t grants = std::min(n - title - abstract - ack, n * 2 / 100);
    const std::size_t body = n - title - abstract - ack - grants;

    TextBuilder text(spec_, cls, labels, rng);
    r.title = text.take(title);
    r.abstract = text.take(abstract);
    r.body = text.take(body);
    r.acknowledgments = text.take(ack);
    r.grants = text.take(grants);
    if (spec_.labeled) {
        r.telescope = spec_.classes[cls];
        r.booleans = labels;
    }
    return r;
}

std::vector<PaperRecord> SyntheticCorpus::records() const {
    std::vector<PaperRecord> out;
    out.reserve(size());
    for (std::size_t i = 0; i < size(); ++i) out.push_back(record(i));
    return out;
}

void SyntheticCorpus::write_csv(const fs::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    write_csv_header(out);
    for (std::size_t i = 0; i < size(); ++i) write_csv_row(out, record(i));
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace tracs
