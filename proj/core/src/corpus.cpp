#include "tracs/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "tracs/csv.hpp"
#include "tracs/errors.hpp"

namespace tracs {
namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

bool is_null_literal(std::string_view cell) {
    const auto l = lower(trim(cell));
    return l == "nan" || l == "null" || l == "none";
}

}  // namespace

std::optional<bool> parse_bool_cell(std::string_view cell) {
    const auto l = lower(trim(cell));
    if (l == "true" || l == "1") return true;
    if (l == "false" || l == "0") return false;
    return std::nullopt;
}

std::vector<PaperRecord> parse_csv(std::string_view text, IngestStats* stats) {
    const csv::Table table = csv::parse(text);

    std::array<std::size_t, kCorpusColumns.size()> col{};
    for (std::size_t c = 0; c < kCorpusColumns.size(); ++c) {
        const auto it = std::find(table.header.begin(), table.header.end(), kCorpusColumns[c]);
        if (it == table.header.end()) {
            throw SchemaError("corpus CSV is missing mandatory column '" +
                              std::string(kCorpusColumns[c]) + "'");
        }
        col[c] = static_cast<std::size_t>(it - table.header.begin());
    }

    IngestStats local;
    std::vector<PaperRecord> records;
    records.reserve(table.rows.size());
    std::unordered_map<std::string, std::size_t> seen;
    std::vector<std::string> duplicates;

    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::size_t line = table.line_numbers[r];
        auto cell = [&](std::size_t c) -> std::string {
            const std::size_t idx = col[c];
            if (idx >= row.size()) return {};
            if (is_null_literal(row[idx])) {
                ++local.null_literal_cells;
                return {};
            }
            return row[idx];
        };

        PaperRecord rec;
        rec.bibcode = std::string(trim(cell(0)));
        if (rec.bibcode.empty()) {
            throw ValidationError("row " + std::to_string(r + 1) + " (line " + std::to_string(line) +
                                  "): empty bibcode");
        }
        if (auto t = std::string(trim(cell(1))); !t.empty()) rec.telescope = std::move(t);
        rec.author = cell(2);
        {
            const auto y = trim(cell(3));
            int value = 0;
            const auto [ptr, ec] = std::from_chars(y.data(), y.data() + y.size(), value);
            // Lenient: "2014.0" style floats keep their integer part.
            if (ec == std::errc{} && !y.empty() && (ptr == y.data() + y.size() || *ptr == '.')) {
                rec.year = value;
            }
        }
        std::string* text_fields[] = {&rec.title, &rec.abstract, &rec.body, &rec.acknowledgments,
                                      &rec.grants};
        for (std::size_t f = 0; f < 5; ++f) {
            *text_fields[f] = cell(4 + f);
            if (text_fields[f]->empty()) ++local.empty_text_cells;
        }

        BooleanLabels labels{};
        std::size_t present = 0;
        for (std::size_t b = 0; b < kNumBooleanLabels; ++b) {
            const std::string raw = cell(9 + b);
            if (trim(raw).empty()) continue;
            const auto v = parse_bool_cell(raw);
            if (!v) {
                throw ValidationError("row " + std::to_string(r + 1) + " (line " +
                                      std::to_string(line) + "): cannot parse boolean '" + raw +
                                      "' in column '" + std::string(kBooleanLabelNames[b]) + "'");
            }
            labels[b] = *v;
            ++present;
        }
        if (present == kNumBooleanLabels) {
            rec.booleans = labels;
        } else if (present != 0) {
            throw ValidationError("row " + std::to_string(r + 1) + " (line " + std::to_string(line) +
                                  "): boolean labels must be all present or all absent");
        }

        if (auto [it, inserted] = seen.emplace(rec.bibcode, r); !inserted) {
            duplicates.push_back(rec.bibcode);
        }
        records.push_back(std::move(rec));
    }

    if (!duplicates.empty()) {
        std::string msg = "duplicate bibcode(s):";
        const std::set<std::string> unique(duplicates.begin(), duplicates.end());
        for (const auto& d : unique) msg += " " + d;
        throw ValidationError(msg);
    }

    local.rows = records.size();
    if (stats) *stats = local;
    return records;
}

std::vector<PaperRecord> load_csv(const std::filesystem::path& path, IngestStats* stats) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open corpus CSV " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_csv(buf.str(), stats);
}

void write_csv_header(std::ostream& out) {
    csv::write_row(out, csv::Row(kCorpusColumns.begin(), kCorpusColumns.end()));
}

void write_csv_row(std::ostream& out, const PaperRecord& r) {
    csv::Row row{r.bibcode,
                 r.telescope.value_or(""),
                 r.author,
                 r.year ? std::to_string(*r.year) : "",
                 r.title,
                 r.abstract,
                 r.body,
                 r.acknowledgments,
                 r.grants};
    for (std::size_t b = 0; b < kNumBooleanLabels; ++b) {
        row.push_back(r.booleans ? ((*r.booleans)[b] ? "TRUE" : "FALSE") : "");
    }
    csv::write_row(out, row);
}

std::string to_csv(const std::vector<PaperRecord>& records) {
    std::ostringstream out;
    write_csv_header(out);
    for (const auto& r : records) write_csv_row(out, r);
    return out.str();
}

void write_csv(const std::filesystem::path& path, const std::vector<PaperRecord>& records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << to_csv(records);
    if (!out) throw IoError("write failed: " + path.string());
}

std::string concatenate_fields(const PaperRecord& record) {
    std::string out;
    for (const std::string* f : {&record.title, &record.abstract, &record.body,
                                 &record.acknowledgments, &record.grants}) {
        if (f->empty()) continue;
        if (!out.empty()) out.push_back('\n');
        out += *f;
    }
    return out;
}

LabelVocabulary::LabelVocabulary(std::vector<std::string> names) {
    std::sort(names.begin(), names.end());
    names.erase(std::unique(names.begin(), names.end()), names.end());
    classes_ = std::move(names);
    for (std::size_t i = 0; i < classes_.size(); ++i) index_.emplace(classes_[i], i);
}

std::optional<std::size_t> LabelVocabulary::find(std::string_view name) const {
    const auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::size_t LabelVocabulary::index_of(std::string_view name) const {
    if (auto id = find(name)) return *id;
    throw ValidationError("unknown telescope class '" + std::string(name) + "'");
}

std::string LabelVocabulary::to_json() const {
    return nlohmann::json{{"classes", classes_}}.dump(2) + "\n";
}

LabelVocabulary LabelVocabulary::from_json(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("vocabulary JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("classes") || !j["classes"].is_array()) {
        throw SchemaError("vocabulary JSON must be an object with a \"classes\" array");
    }
    std::vector<std::string> names;
    for (const auto& c : j["classes"]) {
        if (!c.is_string()) throw SchemaError("vocabulary classes must be strings");
        names.push_back(c.get<std::string>());
    }
    LabelVocabulary v(names);
    if (v.classes() != names) {
        throw SchemaError("vocabulary classes must be distinct and lexicographically sorted");
    }
    return v;
}

void LabelVocabulary::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << to_json();
}

LabelVocabulary LabelVocabulary::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open vocabulary " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_json(buf.str());
}

LabelVocabulary build_vocabulary(const std::vector<PaperRecord>& records) {
    if (records.empty()) throw ValidationError("cannot build a vocabulary from zero records");
    std::vector<std::string> names;
    names.reserve(records.size());
    for (const auto& r : records) {
        if (!r.telescope) {
            throw ValidationError("record " + r.bibcode + " has no telescope label");
        }
        names.push_back(*r.telescope);
    }
    return LabelVocabulary(std::move(names));
}

}  // namespace tracs
