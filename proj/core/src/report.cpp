#include "tracs/report.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "tracs/errors.hpp"
#include "tracs/heatmap.hpp"
#include "tracs/rng.hpp"

namespace tracs {
namespace fs = std::filesystem;

namespace {

constexpr std::string_view kCheck = "✓";
constexpr std::string_view kCross = "✗";

// Column titles of the example table, telescope first.
constexpr std::array<std::string_view, 5> kColumnTitles = {"Telescope", "Science", "Instrument",
                                                           "Mention", "Not_telescope"};

std::vector<std::size_t> sample_sorted(std::size_t n, std::size_t k, Rng& rng) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    k = std::min(k, n);
    for (std::size_t i = 0; i < k; ++i) {
        std::swap(idx[i], idx[i + uniform_below(rng, n - i)]);
    }
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

std::string mark(bool ok) { return std::string(ok ? kCheck : kCross); }

void table(std::ostringstream& md, const std::vector<ExampleRow>& rows, bool evidence) {
    md << "| Paper ID |";
    for (auto t : kColumnTitles) md << ' ' << t << " GT | " << t << " Pred |";
    if (evidence) md << " Telescope votes | Tie-broken |";
    md << "\n|---|";
    for (std::size_t i = 0; i < kColumnTitles.size(); ++i) md << "---|---|";
    if (evidence) md << "---|---|";
    md << "\n";
    for (const auto& r : rows) {
        md << "| " << r.gold.bibcode << " | " << r.gold.telescope << " | " << r.predicted.telescope
           << ' ' << mark(r.telescope_match()) << " |";
        for (std::size_t i = 0; i < kNumBooleanLabels; ++i) {
            md << ' ' << int(r.gold.booleans[i]) << " | " << int(r.predicted.booleans[i]) << ' '
               << mark(r.boolean_match(i)) << " |";
        }
        if (evidence && r.evidence) {
            const auto& e = *r.evidence;
            md << ' ';
            for (std::size_t c = 0; c < e.telescope_votes.size(); ++c) {
                md << (c ? "/" : "") << e.telescope_votes[c];
            }
            std::string ties;
            if (e.telescope_tie_broken) ties = "telescope";
            for (std::size_t i = 0; i < kNumBooleanLabels; ++i) {
                if (e.boolean_tie_broken[i]) {
                    if (!ties.empty()) ties += ", ";
                    ties += kBooleanLabelNames[i];
                }
            }
            md << " | " << (ties.empty() ? "-" : ties) << " |";
        }
        md << "\n";
    }
}

}  // namespace

bool ExampleRow::all_match() const {
    if (!telescope_match()) return false;
    for (std::size_t i = 0; i < kNumBooleanLabels; ++i) {
        if (!boolean_match(i)) return false;
    }
    return true;
}

ErrorAnalysis error_analysis_report(const std::vector<DocumentLabels>& predictions,
                                    const std::vector<DocumentLabels>& gold,
                                    const LabelVocabulary& vocabulary,
                                    const std::vector<DocumentPrediction>* evidence,
                                    const ReportOptions& options) {
    ErrorAnalysis out;
    out.metrics = evaluate(predictions, gold, vocabulary, options.variant);

    std::map<std::string_view, const DocumentLabels*> pred_by_id;
    for (const auto& p : predictions) pred_by_id[p.bibcode] = &p;

    std::map<std::string_view, const DocumentPrediction*> evidence_by_id;
    if (evidence) {
        out.has_evidence = true;
        for (const auto& e : *evidence) evidence_by_id[e.bibcode] = &e;
        if (evidence_by_id.size() != evidence->size()) {
            throw ValidationError("evidence lists a bibcode more than once");
        }
        for (const auto& p : predictions) {
            const auto it = evidence_by_id.find(p.bibcode);
            if (it == evidence_by_id.end()) {
                throw ValidationError("evidence has no entry for " + p.bibcode);
            }
            if (!(it->second->labels() == p)) {
                throw ValidationError("evidence for " + p.bibcode + " disagrees with the predictions file");
            }
        }
    } else {
        out.warnings.push_back(
            "no evidence file supplied; vote tallies and tie-break columns are omitted");
    }

    out.error_rates.push_back({"telescope"});
    for (auto name : kBooleanLabelNames) out.error_rates.push_back({std::string(name)});

    std::vector<ExampleRow> correct, incorrect;
    for (const auto& g : gold) {
        ExampleRow row{g, *pred_by_id.at(g.bibcode), std::nullopt};
        if (evidence) row.evidence = *evidence_by_id.at(g.bibcode);
        (row.telescope_match() ? out.error_rates[0].correct : out.error_rates[0].errors)++;
        for (std::size_t i = 0; i < kNumBooleanLabels; ++i) {
            auto& rate = out.error_rates[i + 1];
            (row.boolean_match(i) ? rate.correct : rate.errors)++;
        }
        (row.all_match() ? correct : incorrect).push_back(std::move(row));
    }

    Rng rng(derive_seed(options.seed, "report"));
    for (auto i : sample_sorted(correct.size(), options.correct_rows, rng)) {
        out.correct_examples.push_back(correct[i]);
    }
    for (auto i : sample_sorted(incorrect.size(), options.incorrect_rows, rng)) {
        out.incorrect_examples.push_back(incorrect[i]);
    }
    return out;
}

std::string ErrorAnalysis::markdown() const {
    std::ostringstream md;
    md.setf(std::ios::fixed);
    md.precision(4);
    md << "# Error analysis\n\n";
    for (const auto& w : warnings) md << "> warning: " << w << "\n\n";
    md << "Documents: " << metrics.n_documents << "  \n";
    md << "Composite: " << metrics.composite << "  \n";
    md << "Multiclass macro F1: " << metrics.multiclass_f1 << "\n\n";

    md << "## Per-label error rates\n\n| Label | Errors | Correct | Error rate |\n|---|---|---|---|\n";
    for (const auto& r : error_rates) {
        md << "| " << r.label << " | " << r.errors << " | " << r.correct << " | " << r.rate() << " |\n";
    }

    md << "\n## Correct examples\n\n";
    table(md, correct_examples, has_evidence);
    md << "\n## Incorrect examples\n\n";
    table(md, incorrect_examples, has_evidence);

    md << "\n## Telescope confusion matrix\n\nRows are ground truth, columns are predictions "
          "(confusion.csv, confusion.png).\n\n| |";
    for (const auto& c : metrics.confusion.classes) md << ' ' << c << " |";
    md << "\n|---|";
    for (std::size_t i = 0; i < metrics.confusion.classes.size(); ++i) md << "---|";
    md << "\n";
    for (std::size_t g = 0; g < metrics.confusion.classes.size(); ++g) {
        md << "| " << metrics.confusion.classes[g] << " |";
        for (auto n : metrics.confusion.counts[g]) md << ' ' << n << " |";
        md << "\n";
    }
    return md.str();
}

void ErrorAnalysis::write(const fs::path& dir) const {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    auto put = [&](const char* name, const std::string& text) {
        std::ofstream out(dir / name, std::ios::binary);
        if (!out) throw IoError("cannot write " + (dir / name).string());
        out << text;
    };
    put("report.md", markdown());
    std::ostringstream rates;
    rates << "label,errors,correct,error_rate\n";
    for (const auto& r : error_rates) {
        rates << r.label << ',' << r.errors << ',' << r.correct << ',' << r.rate() << "\n";
    }
    put("error_rates.csv", rates.str());
    put("confusion.csv", metrics.confusion.to_csv());
    put("metrics.json", metrics.full_json().dump(2) + "\n");
    write_confusion_heatmap(dir / "confusion.png", metrics.confusion);
}

}  // namespace tracs
