#include <doctest.h>

#include <algorithm>
#include <set>

#include "support.hpp"
#include "tracs/corpus.hpp"
#include "tracs/csv.hpp"
#include "tracs/errors.hpp"
#include "tracs/rng.hpp"

using namespace tracs;

namespace {

const std::string kHeader =
    "bibcode,telescope,author,year,title,abstract,body,acknowledgments,grants,science,"
    "instrumentation,mention,not_telescope\n";

PaperRecord make_record(std::string id) {
    PaperRecord r;
    r.bibcode = std::move(id);
    r.telescope = "HST";
    r.author = "Doe, J.";
    r.year = 2014;
    r.title = "T";
    r.abstract = "A";
    r.body = "B";
    r.acknowledgments = "K";
    r.grants = "G";
    r.booleans = BooleanLabels{true, false, false, true};
    return r;
}

}  // namespace

TEST_CASE("csv parser handles quoting, embedded newlines and CRLF") {
    const auto t = csv::parse("a,b\r\n\"x,1\",\"line1\nline2\"\r\n\"say \"\"hi\"\"\",\n");
    REQUIRE(t.rows.size() == 2);
    CHECK(t.header == csv::Row{"a", "b"});
    CHECK(t.rows[0] == csv::Row{"x,1", "line1\nline2"});
    CHECK(t.rows[1] == csv::Row{"say \"hi\"", ""});
    CHECK(t.line_numbers[1] == 4);
    CHECK_THROWS_AS(csv::parse("a\n\"open"), SchemaError);
}

TEST_CASE("load_csv parses rows in order") {
    const auto recs = parse_csv(kHeader +
                                "b1,HST,Doe,2001,T1,A1,B1,K1,G1,TRUE,false,0,1\n"
                                "b2,JWST,Roe,n/a,T2,,B2,,,1,0,FALSE,true\n");
    REQUIRE(recs.size() == 2);
    CHECK(recs[0].bibcode == "b1");
    CHECK(recs[0].year == 2001);
    CHECK(*recs[0].booleans == BooleanLabels{true, false, false, true});
    CHECK_FALSE(recs[1].year.has_value());
    CHECK(recs[1].abstract.empty());
    CHECK(*recs[1].booleans == BooleanLabels{true, false, false, true});
}

TEST_CASE("header-only CSV yields no records") {
    CHECK(parse_csv(kHeader).empty());
}

TEST_CASE("empty grants cell becomes the empty string") {
    const auto recs = parse_csv(kHeader + "b1,HST,a,2000,t,ab,bo,ack,,1,0,0,0\n");
    CHECK(recs.at(0).grants == "");
}

TEST_CASE("null literals are normalized and counted") {
    IngestStats stats;
    const auto recs = parse_csv(kHeader + "b1,HST,a,2000,NaN,ab,null,ack,None,1,0,0,0\n", &stats);
    CHECK(recs[0].title.empty());
    CHECK(recs[0].body.empty());
    CHECK(recs[0].grants.empty());
    CHECK(stats.null_literal_cells == 3);
}

TEST_CASE("extra columns are ignored, column order is free") {
    const auto recs = parse_csv(
        "extra,not_telescope,mention,instrumentation,science,grants,acknowledgments,body,abstract,"
        "title,year,author,telescope,bibcode\n"
        "zz,0,1,0,0,g,k,b,a,t,1999,au,CHANDRA,id1\n");
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].bibcode == "id1");
    CHECK(*recs[0].telescope == "CHANDRA");
    CHECK(*recs[0].booleans == BooleanLabels{false, false, true, false});
}

TEST_CASE("schema and validation errors") {
    SUBCASE("missing column is named") {
        try {
            parse_csv("bibcode,telescope,author,year,title,abstract,body,acknowledgments,grants,"
                      "science,instrumentation,mention\n");
            FAIL("expected SchemaError");
        } catch (const SchemaError& e) {
            CHECK(std::string(e.what()).find("not_telescope") != std::string::npos);
        }
    }
    SUBCASE("duplicates are listed") {
        try {
            parse_csv(kHeader + "x,HST,,,,,,,,1,0,0,0\ny,HST,,,,,,,,1,0,0,0\nx,HST,,,,,,,,1,0,0,0\n");
            FAIL("expected ValidationError");
        } catch (const ValidationError& e) {
            CHECK(std::string(e.what()).find("x") != std::string::npos);
        }
    }
    SUBCASE("bad boolean names the row") {
        try {
            parse_csv(kHeader + "x,HST,,,,,,,,1,0,0,0\ny,HST,,,,,,,,yes,0,0,0\n");
            FAIL("expected ValidationError");
        } catch (const ValidationError& e) {
            CHECK(std::string(e.what()).find("row 2") != std::string::npos);
        }
    }
    SUBCASE("partial boolean set") {
        CHECK_THROWS_AS(parse_csv(kHeader + "x,HST,,,,,,,,1,,0,0\n"), ValidationError);
    }
    SUBCASE("empty bibcode") {
        CHECK_THROWS_AS(parse_csv(kHeader + ",HST,,,,,,,,1,0,0,0\n"), ValidationError);
    }
}

TEST_CASE("unlabeled rows keep labels absent") {
    const auto recs = parse_csv(kHeader + "x,,a,2000,t,,,,,,,,\n");
    CHECK_FALSE(recs[0].telescope.has_value());
    CHECK_FALSE(recs[0].booleans.has_value());
    CHECK_FALSE(recs[0].is_labeled());
}

TEST_CASE("concatenate_fields") {
    PaperRecord r;
    r.title = "A";
    r.abstract = "B";
    CHECK(concatenate_fields(r) == "A\nB");
    CHECK(concatenate_fields(PaperRecord{}).empty());
    const auto full = make_record("z");
    const auto text = concatenate_fields(full);
    CHECK(std::count(text.begin(), text.end(), '\n') == 4);
    CHECK(text == "T\nA\nB\nK\nG");
    PaperRecord gap;
    gap.title = "X";
    gap.grants = "Y";
    CHECK(concatenate_fields(gap) == "X\nY");
}

TEST_CASE("ingestion is lossless and round-trips") {
    Rng rng(7);
    const std::string alphabet = "ab ,\"\n\xc3\xa9xyz";
    std::vector<PaperRecord> recs;
    for (int i = 0; i < 200; ++i) {
        auto r = make_record("id" + std::to_string(i));
        auto rnd = [&] {
            std::string s;
            const auto n = uniform_below(rng, 12);
            for (std::uint64_t j = 0; j < n; ++j) s += alphabet[uniform_below(rng, alphabet.size())];
            // Leading/trailing whitespace-only and null literals are not preserved by design.
            return s == "nan" || s == "null" || s == "none" ? std::string("q") : s;
        };
        r.title = rnd();
        r.abstract = rnd();
        r.body = rnd();
        r.acknowledgments = rnd();
        r.grants = rnd();
        if (i % 3 == 0) {
            r.telescope.reset();
            r.booleans.reset();
        }
        recs.push_back(r);
    }
    const auto back = parse_csv(to_csv(recs));
    REQUIRE(back.size() == recs.size());
    for (std::size_t i = 0; i < recs.size(); ++i) {
        CHECK(back[i] == recs[i]);
        const auto text = concatenate_fields(back[i]);
        for (const auto* f : {&recs[i].title, &recs[i].abstract, &recs[i].body,
                              &recs[i].acknowledgments, &recs[i].grants}) {
            if (!f->empty()) CHECK(text.find(*f) != std::string::npos);
        }
    }
}

TEST_CASE("load_csv and write_csv via files") {
    testing::TempDir dir;
    std::vector<PaperRecord> recs{make_record("a"), make_record("b")};
    write_csv(dir / "c.csv", recs);
    CHECK(load_csv(dir / "c.csv") == recs);
    CHECK_THROWS_AS(load_csv(dir / "missing.csv"), IoError);
}

TEST_CASE("vocabulary") {
    auto with = [](std::vector<std::string> names) {
        std::vector<PaperRecord> recs;
        for (std::size_t i = 0; i < names.size(); ++i) {
            auto r = make_record("b" + std::to_string(i));
            r.telescope = names[i];
            recs.push_back(r);
        }
        return build_vocabulary(recs);
    };
    const auto v = with({"HST", "CHANDRA", "JWST"});
    CHECK(v.classes() == std::vector<std::string>{"CHANDRA", "HST", "JWST"});
    CHECK(v.index_of("CHANDRA") == 0);
    CHECK(v.index_of("HST") == 1);
    CHECK(v.index_of("JWST") == 2);
    CHECK(with({"HST"}).size() == 1);
    CHECK(with({"HST", "HST", "JWST"}).size() == 2);
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(v.index_of(v.name_of(i)) == i);
    CHECK_THROWS_AS(v.index_of("SPITZER"), ValidationError);
    CHECK_THROWS_AS(build_vocabulary({}), ValidationError);
    auto unlabeled = make_record("u");
    unlabeled.telescope.reset();
    CHECK_THROWS_AS(build_vocabulary({unlabeled}), ValidationError);

    CHECK(LabelVocabulary::from_json(v.to_json()) == v);
    CHECK(v.to_json().find("\"classes\"") != std::string::npos);
    CHECK_THROWS(LabelVocabulary::from_json("{\"classes\": [\"B\", \"A\"]}"));
    testing::TempDir dir;
    v.save(dir / "vocabulary.json");
    CHECK(LabelVocabulary::load(dir / "vocabulary.json") == v);
}

TEST_CASE("vocabulary ids are a bijection onto 0..K-1") {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::string> names;
        const auto n = 1 + uniform_below(rng, 30);
        for (std::uint64_t i = 0; i < n; ++i) names.push_back("C" + std::to_string(uniform_below(rng, 12)));
        const LabelVocabulary v(names);
        std::set<std::size_t> ids;
        for (const auto& name : names) ids.insert(v.index_of(name));
        CHECK(ids.size() == v.size());
        CHECK(*ids.rbegin() == v.size() - 1);
        CHECK(std::is_sorted(v.classes().begin(), v.classes().end()));
    }
}
