#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "m6/errors.hpp"
#include "m6/submission.hpp"

using namespace m6;

namespace {

std::vector<std::string> small_universe() { return {"A", "B", "C", "D"}; }

Submission valid_sub() {
    Submission s;
    s.team_id = "t1";
    s.period_index = 1;
    for (const auto& a : small_universe())
        s.rows.push_back({a, {0.2, 0.2, 0.2, 0.2, 0.2}, 0.1});
    return s;
}

bool has_rule(const ValidationReport& rep, Rule r) {
    for (const auto& v : rep.violations)
        if (v.rule == r) return true;
    return false;
}

}  // namespace

TEST_CASE("a well-formed submission validates clean") {
    const auto rep = validate(valid_sub(), small_universe());
    CHECK(rep.valid());
    CHECK(valid_sub().gross_exposure() == doctest::Approx(0.4));
}

TEST_CASE("probability rows must sum to one within tolerance") {
    Submission s = valid_sub();
    s.rows[0].probs = {0.2, 0.2, 0.2, 0.2, 0.1};
    CHECK(has_rule(validate(s, small_universe()), Rule::PROB_SUM));

    // just inside the tolerance is accepted
    s = valid_sub();
    s.rows[0].probs = {0.2 + 5e-7, 0.2, 0.2, 0.2, 0.2};
    CHECK(validate(s, small_universe()).valid());
}

TEST_CASE("negative or >1 probabilities are rejected") {
    Submission s = valid_sub();
    s.rows[1].probs = {-0.1, 0.3, 0.3, 0.3, 0.2};
    const auto rep = validate(s, small_universe());
    CHECK(has_rule(rep, Rule::PROB_NEGATIVE));
}

TEST_CASE("gross exposure bounds") {
    Submission s = valid_sub();
    for (auto& r : s.rows) r.weight = 0.3;  // gross 1.2
    CHECK(has_rule(validate(s, small_universe()), Rule::WEIGHT_GROSS_HIGH));

    for (auto& r : s.rows) r.weight = 0.05;  // gross 0.2
    CHECK(has_rule(validate(s, small_universe()), Rule::WEIGHT_GROSS_LOW));

    // short positions count in absolute value
    for (auto& r : s.rows) r.weight = -0.25;  // gross 1.0 exactly
    CHECK(validate(s, small_universe()).valid());
}

TEST_CASE("missing and duplicate assets are reported") {
    Submission s = valid_sub();
    s.rows.pop_back();
    s.rows.push_back(s.rows[0]);  // duplicate A, missing D
    const auto rep = validate(s, small_universe());
    CHECK(has_rule(rep, Rule::MISSING_ASSET));
    CHECK(has_rule(rep, Rule::DUPLICATE_ASSET));
}

TEST_CASE("effective_submission carries the last valid entry forward") {
    Submission p1 = valid_sub();
    p1.period_index = 1;
    p1.submitted_at = 1;
    Submission p3_bad = valid_sub();
    p3_bad.period_index = 3;
    p3_bad.submitted_at = 2;
    for (auto& r : p3_bad.rows) r.weight = 0.0;  // gross below minimum
    Submission p3_good = valid_sub();
    p3_good.period_index = 3;
    p3_good.submitted_at = 3;
    p3_good.rows[0].weight = -0.1;

    const std::vector<Submission> history = {p1, p3_bad, p3_good};
    // period 2 falls back to the period-1 entry
    auto eff = effective_submission(history, small_universe(), 2);
    REQUIRE(eff);
    CHECK(eff->period_index == 1);
    // within period 3 the later (valid) entry wins, the invalid one is skipped
    eff = effective_submission(history, small_universe(), 3);
    REQUIRE(eff);
    CHECK(eff->submitted_at == 3);
    CHECK(eff->rows[0].weight == doctest::Approx(-0.1));
    // nothing before period 1
    CHECK_FALSE(effective_submission(history, small_universe(), 0));
}

TEST_CASE("an invalid later entry does not erase the earlier valid one") {
    Submission p1 = valid_sub();
    p1.period_index = 1;
    Submission p2 = valid_sub();
    p2.period_index = 2;
    for (auto& r : p2.rows) r.weight = 5.0;  // invalid
    const auto eff = effective_submission({p1, p2}, small_universe(), 2);
    REQUIRE(eff);
    CHECK(eff->period_index == 1);
}

TEST_CASE("submission CSV round trip preserves values exactly") {
    Submission s = valid_sub();
    s.rows[0].probs = {0.123456789012345, 0.2, 0.3, 0.25, 0.026543210987655};
    s.rows[0].weight = -0.07625;
    const auto path =
        (std::filesystem::temp_directory_path() / "sub_roundtrip.csv").string();
    write_submission_csv(s, path);
    const Submission back = read_submission_csv(path);
    REQUIRE(back.rows.size() == s.rows.size());
    for (std::size_t i = 0; i < s.rows.size(); ++i) {
        CHECK(back.rows[i].asset_id == s.rows[i].asset_id);
        CHECK(back.rows[i].weight == s.rows[i].weight);  // bitwise via to_chars
        for (int k = 0; k < 5; ++k) CHECK(back.rows[i].probs[k] == s.rows[i].probs[k]);
    }
}

TEST_CASE("submission CSV rejects malformed files") {
    const auto dir = std::filesystem::temp_directory_path();
    auto write = [&](const char* name, const std::string& content) {
        const auto p = (dir / name).string();
        std::ofstream out(p);
        out << content;
        return p;
    };
    CHECK_THROWS_AS(read_submission_csv(write("sub_hdr.csv", "bad,header\n")),
                    ParseError);
    CHECK_THROWS_AS(
        read_submission_csv(write("sub_short.csv",
                                  "ID,Rank1,Rank2,Rank3,Rank4,Rank5,Decision\n"
                                  "A,0.2,0.2,0.2\n")),
        ParseError);
    CHECK_THROWS_AS(
        read_submission_csv(write("sub_num.csv",
                                  "ID,Rank1,Rank2,Rank3,Rank4,Rank5,Decision\n"
                                  "A,x,0.2,0.2,0.2,0.2,0.1\n")),
        ParseError);
    CHECK_THROWS_AS(read_submission_csv("/nonexistent/sub.csv"), DataError);
}
