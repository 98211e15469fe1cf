#include "m6/submission.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "m6/errors.hpp"

namespace m6 {

double Submission::gross_exposure() const {
    double g = 0.0;
    for (const auto& r : rows) g += std::fabs(r.weight);
    return g;
}

const SubmissionRow* Submission::find(const std::string& asset_id) const {
    for (const auto& r : rows)
        if (r.asset_id == asset_id) return &r;
    return nullptr;
}

const char* rule_name(Rule r) {
    switch (r) {
        case Rule::PROB_SUM: return "PROB_SUM";
        case Rule::PROB_NEGATIVE: return "PROB_NEGATIVE";
        case Rule::WEIGHT_GROSS_HIGH: return "WEIGHT_GROSS_HIGH";
        case Rule::WEIGHT_GROSS_LOW: return "WEIGHT_GROSS_LOW";
        case Rule::MISSING_ASSET: return "MISSING_ASSET";
        case Rule::DUPLICATE_ASSET: return "DUPLICATE_ASSET";
    }
    return "?";
}

ValidationReport validate(const Submission& sub,
                          const std::vector<std::string>& universe) {
    ValidationReport rep;
    std::set<std::string> seen;
    for (const auto& row : sub.rows) {
        if (!seen.insert(row.asset_id).second)
            rep.violations.push_back({Rule::DUPLICATE_ASSET, row.asset_id, "duplicate row"});
        double sum = 0.0;
        bool neg = false;
        for (double p : row.probs) {
            sum += p;
            if (p < 0.0 || p > 1.0) neg = true;
        }
        if (neg)
            rep.violations.push_back({Rule::PROB_NEGATIVE, row.asset_id,
                                      "probability outside [0,1]"});
        if (std::fabs(sum - 1.0) > kProbSumTolerance)
            rep.violations.push_back({Rule::PROB_SUM, row.asset_id,
                                      "probabilities sum to " + std::to_string(sum)});
    }
    for (const auto& t : universe)
        if (!seen.count(t))
            rep.violations.push_back({Rule::MISSING_ASSET, t, "asset not in submission"});
    double gross = sub.gross_exposure();
    if (gross > kGrossMax)
        rep.violations.push_back({Rule::WEIGHT_GROSS_HIGH, "",
                                  "gross exposure " + std::to_string(gross)});
    if (gross < kGrossMin)
        rep.violations.push_back({Rule::WEIGHT_GROSS_LOW, "",
                                  "gross exposure " + std::to_string(gross)});
    return rep;
}

std::optional<Submission> effective_submission(const std::vector<Submission>& history,
                                               const std::vector<std::string>& universe,
                                               int period) {
    // Carry-forward keeps the last *valid* submission; a later invalid entry
    // does not knock out an earlier valid one.
    std::optional<Submission> best;
    for (const auto& sub : history) {
        if (sub.period_index > period) continue;
        if (!validate(sub, universe).valid()) continue;
        if (!best || sub.period_index > best->period_index ||
            (sub.period_index == best->period_index && sub.submitted_at >= best->submitted_at))
            best = sub;
    }
    return best;
}

namespace {

std::string fmt_double(double v) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return {buf, p};
}

double parse_double(const std::string& s, std::size_t line_no) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw ParseError("bad number '" + s + "'", line_no);
    return v;
}

}  // namespace

Submission read_submission_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open submission file: " + path);
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) throw ParseError("empty submission file", 0);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "ID,Rank1,Rank2,Rank3,Rank4,Rank5,Decision")
        throw ParseError("unexpected header '" + line + "'", line_no);

    Submission sub;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::string field;
        std::stringstream ss(line);
        while (std::getline(ss, field, ',')) f.push_back(field);
        if (f.size() != 7)
            throw ParseError("expected 7 fields, got " + std::to_string(f.size()), line_no);
        SubmissionRow row;
        row.asset_id = f[0];
        for (int k = 0; k < 5; ++k) row.probs[k] = parse_double(f[1 + k], line_no);
        row.weight = parse_double(f[6], line_no);
        sub.rows.push_back(std::move(row));
    }
    return sub;
}

void write_submission_csv(const Submission& sub, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write submission file: " + path);
    out << "ID,Rank1,Rank2,Rank3,Rank4,Rank5,Decision\n";
    for (const auto& row : sub.rows) {
        out << row.asset_id;
        for (double p : row.probs) out << ',' << fmt_double(p);
        out << ',' << fmt_double(row.weight) << '\n';
    }
}

}  // namespace m6
