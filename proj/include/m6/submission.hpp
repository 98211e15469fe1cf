#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace m6 {

inline constexpr double kProbSumTolerance = 1e-6;
inline constexpr double kGrossMin = 0.25;
inline constexpr double kGrossMax = 1.0;

struct SubmissionRow {
    std::string asset_id;
    std::array<double, 5> probs{};  // quintile 1..5
    double weight = 0.0;            // + long, - short
};

struct Submission {
    std::string team_id;
    int period_index = 0;  // 1..12, 0 = trial
    long submitted_at = 0; // opaque monotone timestamp
    std::vector<SubmissionRow> rows;

    double gross_exposure() const;
    const SubmissionRow* find(const std::string& asset_id) const;
};

enum class Rule {
    PROB_SUM,
    PROB_NEGATIVE,
    WEIGHT_GROSS_HIGH,
    WEIGHT_GROSS_LOW,
    MISSING_ASSET,
    DUPLICATE_ASSET,
};

const char* rule_name(Rule r);

struct Violation {
    Rule rule;
    std::string row_id;  // asset id, or "" for portfolio-level rules
    std::string detail;
};

struct ValidationReport {
    std::vector<Violation> violations;
    bool valid() const { return violations.empty(); }
};

// Checks probability rows, gross-exposure bounds, and universe coverage.
// Violations are data, not errors; this never throws on bad submissions.
ValidationReport validate(const Submission& sub,
                          const std::vector<std::string>& universe);

// Latest valid submission with period_index <= period. Within one period the
// last submission (by submitted_at) wins. `history` must be sorted by period
// then submitted_at.
std::optional<Submission> effective_submission(const std::vector<Submission>& history,
                                               const std::vector<std::string>& universe,
                                               int period);

// CSV round trip; header `ID,Rank1,Rank2,Rank3,Rank4,Rank5,Decision`.
Submission read_submission_csv(const std::string& path);
void write_submission_csv(const Submission& sub, const std::string& path);

}  // namespace m6
