#pragma once

#include <array>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "m6/submission.hpp"

namespace m6 {

inline constexpr int kUniverseSize = 100;
inline constexpr double kTradingDaysPerYear = 252.0;

// Realized quintile membership of one asset for one period. Under boundary
// ties q spreads fractional mass across the tied quintiles so that
// sum_k k*q_k == rank_value.
struct QuintileOutcome {
    std::string asset_id;
    double rank_value = 0.0;    // in [1,5], average rank under ties
    std::array<double, 5> q{};  // nonnegative, sums to 1
};

// Sorts by total return (rank 5 = best 20 assets) and applies the
// average-rank tie rule on quintile boundaries. Throws DataError if the
// asset count is not kUniverseSize unless allow_any_count is set.
std::vector<QuintileOutcome> quintile_outcomes(
    const std::map<std::string, double>& period_returns,
    bool allow_any_count = false);

// Ranked probability score for one asset: (1/5) sum_j (CumQ_j - CumF_j)^2.
double rps_asset(const std::array<double, 5>& forecast, const QuintileOutcome& outcome);

// Unweighted mean of rps_asset over all outcome assets. Throws DataError if
// the submission is missing an outcome asset.
double rps_period(const Submission& sub, const std::vector<QuintileOutcome>& outcomes);

// Mean of per-period RPS values.
double rps_overall(std::span<const double> period_rps);

struct DailyReturn {
    double simple = 0.0;  // RET_t
    double log = 0.0;     // ret_t = ln(1 + RET_t)
};

// RET_t = sum_i w_i (S_t/S_{t-1} - 1) on adjusted closes. Throws DataError
// when RET_t <= -1 (log return undefined). Assets missing from the weight
// map carry zero weight; assets missing a price are treated as zero return
// (frozen listings are forward filled upstream).
DailyReturn portfolio_daily_return(const std::map<std::string, double>& weights,
                                   const std::map<std::string, double>& adj_close_prev,
                                   const std::map<std::string, double>& adj_close_now);

struct IrStats {
    double ret = 0.0;            // sum of daily log returns
    double sdp = 0.0;            // sample sd of daily log returns (divisor T-1)
    double ir_raw = 0.0;         // ret / sdp
    double ir_annualized = 0.0;  // (mean daily ret / sdp) * sqrt(252)
    bool defined = false;        // false iff sdp == 0
    std::size_t n_days = 0;
};

// Needs at least 2 observations.
IrStats information_ratio(std::span<const double> daily_log_returns);

// Uniform 0.2 probabilities; passes validation, scores RPS 0.16.
Submission benchmark_forecast(const std::vector<std::string>& universe);
// Equal long 1/N weights (gross exposure 1.0).
Submission benchmark_portfolio(const std::vector<std::string>& universe);

struct MetricRow {
    std::string team_id;
    double rps = 0.0;
    double ir = 0.0;
    bool ir_defined = true;
};

struct RankedRow {
    std::string team_id;
    double rps = 0.0;
    double ir = 0.0;
    bool ir_defined = true;
    double rank_rps = 0.0;      // ascending, lower RPS is better
    double rank_ir = 0.0;       // descending, higher IR is better
    double overall_rank = 0.0;  // mean of the two
};

// Average-rank tie handling on both metrics; undefined IR ranks below every
// defined IR. Output sorted by overall rank then team id.
std::vector<RankedRow> overall_rank(const std::vector<MetricRow>& teams);

}  // namespace m6
