#pragma once

#include <array>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "m6/scoring.hpp"
#include "m6/submission.hpp"

namespace m6 {

enum class CombineMode { Forecast, Weights, Both };

// Element-wise arithmetic mean of probability rows and/or weight columns.
// All submissions must cover the same asset set; the combined gross exposure
// may fall below the competition minimum (analysis context, reported as is).
Submission combine(const std::vector<Submission>& submissions, CombineMode mode);

struct CombinationPoint {
    double fraction = 0.0;  // 0.05 .. 1.00
    std::size_t n_teams = 0;
    double rps = 0.0;
    double ir = 0.0;
    bool ir_defined = true;
};

// Combines the best `max(1, floor(fraction * N))` teams for fractions 5%..100%
// in 5% steps. `ranked_best_first` holds full-year team histories already
// ordered by the ex-post ranking metric; `score` evaluates one combined
// submission set (RPS over the evaluation periods, IR over the full year).
struct TeamYear {
    std::string team_id;
    std::vector<Submission> submissions;  // one per evaluated period
};

using CombinedScorer =
    std::function<std::pair<double, IrStats>(const std::vector<Submission>&)>;

std::vector<CombinationPoint> top_fraction_combination_study(
    const std::vector<TeamYear>& ranked_best_first, CombineMode mode,
    const CombinedScorer& score);

enum class ConnectionClass {
    WELL_CONNECTED,
    CONNECTED,
    WEAKLY_CONNECTED,
    DISCONNECTED,
    OPPOSITE,
    NA,
};

const char* connection_class_name(ConnectionClass c);

struct ConnectionResult {
    std::string team_id;
    double r_con = 0.0;
    ConnectionClass cls = ConnectionClass::NA;
    std::array<double, 5> mean_vector{};  // weight x probs, averaged
};

// Forecast/decision connection: the weight-scaled probability
// 5-vector averaged over assets and submissions, Pearson-correlated with
// (1,2,3,4,5). Zero variance -> NA.
ConnectionResult connection_coefficient(const std::vector<Submission>& history);
ConnectionClass classify_connection(double r_con);

struct CalibrationBin {
    double bin_low = 0.0;
    double bin_high = 0.0;
    double mean_assessed = 0.0;
    double relative_frequency = 0.0;  // fractional outcome mass under ties
    std::size_t count = 0;
};

// Reliability curve over (asset, quintile, period) cells in 0.05-wide bins.
// `forecasts` and `outcomes` are parallel per period; outcome q mass counts
// fractionally under rank ties. Bins are [low, high) with the last closed.
std::vector<CalibrationBin> calibration_curve(
    const std::vector<Submission>& forecasts,
    const std::vector<std::vector<QuintileOutcome>>& outcomes,
    double bin_width = 0.05);

enum class ExposureClass { LOW, MODERATE, HIGH, OUT_OF_RANGE };
enum class DiversificationClass { LOW, MODERATE, HIGH };
enum class WeightRangeClass { SMALL, LARGE };
enum class Directionality { DIRECTIONAL, NON_DIRECTIONAL };

struct StrategyProfile {
    ExposureClass exposure = ExposureClass::OUT_OF_RANGE;
    DiversificationClass diversification = DiversificationClass::LOW;
    WeightRangeClass weight_range = WeightRangeClass::SMALL;
    Directionality directionality = Directionality::DIRECTIONAL;

    bool operator==(const StrategyProfile&) const = default;
};

StrategyProfile strategy_profile(const Submission& sub);

// Number of consecutive pairs whose four class labels are not identical.
int strategy_changes(const std::vector<Submission>& effective_history);

enum class AccuracyClass { HIGH, MODERATE, LOW };

// HIGH < 0.10, MODERATE in [0.10, 0.22], LOW > 0.22.
AccuracyClass accuracy_class(double per_asset_rps);
const char* accuracy_class_name(AccuracyClass c);

struct WeightAccuracyResult {
    double r = 0.0;
    bool defined = true;  // false when |weights| or RPS have zero variance
};

// Pearson correlation between |weight| and per-asset RPS, pooled across
// assets and periods (parallel vectors).
WeightAccuracyResult weight_accuracy_correlation(
    const std::vector<double>& abs_weights, const std::vector<double>& asset_rps);

struct ConcentrationMetrics {
    std::size_t n_invested = 0;
    double mean_abs_weight = 0.0;  // over invested assets only
};

ConcentrationMetrics concentration_metrics(const Submission& sub);

}  // namespace m6
