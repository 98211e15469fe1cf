#include "m6/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "m6/errors.hpp"

namespace m6 {

Submission combine(const std::vector<Submission>& submissions, CombineMode mode) {
    if (submissions.empty()) throw DataError("combine: no submissions");
    const Submission& first = submissions.front();
    Submission out;
    out.team_id = "combined";
    out.period_index = first.period_index;
    out.rows = first.rows;
    if (mode == CombineMode::Weights)
        for (auto& r : out.rows) r.probs = {0.2, 0.2, 0.2, 0.2, 0.2};

    const double inv_n = 1.0 / static_cast<double>(submissions.size());
    for (auto& row : out.rows) {
        double probs[5] = {};
        double weight = 0.0;
        for (const auto& sub : submissions) {
            const SubmissionRow* r = sub.find(row.asset_id);
            if (!r || sub.rows.size() != first.rows.size())
                throw DataError("combine: asset sets differ (" + row.asset_id + ")");
            for (int k = 0; k < 5; ++k) probs[k] += r->probs[k];
            weight += r->weight;
        }
        if (mode != CombineMode::Weights)
            for (int k = 0; k < 5; ++k) row.probs[k] = probs[k] * inv_n;
        if (mode != CombineMode::Forecast) row.weight = weight * inv_n;
        if (mode == CombineMode::Forecast) row.weight = first.find(row.asset_id)->weight;
    }
    return out;
}

std::vector<CombinationPoint> top_fraction_combination_study(
    const std::vector<TeamYear>& ranked_best_first, CombineMode mode,
    const CombinedScorer& score) {
    if (ranked_best_first.empty())
        throw DataError("top_fraction_combination_study: no teams");
    const std::size_t n_periods = ranked_best_first.front().submissions.size();
    for (const auto& t : ranked_best_first)
        if (t.submissions.size() != n_periods)
            throw DataError("top_fraction_combination_study: ragged team histories");

    std::vector<CombinationPoint> curve;
    for (int pct = 5; pct <= 100; pct += 5) {
        const double fraction = pct / 100.0;
        const std::size_t n_teams = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::floor(
                   fraction * static_cast<double>(ranked_best_first.size()))));

        std::vector<Submission> combined(n_periods);
        for (std::size_t p = 0; p < n_periods; ++p) {
            std::vector<Submission> group;
            group.reserve(n_teams);
            for (std::size_t t = 0; t < n_teams; ++t)
                group.push_back(ranked_best_first[t].submissions[p]);
            combined[p] = combine(group, mode);
        }
        auto [rps, ir] = score(combined);
        CombinationPoint pt;
        pt.fraction = fraction;
        pt.n_teams = n_teams;
        pt.rps = rps;
        pt.ir = ir.ir_annualized;
        pt.ir_defined = ir.defined;
        curve.push_back(pt);
    }
    return curve;
}

ConnectionClass classify_connection(double r) {
    if (r >= 0.75) return ConnectionClass::WELL_CONNECTED;
    if (r >= 0.50) return ConnectionClass::CONNECTED;
    if (r >= 0.25) return ConnectionClass::WEAKLY_CONNECTED;
    if (r > -0.25) return ConnectionClass::DISCONNECTED;
    return ConnectionClass::OPPOSITE;
}

const char* connection_class_name(ConnectionClass c) {
    switch (c) {
        case ConnectionClass::WELL_CONNECTED: return "WELL_CONNECTED";
        case ConnectionClass::CONNECTED: return "CONNECTED";
        case ConnectionClass::WEAKLY_CONNECTED: return "WEAKLY_CONNECTED";
        case ConnectionClass::DISCONNECTED: return "DISCONNECTED";
        case ConnectionClass::OPPOSITE: return "OPPOSITE";
        case ConnectionClass::NA: return "NA";
    }
    return "NA";
}

ConnectionResult connection_coefficient(const std::vector<Submission>& history) {
    if (history.empty()) throw DataError("connection_coefficient: no submissions");
    ConnectionResult out;
    out.team_id = history.front().team_id;
    double cells = 0.0;
    for (const auto& sub : history)
        for (const auto& row : sub.rows) {
            for (int k = 0; k < 5; ++k) out.mean_vector[k] += row.weight * row.probs[k];
            cells += 1.0;
        }
    if (cells == 0.0) throw DataError("connection_coefficient: empty submissions");
    for (auto& v : out.mean_vector) v /= cells;

    // Pearson correlation with (1,2,3,4,5): ranks have mean 3, population
    // variance 2; only the vector's own spread can degenerate.
    double mean = 0.0;
    for (double v : out.mean_vector) mean += v / 5.0;
    double cov = 0.0, var = 0.0;
    for (int k = 0; k < 5; ++k) {
        const double dv = out.mean_vector[k] - mean;
        cov += dv * (k + 1 - 3.0);
        var += dv * dv;
    }
    // rounding noise in the accumulation can leave a constant vector with a
    // variance of ~1e-34; treat that as zero spread
    if (var <= 1e-20 * (1.0 + mean * mean)) {
        out.r_con = 0.0;
        out.cls = ConnectionClass::NA;
        return out;
    }
    out.r_con = cov / std::sqrt(var * 10.0);  // sum (k-3)^2 = 10
    out.cls = classify_connection(out.r_con);
    return out;
}

std::vector<CalibrationBin> calibration_curve(
    const std::vector<Submission>& forecasts,
    const std::vector<std::vector<QuintileOutcome>>& outcomes, double bin_width) {
    if (forecasts.size() != outcomes.size())
        throw DataError("calibration_curve: forecast/outcome period mismatch");
    if (bin_width <= 0.0 || bin_width > 1.0)
        throw ConfigError("calibration_curve: bin width must be in (0,1]");

    const auto n_bins = static_cast<std::size_t>(std::ceil(1.0 / bin_width - 1e-12));
    std::vector<CalibrationBin> bins(n_bins);
    std::vector<double> assessed_sum(n_bins, 0.0), hit_mass(n_bins, 0.0);
    for (std::size_t b = 0; b < n_bins; ++b) {
        bins[b].bin_low = static_cast<double>(b) * bin_width;
        bins[b].bin_high = std::min(1.0, static_cast<double>(b + 1) * bin_width);
    }

    for (std::size_t p = 0; p < forecasts.size(); ++p) {
        for (const auto& oc : outcomes[p]) {
            const SubmissionRow* row = forecasts[p].find(oc.asset_id);
            if (!row)
                throw DataError("calibration_curve: forecast missing " + oc.asset_id);
            for (int k = 0; k < 5; ++k) {
                const double f = row->probs[k];
                auto b = std::min(n_bins - 1,
                                  static_cast<std::size_t>(std::floor(f / bin_width)));
                if (f >= bins[b].bin_high && b + 1 < n_bins) ++b;  // fp edge guard
                ++bins[b].count;
                assessed_sum[b] += f;
                hit_mass[b] += oc.q[static_cast<std::size_t>(k)];
            }
        }
    }
    for (std::size_t b = 0; b < n_bins; ++b) {
        if (bins[b].count == 0) continue;
        bins[b].mean_assessed = assessed_sum[b] / static_cast<double>(bins[b].count);
        bins[b].relative_frequency = hit_mass[b] / static_cast<double>(bins[b].count);
    }
    return bins;
}

StrategyProfile strategy_profile(const Submission& sub) {
    StrategyProfile p;
    const double gross = sub.gross_exposure();
    if (gross < 0.25)
        p.exposure = ExposureClass::OUT_OF_RANGE;
    else if (gross < 0.50)
        p.exposure = ExposureClass::LOW;
    else if (gross < 0.80)
        p.exposure = ExposureClass::MODERATE;
    else
        p.exposure = ExposureClass::HIGH;

    std::size_t invested = 0;
    double max_abs = 0.0;
    bool has_long = false, has_short = false;
    for (const auto& r : sub.rows) {
        if (r.weight == 0.0) continue;
        ++invested;
        max_abs = std::max(max_abs, std::abs(r.weight));
        (r.weight > 0.0 ? has_long : has_short) = true;
    }
    if (invested < 10)
        p.diversification = DiversificationClass::LOW;
    else if (invested < 80)
        p.diversification = DiversificationClass::MODERATE;
    else
        p.diversification = DiversificationClass::HIGH;
    p.weight_range = max_abs < 0.1 ? WeightRangeClass::SMALL : WeightRangeClass::LARGE;
    p.directionality = (has_long && has_short) ? Directionality::NON_DIRECTIONAL
                                               : Directionality::DIRECTIONAL;
    return p;
}

int strategy_changes(const std::vector<Submission>& effective_history) {
    int changes = 0;
    for (std::size_t i = 1; i < effective_history.size(); ++i)
        if (!(strategy_profile(effective_history[i]) ==
              strategy_profile(effective_history[i - 1])))
            ++changes;
    return changes;
}

AccuracyClass accuracy_class(double per_asset_rps) {
    if (per_asset_rps < 0.10) return AccuracyClass::HIGH;
    if (per_asset_rps <= 0.22) return AccuracyClass::MODERATE;
    return AccuracyClass::LOW;
}

const char* accuracy_class_name(AccuracyClass c) {
    switch (c) {
        case AccuracyClass::HIGH: return "HIGH";
        case AccuracyClass::MODERATE: return "MODERATE";
        case AccuracyClass::LOW: return "LOW";
    }
    return "LOW";
}

WeightAccuracyResult weight_accuracy_correlation(
    const std::vector<double>& abs_weights, const std::vector<double>& asset_rps) {
    if (abs_weights.size() != asset_rps.size() || abs_weights.size() < 2)
        throw DataError("weight_accuracy_correlation: need matching series >= 2");
    const double n = static_cast<double>(abs_weights.size());
    double mw = std::accumulate(abs_weights.begin(), abs_weights.end(), 0.0) / n;
    double mr = std::accumulate(asset_rps.begin(), asset_rps.end(), 0.0) / n;
    double cov = 0.0, vw = 0.0, vr = 0.0;
    for (std::size_t i = 0; i < abs_weights.size(); ++i) {
        const double dw = abs_weights[i] - mw;
        const double dr = asset_rps[i] - mr;
        cov += dw * dr;
        vw += dw * dw;
        vr += dr * dr;
    }
    WeightAccuracyResult out;
    // same epsilon guard as above: constant series accumulate tiny variances
    if (vw <= 1e-20 * n * (1.0 + mw * mw) || vr <= 1e-20 * n * (1.0 + mr * mr)) {
        out.defined = false;
        return out;
    }
    out.r = cov / std::sqrt(vw * vr);
    return out;
}

ConcentrationMetrics concentration_metrics(const Submission& sub) {
    ConcentrationMetrics m;
    double sum_abs = 0.0;
    for (const auto& r : sub.rows)
        if (r.weight != 0.0) {
            ++m.n_invested;
            sum_abs += std::abs(r.weight);
        }
    if (m.n_invested > 0) m.mean_abs_weight = sum_abs / static_cast<double>(m.n_invested);
    return m;
}

}  // namespace m6
