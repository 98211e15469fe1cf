#include "m6/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "m6/errors.hpp"

namespace m6 {

std::vector<QuintileOutcome> quintile_outcomes(
    const std::map<std::string, double>& period_returns, bool allow_any_count) {
    const std::size_t n = period_returns.size();
    if (!allow_any_count && n != kUniverseSize)
        throw DataError("quintile_outcomes: expected " + std::to_string(kUniverseSize) +
                        " assets, got " + std::to_string(n));
    if (n < 5 || n % 5 != 0)
        throw DataError("quintile_outcomes: asset count must be a positive multiple of 5");
    const std::size_t per_quintile = n / 5;

    // Best return first: place 1..per_quintile is rank 5, and so on down.
    std::vector<std::pair<std::string, double>> sorted(period_returns.begin(),
                                                       period_returns.end());
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    auto rank_of_place = [&](std::size_t place /*1-based*/) {
        return 5 - static_cast<int>((place - 1) / per_quintile);
    };

    std::vector<QuintileOutcome> out(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && sorted[j].second == sorted[i].second) ++j;
        // Tied group occupies places i+1 .. j; split its mass across the
        // quintiles those places fall into.
        std::array<double, 5> q{};
        double rank_sum = 0.0;
        for (std::size_t p = i + 1; p <= j; ++p) {
            int r = rank_of_place(p);
            q[r - 1] += 1.0;
            rank_sum += r;
        }
        const double group = static_cast<double>(j - i);
        for (double& v : q) v /= group;
        for (std::size_t p = i; p < j; ++p) {
            out[p].asset_id = sorted[p].first;
            out[p].rank_value = rank_sum / group;
            out[p].q = q;
        }
        i = j;
    }
    std::sort(out.begin(), out.end(),
              [](const auto& a, const auto& b) { return a.asset_id < b.asset_id; });
    return out;
}

double rps_asset(const std::array<double, 5>& forecast, const QuintileOutcome& outcome) {
    double cum_f = 0.0, cum_q = 0.0, score = 0.0;
    for (int j = 0; j < 5; ++j) {
        cum_f += forecast[j];
        cum_q += outcome.q[j];
        score += (cum_q - cum_f) * (cum_q - cum_f);
    }
    return score / 5.0;
}

double rps_period(const Submission& sub, const std::vector<QuintileOutcome>& outcomes) {
    if (outcomes.empty()) throw DataError("rps_period: no outcomes");
    double sum = 0.0;
    for (const auto& oc : outcomes) {
        const SubmissionRow* row = sub.find(oc.asset_id);
        if (!row) throw DataError("rps_period: submission missing asset " + oc.asset_id);
        sum += rps_asset(row->probs, oc);
    }
    return sum / static_cast<double>(outcomes.size());
}

double rps_overall(std::span<const double> period_rps) {
    if (period_rps.empty()) throw DataError("rps_overall: no periods");
    return std::accumulate(period_rps.begin(), period_rps.end(), 0.0) /
           static_cast<double>(period_rps.size());
}

DailyReturn portfolio_daily_return(const std::map<std::string, double>& weights,
                                   const std::map<std::string, double>& adj_close_prev,
                                   const std::map<std::string, double>& adj_close_now) {
    double ret = 0.0;
    for (const auto& [asset, w] : weights) {
        if (w == 0.0) continue;
        auto prev = adj_close_prev.find(asset);
        auto now = adj_close_now.find(asset);
        if (prev == adj_close_prev.end() || now == adj_close_now.end()) continue;
        if (prev->second <= 0.0)
            throw DataError("portfolio_daily_return: nonpositive price for " + asset);
        ret += w * (now->second / prev->second - 1.0);
    }
    if (ret <= -1.0)
        throw DataError("portfolio_daily_return: RET <= -1, log return undefined");
    return {ret, std::log1p(ret)};
}

IrStats information_ratio(std::span<const double> daily_log_returns) {
    const std::size_t t = daily_log_returns.size();
    if (t < 2) throw DataError("information_ratio: need >= 2 daily observations");
    IrStats s;
    s.n_days = t;
    s.ret = std::accumulate(daily_log_returns.begin(), daily_log_returns.end(), 0.0);
    const double mean = s.ret / static_cast<double>(t);
    double varp = 0.0;
    for (double r : daily_log_returns) varp += (r - mean) * (r - mean);
    varp /= static_cast<double>(t - 1);
    s.sdp = std::sqrt(varp);
    if (s.sdp > 0.0) {
        s.defined = true;
        s.ir_raw = s.ret / s.sdp;
        s.ir_annualized = mean / s.sdp * std::sqrt(kTradingDaysPerYear);
    }
    return s;
}

Submission benchmark_forecast(const std::vector<std::string>& universe) {
    Submission sub;
    sub.team_id = "benchmark_forecast";
    for (const auto& t : universe) {
        SubmissionRow row;
        row.asset_id = t;
        row.probs = {0.2, 0.2, 0.2, 0.2, 0.2};
        // gross exposure needs to clear the 0.25 floor for validity
        row.weight = 1.0 / static_cast<double>(universe.size());
        sub.rows.push_back(std::move(row));
    }
    return sub;
}

Submission benchmark_portfolio(const std::vector<std::string>& universe) {
    Submission sub = benchmark_forecast(universe);
    sub.team_id = "benchmark_portfolio";
    return sub;
}

namespace {

// Average ranks for values already sorted best-first by `order` indices.
void assign_average_ranks(const std::vector<std::size_t>& order,
                          const std::vector<double>& key,
                          const std::vector<char>& defined,
                          std::vector<double>& rank_out) {
    const std::size_t n = order.size();
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && key[order[j]] == key[order[i]] &&
               defined[order[j]] == defined[order[i]])
            ++j;
        const double avg = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t p = i; p < j; ++p) rank_out[order[p]] = avg;
        i = j;
    }
}

}  // namespace

std::vector<RankedRow> overall_rank(const std::vector<MetricRow>& teams) {
    const std::size_t n = teams.size();
    std::vector<RankedRow> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i].team_id = teams[i].team_id;
        out[i].rps = teams[i].rps;
        out[i].ir = teams[i].ir;
        out[i].ir_defined = teams[i].ir_defined;
    }

    std::vector<std::size_t> order(n);
    std::vector<double> key(n);
    std::vector<char> defined(n, 1);
    std::vector<double> ranks(n);

    // RPS: ascending, lower is better.
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = 0; i < n; ++i) key[i] = teams[i].rps;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return key[a] < key[b]; });
    assign_average_ranks(order, key, defined, ranks);
    for (std::size_t i = 0; i < n; ++i) out[i].rank_rps = ranks[i];

    // IR: descending, undefined below every defined value.
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
        key[i] = teams[i].ir;
        defined[i] = teams[i].ir_defined ? 1 : 0;
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (defined[a] != defined[b]) return defined[a] > defined[b];
        if (!defined[a]) return false;
        return key[a] > key[b];
    });
    assign_average_ranks(order, key, defined, ranks);
    for (std::size_t i = 0; i < n; ++i) {
        out[i].rank_ir = ranks[i];
        out[i].overall_rank = (out[i].rank_rps + out[i].rank_ir) / 2.0;
    }

    std::sort(out.begin(), out.end(), [](const RankedRow& a, const RankedRow& b) {
        if (a.overall_rank != b.overall_rank) return a.overall_rank < b.overall_rank;
        return a.team_id < b.team_id;
    });
    return out;
}

}  // namespace m6
