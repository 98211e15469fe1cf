#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "m6/dates.hpp"

namespace m6 {

// Nine per-stock screening features. Windows: "250d" is the last 250 trading
// days up to the as-of date, "2018" is everything from 2018-01-01 on.
struct StockFeatures {
    double avg_price_250 = 0.0;
    double price_cv_250 = 0.0;
    double price_cv_2018 = 0.0;
    double avg_ret_2018 = 0.0;
    double sd_ret_2018 = 0.0;
    double total_ret_250 = 0.0;
    double total_ret_2018 = 0.0;
    double avg_volume_250 = 0.0;
    double volume_cv_250 = 0.0;

    std::array<double, 9> as_array() const;
};

// Calendar, adjusted closes and volumes are parallel. Throws DataError when
// fewer than 250 trading days precede as_of or no data falls in the 2018
// window, naming the short window.
StockFeatures compute_features(std::span<const Date> calendar,
                               std::span<const double> adj_close,
                               std::span<const double> volume, Date as_of);

struct ClusterResult {
    int k = 1;
    std::vector<int> assignment;  // cluster index per stock, 0-based
    double silhouette = 0.0;      // mean silhouette of the chosen k
};

// Per-sector k-means on z-scored features; k chosen by max mean silhouette
// over k = 2..min(8, n-1), 20 restarts per k, 300-iteration cap.
// Degenerate inputs (n < 2 or identical feature vectors) collapse to a
// single cluster. Deterministic given seed.
ClusterResult cluster_sector(const std::vector<StockFeatures>& features,
                             std::uint64_t seed);

struct SectorPlan {
    std::string sector;
    int sp500_count = 0;
    int m6_count = 0;
};

// Static sector quotas; m6 counts sum to 50.
std::vector<SectorPlan> default_sector_plan();

// The 50 M6 ETF tickers, static data.
std::vector<std::string> m6_etf_list();

struct SectorClusters {
    std::string sector;
    std::vector<std::vector<std::string>> clusters;  // tickers per cluster
};

struct UniverseSample {
    std::vector<std::string> tickers;       // 50 stocks, plan order
    std::vector<std::string> warnings;      // quota spillovers etc.
};

// Largest-remainder apportionment of each sector quota across its clusters
// proportionally to cluster size, then uniform sampling without replacement
// inside each cluster. Deterministic given seed. Throws DataError when a
// sector in the plan has no clusters or too few stocks in total.
UniverseSample sample_universe(const std::vector<SectorPlan>& plan,
                               const std::vector<SectorClusters>& clusters,
                               std::uint64_t seed);

// Largest-remainder split of `quota` proportional to sizes; exposed for
// testing the worked apportionment cases.
std::vector<int> apportion_quota(const std::vector<std::size_t>& sizes, int quota);

}  // namespace m6
