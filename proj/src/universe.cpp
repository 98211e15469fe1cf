#include "m6/universe.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "m6/errors.hpp"

namespace m6 {

std::array<double, 9> StockFeatures::as_array() const {
    return {avg_price_250, price_cv_250,  price_cv_2018,
            avg_ret_2018,  sd_ret_2018,   total_ret_250,
            total_ret_2018, avg_volume_250, volume_cv_250};
}

namespace {

struct MeanSd {
    double mean = 0.0;
    double sd = 0.0;  // sample sd, divisor n-1
};

MeanSd mean_sd(std::span<const double> xs) {
    MeanSd m;
    const double n = static_cast<double>(xs.size());
    for (double x : xs) m.mean += x;
    m.mean /= n;
    if (xs.size() < 2) return m;
    double ss = 0.0;
    for (double x : xs) ss += (x - m.mean) * (x - m.mean);
    m.sd = std::sqrt(ss / (n - 1.0));
    return m;
}

std::vector<double> simple_returns(std::span<const double> prices) {
    std::vector<double> r;
    r.reserve(prices.size());
    for (std::size_t t = 1; t < prices.size(); ++t)
        r.push_back(prices[t] / prices[t - 1] - 1.0);
    return r;
}

}  // namespace

StockFeatures compute_features(std::span<const Date> calendar,
                               std::span<const double> adj_close,
                               std::span<const double> volume, Date as_of) {
    if (calendar.size() != adj_close.size() || calendar.size() != volume.size())
        throw DataError("compute_features: series lengths differ");
    // last index with date <= as_of
    auto it = std::upper_bound(calendar.begin(), calendar.end(), as_of);
    if (it == calendar.begin()) throw DataError("compute_features: no data at as-of date");
    const std::size_t end = static_cast<std::size_t>(it - calendar.begin());
    if (end < 250)
        throw DataError("compute_features: 250-day window has only " +
                        std::to_string(end) + " days");
    const Date y2018{2018, 1, 1};
    auto s18 = std::lower_bound(calendar.begin(), calendar.begin() + static_cast<std::ptrdiff_t>(end), y2018);
    const std::size_t start18 = static_cast<std::size_t>(s18 - calendar.begin());
    if (end - start18 < 2)
        throw DataError("compute_features: since-2018 window has fewer than 2 days");

    const std::size_t start250 = end - 250;
    auto px250 = adj_close.subspan(start250, 250);
    auto vol250 = volume.subspan(start250, 250);
    auto px18 = adj_close.subspan(start18, end - start18);

    StockFeatures f;
    const MeanSd p250 = mean_sd(px250);
    f.avg_price_250 = p250.mean;
    f.price_cv_250 = p250.mean != 0.0 ? p250.sd / p250.mean : 0.0;
    const MeanSd p18 = mean_sd(px18);
    f.price_cv_2018 = p18.mean != 0.0 ? p18.sd / p18.mean : 0.0;
    const auto r18 = simple_returns(px18);
    const MeanSd r = mean_sd(r18);
    f.avg_ret_2018 = r.mean;
    f.sd_ret_2018 = r.sd;
    f.total_ret_250 = px250.back() / px250.front() - 1.0;
    f.total_ret_2018 = px18.back() / px18.front() - 1.0;
    const MeanSd v250 = mean_sd(vol250);
    f.avg_volume_250 = v250.mean;
    f.volume_cv_250 = v250.mean != 0.0 ? v250.sd / v250.mean : 0.0;
    for (double x : f.as_array())
        if (!std::isfinite(x)) throw DataError("compute_features: non-finite feature");
    return f;
}

namespace {

// one k-means run; returns within-cluster sum of squares
double kmeans_once(const Eigen::MatrixXd& x, int k, std::mt19937_64& rng,
                   std::vector<int>& assignment) {
    const Eigen::Index n = x.rows(), d = x.cols();
    // Forgy init on distinct rows
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    Eigen::MatrixXd centers(k, d);
    for (int c = 0; c < k; ++c) centers.row(c) = x.row(idx[static_cast<std::size_t>(c)]);

    assignment.assign(static_cast<std::size_t>(n), 0);
    double wcss = 0.0;
    for (int iter = 0; iter < 300; ++iter) {
        bool moved = false;
        wcss = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            int bc = 0;
            for (int c = 0; c < k; ++c) {
                const double dist = (x.row(i) - centers.row(c)).squaredNorm();
                if (dist < best) {
                    best = dist;
                    bc = c;
                }
            }
            if (assignment[static_cast<std::size_t>(i)] != bc) {
                assignment[static_cast<std::size_t>(i)] = bc;
                moved = true;
            }
            wcss += best;
        }
        Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, d);
        Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
        for (Eigen::Index i = 0; i < n; ++i) {
            sums.row(assignment[static_cast<std::size_t>(i)]) += x.row(i);
            counts(assignment[static_cast<std::size_t>(i)]) += 1.0;
        }
        for (int c = 0; c < k; ++c) {
            if (counts(c) > 0.0) {
                centers.row(c) = sums.row(c) / counts(c);
            } else {
                // revive empty cluster at the point farthest from its center
                Eigen::Index far = 0;
                double fd = -1.0;
                for (Eigen::Index i = 0; i < n; ++i) {
                    const double dist =
                        (x.row(i) -
                         centers.row(assignment[static_cast<std::size_t>(i)]))
                            .squaredNorm();
                    if (dist > fd) {
                        fd = dist;
                        far = i;
                    }
                }
                centers.row(c) = x.row(far);
                moved = true;
            }
        }
        if (!moved && iter > 0) break;
    }
    return wcss;
}

double mean_silhouette(const Eigen::MatrixXd& x, const std::vector<int>& assignment,
                       int k) {
    const Eigen::Index n = x.rows();
    std::vector<double> counts(static_cast<std::size_t>(k), 0.0);
    for (int a : assignment) counts[static_cast<std::size_t>(a)] += 1.0;
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        std::vector<double> dist_sum(static_cast<std::size_t>(k), 0.0);
        for (Eigen::Index j = 0; j < n; ++j) {
            if (i == j) continue;
            dist_sum[static_cast<std::size_t>(assignment[static_cast<std::size_t>(j)])] +=
                (x.row(i) - x.row(j)).norm();
        }
        const auto ci = static_cast<std::size_t>(assignment[static_cast<std::size_t>(i)]);
        if (counts[ci] <= 1.0) continue;  // singleton clusters contribute 0
        const double a = dist_sum[ci] / (counts[ci] - 1.0);
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < static_cast<std::size_t>(k); ++c)
            if (c != ci && counts[c] > 0.0) b = std::min(b, dist_sum[c] / counts[c]);
        const double denom = std::max(a, b);
        if (denom > 0.0) total += (b - a) / denom;
    }
    return total / static_cast<double>(n);
}

}  // namespace

ClusterResult cluster_sector(const std::vector<StockFeatures>& features,
                             std::uint64_t seed) {
    ClusterResult out;
    const std::size_t n = features.size();
    out.assignment.assign(n, 0);
    if (n < 2) return out;

    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), 9);
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = features[i].as_array();
        for (int j = 0; j < 9; ++j) x(static_cast<Eigen::Index>(i), j) = row[static_cast<std::size_t>(j)];
    }
    // z-score per feature; constant columns carry no information
    for (int j = 0; j < 9; ++j) {
        const double mean = x.col(j).mean();
        const double sd = std::sqrt((x.col(j).array() - mean).square().sum() /
                                    static_cast<double>(n - 1));
        if (sd > 0.0)
            x.col(j) = (x.col(j).array() - mean) / sd;
        else
            x.col(j).setZero();
    }
    if (x.isZero(1e-12)) return out;  // identical feature vectors

    const int k_max = static_cast<int>(std::min<std::size_t>(8, n - 1));
    std::mt19937_64 rng(seed);
    double best_sil = -std::numeric_limits<double>::infinity();
    for (int k = 2; k <= k_max; ++k) {
        std::vector<int> best_assign;
        double best_wcss = std::numeric_limits<double>::infinity();
        for (int restart = 0; restart < 20; ++restart) {
            std::vector<int> assign;
            const double wcss = kmeans_once(x, k, rng, assign);
            if (wcss < best_wcss) {
                best_wcss = wcss;
                best_assign = std::move(assign);
            }
        }
        const double sil = mean_silhouette(x, best_assign, k);
        if (sil > best_sil) {
            best_sil = sil;
            out.k = k;
            out.assignment = best_assign;
            out.silhouette = sil;
        }
    }
    return out;
}

std::vector<SectorPlan> default_sector_plan() {
    return {
        {"Communication Services", 27, 3}, {"Consumer Discretionary", 63, 6},
        {"Consumer Staples", 32, 3},       {"Energy", 21, 2},
        {"Financials", 65, 7},             {"Health Care", 64, 6},
        {"Industrials", 74, 7},            {"Information Technology", 74, 7},
        {"Materials", 28, 3},              {"Real Estate", 29, 3},
        {"Utilities", 28, 3},
    };
}

std::vector<std::string> m6_etf_list() {
    return {"EWA",    "EWC",    "EWG",    "EWH",    "EWJ",    "EWL",    "EWQ",
            "EWT",    "EWU",    "EWY",    "EWZ",    "GSG",    "HIGH.L", "HYG",
            "IAU",    "ICLN",   "IEAA.L", "IEF",    "IEFM.L", "IEMG",   "IEUS",
            "IEVL.L", "IGF",    "INDA",   "IUMO.L", "IUVL.L", "IVV",    "IWM",
            "IXN",    "JPEA.L", "LQD",    "MCHI",   "MVEU.L", "REET",   "SEGA.L",
            "SHY",    "SLV",    "SPMV.L", "TLT",    "VXX",    "XLB",    "XLC",
            "XLE",    "XLF",    "XLI",    "XLK",    "XLP",    "XLU",    "XLV",
            "XLY"};
}

std::vector<int> apportion_quota(const std::vector<std::size_t>& sizes, int quota) {
    const double total = static_cast<double>(
        std::accumulate(sizes.begin(), sizes.end(), std::size_t{0}));
    if (total == 0.0) throw DataError("apportion_quota: empty clusters");
    std::vector<int> out(sizes.size(), 0);
    std::vector<std::pair<double, std::size_t>> remainders;
    int assigned = 0;
    for (std::size_t c = 0; c < sizes.size(); ++c) {
        const double ideal = static_cast<double>(sizes[c]) / total * quota;
        out[c] = static_cast<int>(std::floor(ideal));
        assigned += out[c];
        remainders.emplace_back(ideal - std::floor(ideal), c);
    }
    // ties broken toward larger clusters, then lower index, for determinism
    std::sort(remainders.begin(), remainders.end(),
              [&](const auto& a, const auto& b) {
                  if (a.first != b.first) return a.first > b.first;
                  if (sizes[a.second] != sizes[b.second])
                      return sizes[a.second] > sizes[b.second];
                  return a.second < b.second;
              });
    for (std::size_t r = 0; assigned < quota; ++r, ++assigned)
        ++out[remainders[r % remainders.size()].second];
    return out;
}

UniverseSample sample_universe(const std::vector<SectorPlan>& plan,
                               const std::vector<SectorClusters>& clusters,
                               std::uint64_t seed) {
    UniverseSample out;
    std::mt19937_64 rng(seed);
    for (const auto& sector : plan) {
        auto it = std::find_if(clusters.begin(), clusters.end(),
                               [&](const SectorClusters& c) {
                                   return c.sector == sector.sector;
                               });
        if (it == clusters.end() || it->clusters.empty())
            throw DataError("sample_universe: no clusters for sector " + sector.sector);
        std::vector<std::size_t> sizes;
        std::size_t total = 0;
        for (const auto& c : it->clusters) {
            sizes.push_back(c.size());
            total += c.size();
        }
        if (total < static_cast<std::size_t>(sector.m6_count))
            throw DataError("sample_universe: sector " + sector.sector + " has " +
                            std::to_string(total) + " stocks, quota " +
                            std::to_string(sector.m6_count));
        std::vector<int> quota = apportion_quota(sizes, sector.m6_count);

        // spill quota exceeding a cluster's size into the largest cluster
        // that still has room
        for (std::size_t c = 0; c < quota.size(); ++c) {
            while (quota[c] > static_cast<int>(sizes[c])) {
                std::size_t target = quota.size();
                std::size_t target_size = 0;
                for (std::size_t d = 0; d < quota.size(); ++d)
                    if (d != c && quota[d] < static_cast<int>(sizes[d]) &&
                        sizes[d] > target_size) {
                        target = d;
                        target_size = sizes[d];
                    }
                if (target == quota.size())
                    throw DataError("sample_universe: cannot satisfy quota in " +
                                    sector.sector);
                --quota[c];
                ++quota[target];
                out.warnings.push_back("sector " + sector.sector + ": quota moved from cluster " +
                                       std::to_string(c) + " to " + std::to_string(target));
            }
        }

        for (std::size_t c = 0; c < quota.size(); ++c) {
            if (quota[c] == 0) continue;
            std::vector<std::string> pool = it->clusters[c];
            std::sort(pool.begin(), pool.end());  // input-order independence
            std::vector<std::string> picked;
            std::sample(pool.begin(), pool.end(), std::back_inserter(picked),
                        quota[c], rng);
            for (auto& t : picked) out.tickers.push_back(std::move(t));
        }
    }
    return out;
}

}  // namespace m6
