#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <set>

#include "m6/errors.hpp"
#include "m6/run_config.hpp"
#include "m6/universe.hpp"

using namespace m6;

namespace {

// simple daily calendar long enough for both feature windows
std::vector<Date> long_calendar(int days) {
    std::vector<Date> cal;
    Date d{2017, 1, 2};
    for (int t = 0; t < days; ++t) {
        cal.push_back(d);
        d = add_days(d, 1);
    }
    return cal;
}

StockFeatures blob_point(double center, std::mt19937_64& rng) {
    std::normal_distribution<double> nd(0.0, 0.05);
    StockFeatures f;
    f.avg_price_250 = center + nd(rng);
    f.price_cv_250 = center + nd(rng);
    f.price_cv_2018 = center + nd(rng);
    f.avg_ret_2018 = center + nd(rng);
    f.sd_ret_2018 = center + nd(rng);
    f.total_ret_250 = center + nd(rng);
    f.total_ret_2018 = center + nd(rng);
    f.avg_volume_250 = center + nd(rng);
    f.volume_cv_250 = center + nd(rng);
    return f;
}

}  // namespace

TEST_CASE("constant series give zero CVs and zero total returns") {
    const auto cal = long_calendar(1600);
    const std::vector<double> px(cal.size(), 42.0);
    const std::vector<double> vol(cal.size(), 1e6);
    const auto f = compute_features(cal, px, vol, cal.back());
    CHECK(f.avg_price_250 == doctest::Approx(42.0));
    CHECK(f.price_cv_250 == doctest::Approx(0.0));
    CHECK(f.price_cv_2018 == doctest::Approx(0.0));
    CHECK(f.total_ret_250 == doctest::Approx(0.0));
    CHECK(f.total_ret_2018 == doctest::Approx(0.0));
    CHECK(f.avg_ret_2018 == doctest::Approx(0.0));
    CHECK(f.sd_ret_2018 == doctest::Approx(0.0));
    CHECK(f.avg_volume_250 == doctest::Approx(1e6));
    CHECK(f.volume_cv_250 == doctest::Approx(0.0));
}

TEST_CASE("price doubling over the 250-day window gives total return 1") {
    const auto cal = long_calendar(1600);
    std::vector<double> px(cal.size(), 100.0);
    std::vector<double> vol(cal.size(), 1.0);
    // last 250 entries ramp linearly from 100 to 200
    for (int i = 0; i < 250; ++i)
        px[px.size() - 250 + static_cast<std::size_t>(i)] =
            100.0 + 100.0 * i / 249.0;
    const auto f = compute_features(cal, px, vol, cal.back());
    CHECK(f.total_ret_250 == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("features match closed forms on a two-value series") {
    // since-2018 window restricted to exactly 4 days with known values
    std::vector<Date> cal = {Date{2017, 12, 28}, Date{2017, 12, 29}};
    for (int t = 0; t < 250; ++t) cal.push_back(add_days(Date{2018, 1, 1}, t));
    std::vector<double> px(cal.size(), 10.0), vol(cal.size(), 5.0);
    // alternate 10/12 through the whole 2018 window
    for (std::size_t i = 2; i < px.size(); ++i) px[i] = (i % 2 == 0) ? 10.0 : 12.0;
    const auto f = compute_features(cal, px, vol, cal.back());
    const double mean = (125 * 10.0 + 125 * 12.0) / 250.0;
    double ss = 0.0;
    for (std::size_t i = 2; i < px.size(); ++i) ss += (px[i] - mean) * (px[i] - mean);
    const double sd = std::sqrt(ss / 249.0);
    CHECK(f.avg_price_250 == doctest::Approx(mean).epsilon(1e-12));
    CHECK(f.price_cv_250 == doctest::Approx(sd / mean).epsilon(1e-10));
    // daily simple returns alternate +0.2 and -1/6
    CHECK(f.avg_ret_2018 ==
          doctest::Approx((125 * 0.2 + 124 * (-1.0 / 6.0)) / 249.0).epsilon(1e-10));
}

TEST_CASE("volume-unit rescaling leaves the volume CV unchanged") {
    const auto cal = long_calendar(1600);
    std::vector<double> px(cal.size()), vol(cal.size());
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(1.0, 2.0);
    for (std::size_t i = 0; i < cal.size(); ++i) {
        px[i] = 50.0 * u(rng);
        vol[i] = 1e5 * u(rng);
    }
    const auto f1 = compute_features(cal, px, vol, cal.back());
    for (auto& v : vol) v *= 1000.0;
    const auto f2 = compute_features(cal, px, vol, cal.back());
    CHECK(f1.volume_cv_250 == doctest::Approx(f2.volume_cv_250).epsilon(1e-12));
    CHECK(f2.avg_volume_250 == doctest::Approx(1000.0 * f1.avg_volume_250));
}

TEST_CASE("insufficient history is rejected with a named window") {
    const auto cal = long_calendar(100);
    const std::vector<double> px(cal.size(), 10.0), vol(cal.size(), 1.0);
    CHECK_THROWS_WITH_AS(compute_features(cal, px, vol, cal.back()),
                         doctest::Contains("250-day"), DataError);
    // data ending before 2018 has an empty modern window
    std::vector<Date> old_cal;
    for (int t = 0; t < 400; ++t) old_cal.push_back(add_days(Date{2015, 1, 1}, t));
    const std::vector<double> opx(old_cal.size(), 10.0), ovol(old_cal.size(), 1.0);
    CHECK_THROWS_WITH_AS(compute_features(old_cal, opx, ovol, old_cal.back()),
                         doctest::Contains("2018"), DataError);
}

TEST_CASE("two well-separated blobs cluster perfectly at k=2") {
    std::mt19937_64 rng(8);
    std::vector<StockFeatures> feats;
    for (int i = 0; i < 12; ++i) feats.push_back(blob_point(0.0, rng));
    for (int i = 0; i < 9; ++i) feats.push_back(blob_point(10.0, rng));
    const auto res = cluster_sector(feats, 42);
    CHECK(res.k == 2);
    // all members of each blob share a label
    const int first = res.assignment[0];
    for (int i = 0; i < 12; ++i) CHECK(res.assignment[static_cast<std::size_t>(i)] == first);
    for (int i = 12; i < 21; ++i)
        CHECK(res.assignment[static_cast<std::size_t>(i)] != first);
    CHECK(res.silhouette > 0.9);
}

TEST_CASE("degenerate inputs collapse to one cluster") {
    std::mt19937_64 rng(1);
    const StockFeatures f = blob_point(1.0, rng);
    CHECK(cluster_sector({f}, 5).k == 1);
    CHECK(cluster_sector({}, 5).k == 1);
    const std::vector<StockFeatures> same(7, f);
    const auto res = cluster_sector(same, 5);
    CHECK(res.k == 1);
    for (int a : res.assignment) CHECK(a == 0);
}

TEST_CASE("clustering is deterministic under a fixed seed") {
    std::mt19937_64 rng(8);
    std::vector<StockFeatures> feats;
    for (int i = 0; i < 25; ++i) feats.push_back(blob_point(i % 3 * 4.0, rng));
    const auto a = cluster_sector(feats, 99);
    const auto b = cluster_sector(feats, 99);
    CHECK(a.k == b.k);
    CHECK(a.assignment == b.assignment);
}

TEST_CASE("largest-remainder apportionment matches the worked cases") {
    // the documented sector example: sizes 5/16, quota 2 -> 0 and 2
    CHECK(apportion_quota({5, 16}, 2) == std::vector<int>{0, 2});
    // equal remainders 1.5/1.5 with quota 3 resolve to 2/1 (larger first)
    CHECK(apportion_quota({10, 10}, 3) == std::vector<int>{2, 1});
    // single cluster takes everything
    CHECK(apportion_quota({4}, 3) == std::vector<int>{3});
    // quotas always sum to the target
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<std::size_t> size(1, 30);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::size_t> sizes(1 + trial % 5);
        for (auto& s : sizes) s = size(rng);
        const auto q = apportion_quota(sizes, 7);
        int sum = 0;
        for (int v : q) sum += v;
        CHECK(sum == 7);
    }
}

TEST_CASE("sector plan totals 50 and the ETF list holds 50 unique names") {
    const auto plan = default_sector_plan();
    int total = 0;
    for (const auto& s : plan) total += s.m6_count;
    CHECK(total == 50);
    const auto etfs = m6_etf_list();
    CHECK(etfs.size() == 50);
    CHECK(std::set<std::string>(etfs.begin(), etfs.end()).size() == 50);
}

TEST_CASE("sampling is seed-deterministic with exact sector counts") {
    std::mt19937_64 rng(4);
    std::vector<SectorClusters> clusters;
    const auto plan = default_sector_plan();
    for (const auto& s : plan) {
        SectorClusters sc;
        sc.sector = s.sector;
        // two clusters per sector, comfortably larger than the quota
        sc.clusters.resize(2);
        for (int i = 0; i < s.m6_count + 4; ++i)
            sc.clusters[static_cast<std::size_t>(i % 2)].push_back(
                s.sector + "_" + std::to_string(i));
        clusters.push_back(std::move(sc));
    }
    const auto a = sample_universe(plan, clusters, 7);
    const auto b = sample_universe(plan, clusters, 7);
    const auto c = sample_universe(plan, clusters, 8);
    CHECK(a.tickers == b.tickers);
    CHECK(a.tickers != c.tickers);
    CHECK(a.tickers.size() == 50);
    for (const auto& s : plan) {
        const auto count = std::count_if(
            a.tickers.begin(), a.tickers.end(), [&](const std::string& t) {
                return t.rfind(s.sector + "_", 0) == 0;
            });
        CHECK(count == s.m6_count);
    }
}

TEST_CASE("quota spilling over an undersized cluster warns and still fills") {
    std::vector<SectorPlan> plan = {{"X", 10, 4}};
    SectorClusters sc;
    sc.sector = "X";
    sc.clusters = {{"a"}, {"b", "c", "d", "e", "f", "g", "h", "i"}};
    // apportionment wants ~0.44/3.56 -> (0,4); force the tiny cluster over
    sc.clusters = {{"a"}, {"b"}, {"c", "d", "e", "f", "g", "h"}};
    const auto res = sample_universe(plan, {sc}, 3);
    CHECK(res.tickers.size() == 4);
    // a sector without enough stocks in total is an error
    SectorClusters small;
    small.sector = "X";
    small.clusters = {{"a", "b"}};
    CHECK_THROWS_AS(sample_universe(plan, {small}, 3), DataError);
    CHECK_THROWS_AS(sample_universe(plan, {}, 3), DataError);
}
