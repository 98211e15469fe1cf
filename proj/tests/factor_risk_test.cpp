#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "m6/errors.hpp"
#include "m6/factor_risk.hpp"
#include "m6/universe.hpp"

using namespace m6;

namespace {

// small synthetic market: one common factor plus idiosyncratic noise
Eigen::MatrixXd one_factor_panel(int t, int n, double beta, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    Eigen::MatrixXd z(t, n);
    for (int s = 0; s < t; ++s) {
        const double f = nd(rng);
        for (int i = 0; i < n; ++i)
            z(s, i) = beta * f + std::sqrt(1.0 - beta * beta) * nd(rng);
    }
    return z;
}

std::vector<std::string> names(int n) {
    std::vector<std::string> out;
    for (int i = 0; i < n; ++i) out.push_back("S" + std::to_string(i));
    return out;
}

std::vector<FactorSpec> market_only(const std::vector<std::string>& assets) {
    FactorSpec m;
    m.name = "MKT";
    m.level = 1;
    for (const auto& a : assets)
        m.weights[a] = 1.0 / static_cast<double>(assets.size());
    return {m};
}

}  // namespace

TEST_CASE("bekk parameter validation") {
    const BekkParams good{0.01, 0.005};
    CHECK_NOTHROW(good.check());
    const BekkParams negative{-0.1, 0.0};
    CHECK_THROWS_AS(negative.check(), ConfigError);
    const BekkParams explosive{0.6, 0.5};
    CHECK_THROWS_AS(explosive.check(), ConfigError);
}

TEST_CASE("scalar bekk with omega=1 pins the recursion to its target") {
    ScalarBekk b = ScalarBekk::start(2.5, {1.0, 0.0});
    for (int t = 0; t < 100; ++t) {
        b.update(17.0);  // innovations are ignored at gamma=0
        CHECK(b.sigma == 2.5);
    }
}

TEST_CASE("scalar bekk targeting keeps the long-run level under iid errors") {
    // E[e^2] equal to sigma0 keeps E[sigma_t] at sigma0
    std::mt19937_64 rng(31);
    std::normal_distribution<double> nd(0.0, 1.0);
    ScalarBekk b = ScalarBekk::start(1.0, {0.01, 0.005});
    double acc = 0.0;
    const int steps = 200000;
    for (int t = 0; t < steps; ++t) {
        const double e = nd(rng);
        b.update(e * e);
        acc += b.sigma;
    }
    CHECK(acc / steps == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("matrix bekk stays symmetric and targets Sigma0") {
    Eigen::MatrixXd s0(2, 2);
    s0 << 1.0, 0.3, 0.3, 1.0;
    MatrixBekk b = MatrixBekk::start(s0, {1.0, 0.0});
    b.update(Eigen::Vector2d(5.0, -3.0));
    CHECK((b.sigma - s0).norm() == doctest::Approx(0.0));

    b = MatrixBekk::start(s0, {0.01, 0.005});
    std::mt19937_64 rng(8);
    std::normal_distribution<double> nd;
    const Eigen::LLT<Eigen::MatrixXd> chol(s0);
    Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(2, 2);
    const int steps = 100000;
    for (int t = 0; t < steps; ++t) {
        const Eigen::Vector2d e =
            chol.matrixL() * Eigen::Vector2d(nd(rng), nd(rng));
        b.update(e);
        mean += b.sigma / steps;
        CHECK(b.sigma(0, 1) == b.sigma(1, 0));
    }
    CHECK((mean - s0).norm() / s0.norm() < 0.05);
}

TEST_CASE("standardize_returns divides by the matching volatility") {
    Eigen::MatrixXd r(2, 2), v(2, 2);
    r << 0.02, -0.01, 0.03, 0.005;
    v << 0.01, 0.02, 0.01, 0.02;
    const Eigen::MatrixXd z = standardize_returns(r, v);
    CHECK(z(0, 0) == doctest::Approx(2.0));
    CHECK(z(0, 1) == doctest::Approx(-0.5));
    v(1, 1) = 0.0;
    CHECK_THROWS_AS(standardize_returns(r, v), DataError);
    CHECK_THROWS_AS(standardize_returns(r, Eigen::MatrixXd::Ones(3, 2)), DataError);
}

TEST_CASE("factor returns are unit-variance combinations of the panel") {
    const auto assets = names(6);
    const Eigen::MatrixXd z = one_factor_panel(400, 6, 0.7, 13);
    const Eigen::MatrixXd f = build_factor_returns(z, assets, market_only(assets));
    REQUIRE(f.rows() == 400);
    REQUIRE(f.cols() == 1);
    CHECK(f.col(0).mean() == doctest::Approx(0.0).epsilon(1e-10));
    const double sd = std::sqrt(f.col(0).squaredNorm() / 399.0);  // sample sd
    CHECK(sd == doctest::Approx(1.0).epsilon(1e-10));

    // tickers outside the panel are ignored; an all-unknown factor degenerates
    FactorSpec ghost;
    ghost.name = "GHOST";
    ghost.level = 2;
    ghost.weights["NOPE"] = 1.0;
    CHECK_THROWS_AS(build_factor_returns(z, assets, {ghost}), DataError);
}

TEST_CASE("fit_layer recovers constant loadings and residual scale") {
    // z = 0.8 f + 0.6 eps with f and eps standard normal
    std::mt19937_64 rng(17);
    std::normal_distribution<double> nd;
    const int t = 5000;
    Eigen::MatrixXd f(t, 1), z(t, 2);
    for (int s = 0; s < t; ++s) {
        f(s, 0) = nd(rng);
        z(s, 0) = 0.8 * f(s, 0) + 0.6 * nd(rng);
        z(s, 1) = -0.5 * f(s, 0) + std::sqrt(0.75) * nd(rng);
    }
    const LayerFit fit = fit_layer(z, f, {0.01, 0.005});
    CHECK(fit.loadings_longrun(0, 0) == doctest::Approx(0.8).epsilon(0.05));
    CHECK(fit.loadings_longrun(1, 0) == doctest::Approx(-0.5).epsilon(0.08));
    // BEKK snapshot hovers around the long-run values
    CHECK(fit.loadings(0, 0) == doctest::Approx(0.8).epsilon(0.25));
    CHECK(fit.resid_scale(0) == doctest::Approx(0.6).epsilon(0.05));
    // residuals come back re-standardized
    for (int i = 0; i < 2; ++i) {
        CHECK(fit.residuals.col(i).mean() == doctest::Approx(0.0).epsilon(1e-8));
        // sample sd, T-1 denominator
        CHECK(std::sqrt(fit.residuals.col(i).squaredNorm() / (t - 1)) ==
              doctest::Approx(1.0).epsilon(1e-8));
    }
}

TEST_CASE("assembled covariance is symmetric PSD with sensible diagonal") {
    const auto assets = names(8);
    const Eigen::MatrixXd z = one_factor_panel(600, 8, 0.6, 99);
    const Eigen::VectorXd vols = Eigen::VectorXd::Constant(8, 0.015);
    const FactorRiskModel model = assemble_covariance(
        z, assets, market_only(assets), {0.01, 0.005}, vols, Date{2022, 12, 30});
    const Eigen::MatrixXd cov = model.covariance();
    CHECK((cov - cov.transpose()).norm() == doctest::Approx(0.0).epsilon(1e-14));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    CHECK(es.eigenvalues().minCoeff() >= -1e-12);
    // daily variances should be near vol_scale^2 for unit-variance z
    for (int i = 0; i < 8; ++i)
        CHECK(cov(i, i) == doctest::Approx(0.015 * 0.015).epsilon(0.6));
    // positively loaded one-factor market implies positive cross correlations
    double off = 0.0;
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < i; ++j) off += cov(i, j);
    CHECK(off > 0.0);
}

TEST_CASE("portfolio variance and annualized vol agree") {
    const auto assets = names(5);
    const Eigen::MatrixXd z = one_factor_panel(400, 5, 0.5, 3);
    const Eigen::VectorXd vols = Eigen::VectorXd::Constant(5, 0.01);
    const FactorRiskModel model = assemble_covariance(
        z, assets, market_only(assets), {0.01, 0.005}, vols, Date{2022, 12, 30});
    const Eigen::VectorXd w = Eigen::VectorXd::Constant(5, 0.2);
    const double v = portfolio_variance(w, model);
    CHECK(v > 0.0);
    CHECK(annualized_vol(w, model) == doctest::Approx(std::sqrt(252.0 * v)));
}

TEST_CASE("risk decomposition components add up exactly") {
    std::mt19937_64 rng(55);
    std::normal_distribution<double> nd;
    const auto assets = names(6);
    for (int trial = 0; trial < 25; ++trial) {
        const Eigen::MatrixXd z = one_factor_panel(300, 6, 0.6, 100 + trial);
        Eigen::VectorXd vols(6);
        for (int i = 0; i < 6; ++i) vols(i) = 0.005 + 0.002 * i;
        const FactorRiskModel model = assemble_covariance(
            z, assets, market_only(assets), {0.01, 0.005}, vols, Date{2022, 12, 30});
        Eigen::VectorXd w(6);
        for (int i = 0; i < 6; ++i) w(i) = nd(rng) * 0.2;
        const auto dec = risk_decomposition(w, model);
        const double sum =
            dec.m6m_var + dec.other_systematic_var + dec.specific_var + dec.covariance_effect;
        CHECK(sum == doctest::Approx(dec.total).epsilon(1e-12));
        CHECK(dec.specific_var >= 0.0);
        CHECK(dec.total == doctest::Approx(portfolio_variance(w, model)).epsilon(1e-8));
    }
}

TEST_CASE("default factor set covers three levels over the 50 ETFs") {
    const auto specs = default_factor_specs();
    int l1 = 0, l2 = 0, l3 = 0;
    const auto etfs = m6_etf_list();
    for (const auto& s : specs) {
        if (s.level == 1) {
            ++l1;
            CHECK(s.weights.size() == 50);
            for (const auto& t : etfs) CHECK(s.weights.count(t) == 1);
        } else if (s.level == 2) {
            ++l2;
        } else {
            ++l3;
        }
        for (const auto& [ticker, _] : s.weights)
            CHECK(std::find(etfs.begin(), etfs.end(), ticker) != etfs.end());
    }
    CHECK(l1 == 1);
    CHECK(l2 == 8);
    CHECK(l3 == 10);
}

TEST_CASE("factor config text round trips") {
    const auto path =
        (std::filesystem::temp_directory_path() / "factors.cfg").string();
    {
        std::ofstream out(path);
        out << "# comment\n"
            << "1 MKT IVV:0.5 IWM:0.5\n"
            << "2 TERM TLT:0.5 IEF:0.5 SHY:-1.0\n";
    }
    const auto specs = load_factor_config(path);
    REQUIRE(specs.size() == 2);
    CHECK(specs[0].name == "MKT");
    CHECK(specs[0].level == 1);
    CHECK(specs[1].weights.at("SHY") == doctest::Approx(-1.0));

    std::ofstream(path) << "9 BAD X:1\n";
    CHECK_THROWS_AS(load_factor_config(path), ParseError);
    std::ofstream(path) << "1 BAD X\n";
    CHECK_THROWS_AS(load_factor_config(path), ParseError);
    std::ofstream(path) << "";
    CHECK_THROWS_AS(load_factor_config(path), ConfigError);
    CHECK_THROWS_AS(load_factor_config("/nonexistent.cfg"), ConfigError);
}

TEST_CASE("grid search evaluates every cell and returns a grid member") {
    const auto assets = names(5);
    const Eigen::MatrixXd z = one_factor_panel(700, 5, 0.6, 42);
    GridConfig cfg;
    cfg.n_windows = 8;
    const auto res = grid_search(z, assets, market_only(assets), cfg);
    CHECK(res.cells.size() == 12);
    bool found = false;
    for (double o : cfg.omegas)
        for (double g : cfg.gammas)
            if (o == res.omega && g == res.gamma) found = true;
    CHECK(found);
    int ok_cells = 0;
    for (const auto& c : res.cells)
        if (c.ok) ++ok_cells;
    CHECK(ok_cells == 12);
    // the winner has the best log likelihood among evaluated cells
    for (const auto& c : res.cells)
        if (c.ok && c.omega == res.omega && c.gamma == res.gamma)
            for (const auto& d : res.cells)
                if (d.ok) CHECK(c.log_lik >= d.log_lik);
}
