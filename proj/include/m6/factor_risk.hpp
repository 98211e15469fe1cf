#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

#include "m6/dates.hpp"

namespace m6 {

// Linear combination of standardized asset returns defining one risk factor.
struct FactorSpec {
    std::string name;
    int level = 1;  // 1 = market, 2 = style/asset class, 3 = industry
    std::map<std::string, double> weights;
};

// Versioned text config: `level name ticker:weight ticker:weight ...`,
// '#' comments. Throws ParseError / ConfigError.
std::vector<FactorSpec> load_factor_config(const std::string& path);

// Built-in factor set over the 50 M6 ETFs (equal-weight long/short combos;
// exact competition weightings were never published, so these are declared
// defaults that a config file can override).
std::vector<FactorSpec> default_factor_specs();

struct BekkParams {
    double omega = 0.01;
    double gamma = 0.005;
    void check() const;  // throws ConfigError unless omega,gamma >= 0 and omega+gamma <= 1
};

// Scalar covariance-targeted BEKK recursion:
//   sigma_t = omega*sigma0 + gamma*cross_{t-1} + (1-omega-gamma)*sigma_{t-1}
struct ScalarBekk {
    double sigma0 = 0.0;
    double sigma = 0.0;
    BekkParams params;

    static ScalarBekk start(double sigma0, BekkParams p);
    void update(double lagged_cross);
};

// Matrix form with outer-product innovations; symmetric by construction.
struct MatrixBekk {
    Eigen::MatrixXd sigma0;
    Eigen::MatrixXd sigma;
    BekkParams params;

    static MatrixBekk start(Eigen::MatrixXd sigma0, BekkParams p);
    void update(const Eigen::VectorXd& lagged_error);
};

// z_{i,t} = r_{i,t} / sigma_hat_{i,t}; panels are T x N, vols strictly positive.
Eigen::MatrixXd standardize_returns(const Eigen::MatrixXd& returns,
                                    const Eigen::MatrixXd& one_day_vols);

// Factor return series from standardized returns, each column re-standardized
// to mean 0 / sd 1. Throws DataError on degenerate (zero variance) factors.
Eigen::MatrixXd build_factor_returns(const Eigen::MatrixXd& std_returns,
                                     const std::vector<std::string>& assets,
                                     const std::vector<FactorSpec>& specs);

struct LayerFit {
    Eigen::MatrixXd loadings;          // N x K, post-sample BEKK snapshot
    Eigen::MatrixXd loadings_longrun;  // N x K, static OLS values
    Eigen::MatrixXd residuals;         // T x N, re-standardized (mean 0, sd 1)
    Eigen::VectorXd resid_scale;       // N, sd removed by the re-standardization
};

// One hierarchy layer: long-run asset-factor covariances from OLS with a
// constant, scalar BEKK dynamics on the covariances, identity-shrunk BEKK
// factor covariance for the within-layer loading solve.
LayerFit fit_layer(const Eigen::MatrixXd& z_panel, const Eigen::MatrixXd& factors,
                   const BekkParams& params);

struct FactorRiskModel {
    Date date;
    std::vector<std::string> assets;
    std::vector<std::string> factor_names;
    Eigen::MatrixXd loadings;      // N x K in standardized-return units
    Eigen::MatrixXd factor_cov;    // K x K, identity-shrunk BEKK snapshot
    Eigen::VectorXd specific_var;  // N, standardized units
    Eigen::VectorXd vol_scale;     // N, daily sd used to de-standardize

    // D (B Sigma_F B' + Omega) D, daily return^2 units, PSD-repaired
    // (eigenvalue clipping, applied only when min eigenvalue < -1e-10).
    Eigen::MatrixXd covariance() const;
};

// Fits the three layers sequentially on an already-standardized panel, then
// specific risk and factor covariance, all with the same BEKK parameters.
FactorRiskModel assemble_covariance(const Eigen::MatrixXd& std_returns,
                                    const std::vector<std::string>& assets,
                                    const std::vector<FactorSpec>& specs,
                                    const BekkParams& params,
                                    const Eigen::VectorXd& vol_scale, Date date);

double portfolio_variance(const Eigen::VectorXd& w, const FactorRiskModel& model);
double annualized_vol(const Eigen::VectorXd& w, const FactorRiskModel& model);

struct RiskDecomposition {
    double m6m_var = 0.0;
    double other_systematic_var = 0.0;
    double specific_var = 0.0;
    double covariance_effect = 0.0;
    double total = 0.0;  // == sum of the four components
};

RiskDecomposition risk_decomposition(const Eigen::VectorXd& w,
                                     const FactorRiskModel& model);

struct GridCell {
    double omega = 0.0;
    double gamma = 0.0;
    double log_lik = 0.0;
    bool ok = false;
};

struct GridConfig {
    std::vector<double> omegas{0.030, 0.020, 0.010, 0.005};
    std::vector<double> gammas{0.0025, 0.0050, 0.0075};
    int n_windows = 36;
    int window_days = 20;
};

struct GridSearchResult {
    double omega = 0.0;
    double gamma = 0.0;
    std::vector<GridCell> cells;  // one per (omega, gamma), all evaluated
};

// Out-of-sample Gaussian log-likelihood over consecutive windows at the end
// of the sample; the model is refit on data before each window start and the
// covariance held fixed inside the window. Likelihood is evaluated in
// standardized-return units (the de-standardization scale is common to all
// cells and cannot change the argmax). Cells whose fit fails are excluded
// with ok=false; throws DataError if every cell fails.
GridSearchResult grid_search(const Eigen::MatrixXd& std_returns,
                             const std::vector<std::string>& assets,
                             const std::vector<FactorSpec>& specs,
                             const GridConfig& cfg = {});

}  // namespace m6
