#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace m6 {

// Cross-sectional standardized forecast scores. Raw score is the expected
// quintile sum_k k*p_k in [1,5]; standardization uses the cross-sectional
// population sd, falling back to sqrt(2) (population sd of {1..5}) when the
// scores are constant.
Eigen::VectorXd score_submission(const std::vector<std::array<double, 5>>& probs);

// alpha_i = ic * sigma_i * score_i with a zero prior mean. sigma is the
// annualized 20-day volatility forecast per asset.
Eigen::VectorXd linear_bayes_alpha(const Eigen::VectorXd& scores, double ic,
                                   const Eigen::VectorXd& sigma20_annualized);

enum class SolverStatus { OK, FAILED, INFEASIBLE_TARGET };

struct OptConstraints {
    double gross_min = 0.25;
    double gross_max = 1.0;
    double min_vol_annualized = 0.0;  // 0 disables the risk floor
};

struct OptimizedPortfolio {
    Eigen::VectorXd weights;
    double objective_value = 0.0;  // w.alpha / sqrt(w' Sigma w)
    double ex_ante_vol = 0.0;      // sqrt(252 * w' Sigma w), annualized
    SolverStatus status = SolverStatus::FAILED;
    int n_starts_converged = 0;
};

// Sharpe-ratio maximization under gross-exposure bounds. alpha is annualized,
// covariance is in daily return^2 units; the objective is scale free so the
// returned weights sit at gross exposure gross_max. Multi-start projected
// gradient (benchmark, alpha-proportional, Sigma^-1 alpha, plus seeded random
// starts; 8 in total), first-order stationarity tolerance 1e-6. Throws
// DataError when alpha is identically zero.
OptimizedPortfolio max_sharpe(const Eigen::VectorXd& alpha,
                              const Eigen::MatrixXd& covariance,
                              const OptConstraints& constraints = {},
                              std::uint64_t seed = 42);

// Same with an annualized ex-ante volatility floor; INFEASIBLE_TARGET when
// the gross-exposure cap makes the target unreachable.
OptimizedPortfolio max_sharpe_risk_target(const Eigen::VectorXd& alpha,
                                          const Eigen::MatrixXd& covariance,
                                          double min_vol_annualized,
                                          const OptConstraints& constraints = {},
                                          std::uint64_t seed = 42);

struct ReverseOptConfig {
    double implied_ic = 0.3;
    double score_sd = 3.0;
    bool literal_bound_mode = false;  // each alpha_i runs to its bound with sign(w_i)
};

struct ReverseOptResult {
    Eigen::VectorXd implied_alpha;
    std::vector<int> implied_rank;                 // 1..5 per asset
    std::vector<std::array<double, 5>> forecast;   // one-hot rows
};

// Infers the alpha vector that makes `w_submitted` a stationary point of the
// Sharpe objective (alpha proportional to Sigma w), rescaled to fit the
// per-asset bounds +-(implied_ic * score_sd * sigma_i). The degenerate
// literal reading is available behind literal_bound_mode. Throws DataError
// on a zero portfolio.
ReverseOptResult reverse_optimize(const Eigen::VectorXd& w_submitted,
                                  const Eigen::MatrixXd& covariance,
                                  const Eigen::VectorXd& sigma_annualized,
                                  const ReverseOptConfig& cfg = {});

struct RealizedIc {
    double ic = 0.0;
    bool defined = true;  // false (ic reported 0) for constant scores
};

// Spearman rank correlation of scores with subsequent returns.
RealizedIc realized_ic(const Eigen::VectorXd& scores,
                       const Eigen::VectorXd& realized_returns);

struct IcStudyEntry {
    int period = 0;
    double realized_ic = 0.0;
    double sub_risk = 0.0, opt_risk = 0.0;
    double sub_ret = 0.0, opt_ret = 0.0;
    double sub_ir = 0.0, opt_ir = 0.0;
};

struct IcQuintileRow {
    int quintile = 0;  // 1 (lowest IC) .. 5
    std::size_t count = 0;
    double median_ic = 0.0;
    double median_sub_risk = 0.0, median_opt_risk = 0.0;
    double median_sub_ret = 0.0, median_opt_ret = 0.0;
    double median_sub_ir = 0.0, median_opt_ir = 0.0;
};

// Groups submissions into realized-IC quintiles per period (group sizes
// differ by at most one) and reports medians per quintile.
std::vector<IcQuintileRow> ic_quintile_report(const std::vector<IcStudyEntry>& entries);

// Average-rank vector (ties averaged), 1 = smallest.
Eigen::VectorXd average_ranks(const Eigen::VectorXd& values);

}  // namespace m6
