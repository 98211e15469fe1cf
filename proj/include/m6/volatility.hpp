#pragma once

#include <array>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "m6/dates.hpp"
#include "m6/market_data.hpp"

namespace m6 {

inline constexpr double kVarianceFloor = 1e-10;
inline constexpr std::array<double, 4> kExpRvComs = {1.0, 5.0, 25.0, 125.0};

// Daily-variance units throughout; annualize (x252) only at reporting.

// Parkinson: mean of (u-d)^2 / (4 ln 2) over the window.
double parkinson_var(std::span<const LogDayComponents> window);

// Rogers-Satchell: mean of u(u-c) + d(d-c); drift robust.
double rogers_satchell_var(std::span<const LogDayComponents> window);

// Garman-Klass single-day estimate, floored at 0.
double garman_klass_var(const LogDayComponents& day);

// Yang-Zhang drift-adjusted estimate; needs window size >= 2.
double yang_zhang_var(std::span<const LogDayComponents> window);

// Exponentially weighted mean of a daily-variance series, weights
// e^{-lambda*age} renormalized over available history, lambda = log(1+1/com).
double exp_rv(std::span<const double> daily_vars, double com);

// Per-asset feature vector at one date.
struct VarianceFeatures {
    std::string asset_id;
    Date date;
    std::array<double, 4> exp_rv{};  // CoM 1, 5, 25, 125
    double global_rv = 0.0;          // universe ExpRV^5 average, native rescale
    double long_run_rv = 0.0;        // expanding-window Yang-Zhang
};

// Scale-free cross-asset mean of ExpRV(CoM 5)/long_run_rv, multiplied back by
// each asset's long-run variance. Keys are asset ids; inputs must share keys.
std::map<std::string, double> global_rv(
    const std::map<std::string, double>& exp_rv_com5,
    const std::map<std::string, double>& long_run_rv);

// Full per-asset feature series, one entry per day starting at the second
// calendar day (components need the prior close). O(T) per asset.
std::vector<VarianceFeatures> feature_series(const PriceHistory& filled_history);

// Fills the global_rv slot across a per-asset feature panel, date by date.
void attach_global_rv(std::map<std::string, std::vector<VarianceFeatures>>& panel);

struct HexpModel {
    int horizon_days = 1;  // 1 or 20
    std::array<double, 5> kappa{};
    Date fit_date;
    std::size_t n_obs = 0;
    double residual_variance = 0.0;
};

struct HexpObservation {
    std::array<double, 5> regressors{};  // demeaned by long-run variance
    double target = 0.0;                 // realized h-day variance minus long-run
};

// Builds the stacked training rows for one asset: regressors at t are the
// four ExpRV terms and the global term, each minus long_run_rv; the target is
// Garman-Klass at t+1 (h=1) or Yang-Zhang over days t+1..t+h (h=20), minus
// long_run_rv at t. Overlapping windows stepped daily.
std::vector<HexpObservation> hexp_training_rows(
    std::span<const VarianceFeatures> features,
    std::span<const LogDayComponents> components, int horizon_days);

// Single no-intercept LS fit over the stacked panel (variance targeting).
// Throws DataError when the sample is too small or the design is rank
// deficient (names the collinear columns).
HexpModel fit_hexp(std::span<const HexpObservation> panel, int horizon_days,
                   Date fit_date = {}, std::size_t min_rows = 50);

// long_run_rv + kappa . (demeaned regressors), floored at kVarianceFloor.
double forecast_variance(const HexpModel& model, const VarianceFeatures& features);

// JSON dump {horizon, kappa[5], fit_date, n_obs} for reproducibility.
std::string hexp_model_json(const HexpModel& model);

}  // namespace m6
