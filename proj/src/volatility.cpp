#include "m6/volatility.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "m6/errors.hpp"

namespace m6 {

namespace {
constexpr double kInv4Log2 = 1.0 / (4.0 * 0.69314718055994530942);
}

double parkinson_var(std::span<const LogDayComponents> window) {
    if (window.empty()) throw DataError("parkinson_var: empty window");
    double sum = 0.0;
    for (const auto& d : window) {
        const double range = d.u - d.d;
        sum += range * range;
    }
    return kInv4Log2 * sum / static_cast<double>(window.size());
}

double rogers_satchell_var(std::span<const LogDayComponents> window) {
    if (window.empty()) throw DataError("rogers_satchell_var: empty window");
    double sum = 0.0;
    for (const auto& d : window)
        sum += d.u * (d.u - d.c) + d.d * (d.d - d.c);
    return sum / static_cast<double>(window.size());
}

double garman_klass_var(const LogDayComponents& day) {
    std::span<const LogDayComponents> one(&day, 1);
    const double v = day.o * day.o - 0.383 * day.c * day.c +
                     1.364 * parkinson_var(one) + 0.019 * rogers_satchell_var(one);
    return std::max(v, 0.0);
}

double yang_zhang_var(std::span<const LogDayComponents> window) {
    const std::size_t t = window.size();
    if (t < 2) throw DataError("yang_zhang_var: window must have >= 2 days");
    double o_bar = 0.0, c_bar = 0.0;
    for (const auto& d : window) {
        o_bar += d.o;
        c_bar += d.c;
    }
    o_bar /= static_cast<double>(t);
    c_bar /= static_cast<double>(t);
    double v_o = 0.0, v_c = 0.0;
    for (const auto& d : window) {
        v_o += (d.o - o_bar) * (d.o - o_bar);
        v_c += (d.c - c_bar) * (d.c - c_bar);
    }
    v_o /= static_cast<double>(t - 1);
    v_c /= static_cast<double>(t - 1);
    const double k = 0.34 / (1.34 + static_cast<double>(t + 1) / static_cast<double>(t - 1));
    return v_o + k * v_c + (1.0 - k) * rogers_satchell_var(window);
}

double exp_rv(std::span<const double> daily_vars, double com) {
    if (daily_vars.empty()) throw DataError("exp_rv: empty series");
    const double lambda = std::log(1.0 + 1.0 / com);
    const double decay = std::exp(-lambda);
    // age 0 = most recent observation; recurse oldest-first.
    double num = 0.0, den = 0.0;
    for (double v : daily_vars) {
        num = decay * num + v;
        den = decay * den + 1.0;
    }
    return num / den;
}

std::map<std::string, double> global_rv(
    const std::map<std::string, double>& exp_rv_com5,
    const std::map<std::string, double>& long_run_rv) {
    if (exp_rv_com5.empty()) throw DataError("global_rv: no assets");
    double ratio_sum = 0.0;
    std::size_t n = 0;
    for (const auto& [asset, v] : exp_rv_com5) {
        auto lr = long_run_rv.find(asset);
        if (lr == long_run_rv.end() || lr->second <= 0.0)
            throw DataError("global_rv: missing/nonpositive long-run variance for " + asset);
        ratio_sum += v / lr->second;
        ++n;
    }
    const double mean_ratio = ratio_sum / static_cast<double>(n);
    std::map<std::string, double> out;
    for (const auto& [asset, lr] : long_run_rv)
        if (exp_rv_com5.count(asset)) out[asset] = mean_ratio * lr;
    return out;
}

std::vector<VarianceFeatures> feature_series(const PriceHistory& filled_history) {
    const auto comps = log_components(filled_history);
    const std::size_t n = comps.size();
    std::vector<VarianceFeatures> out(n);

    std::array<double, 4> decay{}, num{}, den{};
    for (std::size_t k = 0; k < 4; ++k)
        decay[k] = std::exp(-std::log(1.0 + 1.0 / kExpRvComs[k]));

    // running sums for the expanding Yang-Zhang long-run estimate
    double so = 0.0, so2 = 0.0, sc = 0.0, sc2 = 0.0, srs = 0.0;

    for (std::size_t t = 0; t < n; ++t) {
        const auto& d = comps[t];
        const double gk = garman_klass_var(d);
        for (std::size_t k = 0; k < 4; ++k) {
            num[k] = decay[k] * num[k] + gk;
            den[k] = decay[k] * den[k] + 1.0;
        }
        so += d.o;
        so2 += d.o * d.o;
        sc += d.c;
        sc2 += d.c * d.c;
        srs += d.u * (d.u - d.c) + d.d * (d.d - d.c);

        VarianceFeatures& f = out[t];
        f.asset_id = filled_history.asset_id;
        f.date = filled_history.calendar[t + 1];
        for (std::size_t k = 0; k < 4; ++k) f.exp_rv[k] = num[k] / den[k];

        const double cnt = static_cast<double>(t + 1);
        if (t == 0) {
            f.long_run_rv = std::max(gk, kVarianceFloor);
        } else {
            const double v_o = (so2 - so * so / cnt) / (cnt - 1.0);
            const double v_c = (sc2 - sc * sc / cnt) / (cnt - 1.0);
            const double v_rs = srs / cnt;
            const double kk = 0.34 / (1.34 + (cnt + 1.0) / (cnt - 1.0));
            f.long_run_rv = std::max(v_o + kk * v_c + (1.0 - kk) * v_rs, kVarianceFloor);
        }
    }
    return out;
}

void attach_global_rv(std::map<std::string, std::vector<VarianceFeatures>>& panel) {
    // group by date across the (possibly unbalanced) panel
    std::map<Date, std::vector<VarianceFeatures*>> by_date;
    for (auto& [_, series] : panel)
        for (auto& f : series) by_date[f.date].push_back(&f);
    for (auto& [date, entries] : by_date) {
        double ratio_sum = 0.0;
        for (const auto* f : entries) ratio_sum += f->exp_rv[1] / f->long_run_rv;
        const double mean_ratio = ratio_sum / static_cast<double>(entries.size());
        for (auto* f : entries) f->global_rv = mean_ratio * f->long_run_rv;
    }
}

std::vector<HexpObservation> hexp_training_rows(
    std::span<const VarianceFeatures> features,
    std::span<const LogDayComponents> components, int horizon_days) {
    if (horizon_days != 1 && horizon_days != 20)
        throw ConfigError("hexp horizon must be 1 or 20");
    if (features.size() != components.size())
        throw DataError("hexp_training_rows: feature/component length mismatch");
    std::vector<HexpObservation> rows;
    const std::size_t h = static_cast<std::size_t>(horizon_days);
    if (features.size() <= h) return rows;
    for (std::size_t t = 0; t + h < features.size(); ++t) {
        const VarianceFeatures& f = features[t];
        HexpObservation obs;
        for (std::size_t k = 0; k < 4; ++k) obs.regressors[k] = f.exp_rv[k] - f.long_run_rv;
        obs.regressors[4] = f.global_rv - f.long_run_rv;
        double realized;
        if (horizon_days == 1) {
            realized = garman_klass_var(components[t + 1]);
        } else {
            realized = yang_zhang_var(components.subspan(t + 1, h));
        }
        obs.target = realized - f.long_run_rv;
        rows.push_back(obs);
    }
    return rows;
}

HexpModel fit_hexp(std::span<const HexpObservation> panel, int horizon_days,
                   Date fit_date, std::size_t min_rows) {
    if (horizon_days != 1 && horizon_days != 20)
        throw ConfigError("hexp horizon must be 1 or 20");
    if (panel.size() < min_rows)
        throw DataError("fit_hexp: stacked sample has " + std::to_string(panel.size()) +
                        " rows, need >= " + std::to_string(min_rows));

    const auto n = static_cast<Eigen::Index>(panel.size());
    Eigen::MatrixXd x(n, 5);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (int k = 0; k < 5; ++k) x(i, k) = panel[i].regressors[k];
        y(i) = panel[i].target;
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    qr.setThreshold(1e-10);
    if (qr.rank() < 5) {
        static const char* names[5] = {"ExpRV1", "ExpRV5", "ExpRV25", "ExpRV125",
                                       "GlobalRV"};
        const auto perm = qr.colsPermutation().indices();
        std::string cols;
        for (Eigen::Index k = qr.rank(); k < 5; ++k) {
            if (!cols.empty()) cols += ", ";
            cols += names[perm[k]];
        }
        throw DataError("fit_hexp: rank-deficient design, collinear columns: " + cols);
    }
    Eigen::VectorXd kappa = qr.solve(y);

    HexpModel m;
    m.horizon_days = horizon_days;
    for (int k = 0; k < 5; ++k) m.kappa[k] = kappa(k);
    m.fit_date = fit_date;
    m.n_obs = panel.size();
    const Eigen::VectorXd resid = y - x * kappa;
    m.residual_variance =
        n > 5 ? resid.squaredNorm() / static_cast<double>(n - 5) : 0.0;
    return m;
}

double forecast_variance(const HexpModel& model, const VarianceFeatures& features) {
    double v = features.long_run_rv;
    for (std::size_t k = 0; k < 4; ++k)
        v += model.kappa[k] * (features.exp_rv[k] - features.long_run_rv);
    v += model.kappa[4] * (features.global_rv - features.long_run_rv);
    return std::max(v, kVarianceFloor);
}

std::string hexp_model_json(const HexpModel& model) {
    std::ostringstream os;
    os.precision(17);
    os << "{\"horizon\":" << model.horizon_days << ",\"kappa\":[";
    for (int k = 0; k < 5; ++k) os << (k ? "," : "") << model.kappa[k];
    os << "],\"fit_date\":\"" << model.fit_date.iso() << "\",\"n_obs\":" << model.n_obs
       << "}";
    return os.str();
}

}  // namespace m6
