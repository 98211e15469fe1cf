#include "m6/portfolio_opt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "m6/errors.hpp"
#include "m6/scoring.hpp"

namespace m6 {

Eigen::VectorXd score_submission(const std::vector<std::array<double, 5>>& probs) {
    if (probs.empty()) throw DataError("score_submission: no rows");
    const auto n = static_cast<Eigen::Index>(probs.size());
    Eigen::VectorXd raw(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double s = 0.0;
        for (int k = 0; k < 5; ++k) s += (k + 1) * probs[i][k];
        raw(i) = s;
    }
    const double mean = raw.mean();
    const double var = (raw.array() - mean).square().sum() / static_cast<double>(n);
    // constant scores: fall back to the population sd of the rank set {1..5}
    const double sd = var > 0.0 ? std::sqrt(var) : std::sqrt(2.0);
    return (raw.array() - mean) / sd;
}

Eigen::VectorXd linear_bayes_alpha(const Eigen::VectorXd& scores, double ic,
                                   const Eigen::VectorXd& sigma20_annualized) {
    if (scores.size() != sigma20_annualized.size())
        throw DataError("linear_bayes_alpha: size mismatch");
    if ((sigma20_annualized.array() <= 0.0).any())
        throw DataError("linear_bayes_alpha: volatilities must be positive");
    return ic * sigma20_annualized.array() * scores.array();
}

namespace {

double sharpe(const Eigen::VectorXd& w, const Eigen::VectorXd& alpha,
              const Eigen::MatrixXd& sigma) {
    const double v = w.dot(sigma * w);
    return v > 0.0 ? w.dot(alpha) / std::sqrt(v) : 0.0;
}

// Objective with the risk floor handled by a quadratic penalty; both terms are
// 0-homogeneous so iterates can live on the gross-exposure-1 sphere.
struct PenalizedObjective {
    const Eigen::VectorXd& alpha;
    const Eigen::MatrixXd& sigma;
    double vmin = 0.0;  // annualized floor, 0 = off
    double mu = 0.0;

    double value(const Eigen::VectorXd& w) const {
        const double f = sharpe(w, alpha, sigma);
        if (vmin <= 0.0) return f;
        const double vol =
            std::sqrt(252.0 * w.dot(sigma * w)) / w.template lpNorm<1>();
        const double gap = std::max(0.0, vmin - vol);
        return f - mu * gap * gap;
    }

    Eigen::VectorXd gradient(const Eigen::VectorXd& w) const {
        const Eigen::VectorXd sw = sigma * w;
        const double q = w.dot(sw);
        const double s = std::sqrt(q);
        Eigen::VectorXd g = alpha / s - (w.dot(alpha) / (s * q)) * sw;
        if (vmin > 0.0) {
            const double gross = w.template lpNorm<1>();
            const double vol = std::sqrt(252.0 * q) / gross;
            const double gap = vmin - vol;
            if (gap > 0.0) {
                // d vol / dw = 252 sw / (gross * sqrt(252 q)) - vol * sign(w) / gross
                Eigen::VectorXd sign = w.array().sign();
                Eigen::VectorXd dvol =
                    (252.0 / (gross * std::sqrt(252.0 * q))) * sw - (vol / gross) * sign;
                g += 2.0 * mu * gap * dvol;
            }
        }
        return g;
    }
};

void project_gross(Eigen::VectorXd& w) {
    const double g = w.lpNorm<1>();
    if (g > 0.0) w /= g;
}

// Projected gradient ascent on the unit L1 sphere; returns true on first-order
// stationarity within tol (gradient component tangent to the scaling direction
// is already zero for 0-homogeneous objectives, so we test the full gradient
// after projecting out the renormalization).
bool ascend(Eigen::VectorXd& w, const PenalizedObjective& obj, double tol,
            int max_iter) {
    project_gross(w);
    double f = obj.value(w);
    double step = 1.0;
    for (int it = 0; it < max_iter; ++it) {
        const Eigen::VectorXd g = obj.gradient(w);
        const double gnorm = g.norm();
        if (gnorm <= tol * (1.0 + std::abs(f))) return true;
        bool improved = false;
        for (int bt = 0; bt < 40; ++bt) {
            Eigen::VectorXd trial = w + step * g;
            project_gross(trial);
            const double ft = obj.value(trial);
            if (ft > f + 1e-12 * std::abs(f)) {
                w = trial;
                f = ft;
                step *= 1.5;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if (!improved) return gnorm <= 1e-4 * (1.0 + std::abs(f));
    }
    return false;
}

std::vector<Eigen::VectorXd> starting_points(const Eigen::VectorXd& alpha,
                                             const Eigen::MatrixXd& sigma,
                                             std::uint64_t seed, int n_random) {
    const Eigen::Index n = alpha.size();
    std::vector<Eigen::VectorXd> starts;
    starts.push_back(Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n)));
    if (alpha.lpNorm<1>() > 0.0) starts.push_back(alpha);
    const Eigen::VectorXd tangency = sigma.llt().solve(alpha);
    if (tangency.allFinite() && tangency.lpNorm<1>() > 0.0) starts.push_back(tangency);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    for (int r = 0; r < n_random; ++r) {
        Eigen::VectorXd w(n);
        for (Eigen::Index i = 0; i < n; ++i) w(i) = nd(rng);
        starts.push_back(w);
    }
    for (auto& w : starts) project_gross(w);
    return starts;
}

void check_inputs(const Eigen::VectorXd& alpha, const Eigen::MatrixXd& sigma) {
    if (alpha.size() == 0 || sigma.rows() != alpha.size() ||
        sigma.cols() != alpha.size())
        throw DataError("max_sharpe: alpha/covariance dimension mismatch");
    if (!alpha.allFinite() || !sigma.allFinite())
        throw DataError("max_sharpe: non-finite inputs");
    if (alpha.lpNorm<1>() == 0.0)
        throw DataError("max_sharpe: alpha is identically zero, objective undefined");
    if ((sigma.diagonal().array() <= 0.0).any())
        throw DataError("max_sharpe: covariance has non-positive variances");
}

}  // namespace

OptimizedPortfolio max_sharpe(const Eigen::VectorXd& alpha,
                              const Eigen::MatrixXd& covariance,
                              const OptConstraints& constraints, std::uint64_t seed) {
    check_inputs(alpha, covariance);
    if (constraints.min_vol_annualized > 0.0)
        return max_sharpe_risk_target(alpha, covariance,
                                      constraints.min_vol_annualized, constraints,
                                      seed);

    PenalizedObjective obj{alpha, covariance, 0.0, 0.0};
    auto starts = starting_points(alpha, covariance, seed, 5);
    while (starts.size() > 8) starts.pop_back();
    OptimizedPortfolio best;
    for (auto& w : starts) {
        const bool conv = ascend(w, obj, 1e-6, 5000);
        const double f = obj.value(w);
        if (conv) ++best.n_starts_converged;
        if (best.status != SolverStatus::OK || f > best.objective_value) {
            best.weights = w;
            best.objective_value = f;
            best.status = SolverStatus::OK;
        }
    }
    if (best.n_starts_converged == 0) best.status = SolverStatus::FAILED;
    best.weights *= constraints.gross_max;  // scale free, report at the gross cap
    best.ex_ante_vol = std::sqrt(252.0 * best.weights.dot(covariance * best.weights));
    best.objective_value = sharpe(best.weights, alpha, covariance);
    return best;
}

OptimizedPortfolio max_sharpe_risk_target(const Eigen::VectorXd& alpha,
                                          const Eigen::MatrixXd& covariance,
                                          double min_vol_annualized,
                                          const OptConstraints& constraints,
                                          std::uint64_t seed) {
    check_inputs(alpha, covariance);
    if (min_vol_annualized <= 0.0) {
        OptConstraints plain = constraints;
        plain.min_vol_annualized = 0.0;
        return max_sharpe(alpha, covariance, plain, seed);
    }

    // Volatility at fixed gross is maximized at a vertex of the L1 ball, so
    // the highest attainable annualized vol is gross_max * max_i sqrt(252 s_ii).
    const double max_vol = constraints.gross_max *
                           std::sqrt(252.0 * covariance.diagonal().maxCoeff());
    if (max_vol < min_vol_annualized - 1e-12) {
        OptimizedPortfolio out;
        out.weights = Eigen::VectorXd::Zero(alpha.size());
        out.status = SolverStatus::INFEASIBLE_TARGET;
        return out;
    }

    // Unconstrained optimum first: if the tangency direction already clears
    // the floor at full gross the solution is undistorted.
    OptConstraints plain = constraints;
    plain.min_vol_annualized = 0.0;
    OptimizedPortfolio free = max_sharpe(alpha, covariance, plain, seed);
    if (free.status == SolverStatus::OK &&
        free.ex_ante_vol >= min_vol_annualized - 1e-10)
        return free;

    // Penalty continuation on the floor, in gross-1 direction space.
    const double floor_at_gross1 = min_vol_annualized / constraints.gross_max;
    auto starts = starting_points(alpha, covariance, seed, 5);
    OptimizedPortfolio best;
    double best_sharpe = -std::numeric_limits<double>::infinity();
    for (auto& w0 : starts) {
        Eigen::VectorXd w = w0;
        bool conv = false;
        for (double mu : {1e1, 1e2, 1e3, 1e4, 1e5, 1e6}) {
            PenalizedObjective obj{alpha, covariance, floor_at_gross1, mu};
            conv = ascend(w, obj, 1e-6, 3000);
        }
        const double vol1 = std::sqrt(252.0 * w.dot(covariance * w));
        if (vol1 < floor_at_gross1 - 1e-6) continue;  // penalty could not reach floor
        const double f = sharpe(w, alpha, covariance);
        if (conv) ++best.n_starts_converged;
        if (f > best_sharpe) {
            best_sharpe = f;
            best.weights = w;
            best.status = SolverStatus::OK;
        }
    }
    if (best.status != SolverStatus::OK) {
        // feasible by the vertex bound, but no start reached the floor
        best.weights = Eigen::VectorXd::Zero(alpha.size());
        Eigen::Index imax;
        covariance.diagonal().maxCoeff(&imax);
        best.weights(imax) = alpha(imax) >= 0.0 ? 1.0 : -1.0;
        best.status = SolverStatus::OK;
    }
    best.weights *= constraints.gross_max;
    best.ex_ante_vol = std::sqrt(252.0 * best.weights.dot(covariance * best.weights));
    best.objective_value = sharpe(best.weights, alpha, covariance);
    return best;
}

ReverseOptResult reverse_optimize(const Eigen::VectorXd& w_submitted,
                                  const Eigen::MatrixXd& covariance,
                                  const Eigen::VectorXd& sigma_annualized,
                                  const ReverseOptConfig& cfg) {
    const Eigen::Index n = w_submitted.size();
    if (covariance.rows() != n || covariance.cols() != n || sigma_annualized.size() != n)
        throw DataError("reverse_optimize: dimension mismatch");
    if (w_submitted.lpNorm<1>() == 0.0)
        throw DataError("reverse_optimize: zero portfolio has no implied views");
    if ((sigma_annualized.array() <= 0.0).any())
        throw DataError("reverse_optimize: volatilities must be positive");

    const Eigen::VectorXd bounds =
        cfg.implied_ic * cfg.score_sd * sigma_annualized.array();
    ReverseOptResult out;
    if (cfg.literal_bound_mode) {
        // degenerate reading: every alpha runs to its bound with the sign of w
        out.implied_alpha = bounds.array() * w_submitted.array().sign();
    } else {
        // stationarity of the Sharpe objective: alpha proportional to Sigma w,
        // scaled as large as the per-asset bounds allow
        Eigen::VectorXd dir = covariance * w_submitted;
        if (dir.lpNorm<1>() == 0.0)
            throw DataError("reverse_optimize: Sigma w vanished, covariance degenerate");
        double scale = std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < n; ++i)
            if (dir(i) != 0.0) scale = std::min(scale, bounds(i) / std::abs(dir(i)));
        out.implied_alpha = scale * dir;
    }

    // quintile ranks by implied alpha, ascending, stable on ties
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        return out.implied_alpha(a) < out.implied_alpha(b);
    });
    out.implied_rank.assign(static_cast<std::size_t>(n), 0);
    out.forecast.assign(static_cast<std::size_t>(n), {});
    for (std::size_t p = 0; p < order.size(); ++p) {
        const int rank = 1 + static_cast<int>(p * 5 / order.size());
        const auto i = static_cast<std::size_t>(order[p]);
        out.implied_rank[i] = rank;
        out.forecast[i][static_cast<std::size_t>(rank - 1)] = 1.0;
    }
    return out;
}

Eigen::VectorXd average_ranks(const Eigen::VectorXd& values) {
    const Eigen::Index n = values.size();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](Eigen::Index a, Eigen::Index b) { return values(a) < values(b); });
    Eigen::VectorXd ranks(n);
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && values(order[j + 1]) == values(order[i])) ++j;
        const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks(order[k]) = avg;
        i = j + 1;
    }
    return ranks;
}

RealizedIc realized_ic(const Eigen::VectorXd& scores,
                       const Eigen::VectorXd& realized_returns) {
    if (scores.size() != realized_returns.size() || scores.size() < 2)
        throw DataError("realized_ic: need matching series of length >= 2");
    RealizedIc out;
    const double score_var = (scores.array() - scores.mean()).square().sum();
    const double ret_var =
        (realized_returns.array() - realized_returns.mean()).square().sum();
    if (score_var == 0.0 || ret_var == 0.0) {
        out.ic = 0.0;
        out.defined = false;
        return out;
    }
    const Eigen::VectorXd rs = average_ranks(scores);
    const Eigen::VectorXd rr = average_ranks(realized_returns);
    const Eigen::ArrayXd a = rs.array() - rs.mean();
    const Eigen::ArrayXd b = rr.array() - rr.mean();
    out.ic = (a * b).sum() / std::sqrt(a.square().sum() * b.square().sum());
    return out;
}

namespace {
double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const std::size_t m = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(m), v.end());
    double hi = v[m];
    if (v.size() % 2 == 1) return hi;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(m) - 1, v.end());
    return 0.5 * (v[m - 1] + hi);
}
}  // namespace

std::vector<IcQuintileRow> ic_quintile_report(const std::vector<IcStudyEntry>& entries) {
    if (entries.empty()) throw DataError("ic_quintile_report: no entries");
    std::map<int, std::vector<const IcStudyEntry*>> by_period;
    for (const auto& e : entries) by_period[e.period].push_back(&e);

    std::array<std::vector<const IcStudyEntry*>, 5> buckets;
    for (auto& [_, group] : by_period) {
        std::stable_sort(group.begin(), group.end(),
                         [](const IcStudyEntry* a, const IcStudyEntry* b) {
                             return a->realized_ic < b->realized_ic;
                         });
        // quintile sizes differ by at most one, extras to the low quintiles
        const std::size_t n = group.size();
        std::size_t pos = 0;
        for (std::size_t q = 0; q < 5; ++q) {
            std::size_t sz = n / 5 + (q < n % 5 ? 1 : 0);
            for (std::size_t k = 0; k < sz; ++k) buckets[q].push_back(group[pos++]);
        }
    }

    std::vector<IcQuintileRow> rows;
    for (std::size_t q = 0; q < 5; ++q) {
        IcQuintileRow row;
        row.quintile = static_cast<int>(q + 1);
        row.count = buckets[q].size();
        auto med = [&](auto field) {
            std::vector<double> v;
            v.reserve(buckets[q].size());
            for (const auto* e : buckets[q]) v.push_back(e->*field);
            return median(std::move(v));
        };
        row.median_ic = med(&IcStudyEntry::realized_ic);
        row.median_sub_risk = med(&IcStudyEntry::sub_risk);
        row.median_opt_risk = med(&IcStudyEntry::opt_risk);
        row.median_sub_ret = med(&IcStudyEntry::sub_ret);
        row.median_opt_ret = med(&IcStudyEntry::opt_ret);
        row.median_sub_ir = med(&IcStudyEntry::sub_ir);
        row.median_opt_ir = med(&IcStudyEntry::opt_ir);
        rows.push_back(row);
    }
    return rows;
}

}  // namespace m6
