#include "m6/factor_risk.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "m6/errors.hpp"

namespace m6 {

void BekkParams::check() const {
    if (omega < 0.0 || gamma < 0.0 || omega + gamma > 1.0)
        throw ConfigError("BEKK weights need omega,gamma >= 0 and omega+gamma <= 1");
}

ScalarBekk ScalarBekk::start(double sigma0, BekkParams p) {
    p.check();
    return {sigma0, sigma0, p};  // stationary start
}

void ScalarBekk::update(double lagged_cross) {
    sigma = params.omega * sigma0 + params.gamma * lagged_cross +
            (1.0 - params.omega - params.gamma) * sigma;
}

MatrixBekk MatrixBekk::start(Eigen::MatrixXd sigma0, BekkParams p) {
    p.check();
    MatrixBekk b;
    b.sigma0 = sigma0;
    b.sigma = std::move(sigma0);
    b.params = p;
    return b;
}

void MatrixBekk::update(const Eigen::VectorXd& lagged_error) {
    sigma = params.omega * sigma0 +
            params.gamma * (lagged_error * lagged_error.transpose()) +
            (1.0 - params.omega - params.gamma) * sigma;
    sigma = ((sigma + sigma.transpose()) / 2.0).eval();
}

Eigen::MatrixXd standardize_returns(const Eigen::MatrixXd& returns,
                                    const Eigen::MatrixXd& one_day_vols) {
    if (returns.rows() != one_day_vols.rows() || returns.cols() != one_day_vols.cols())
        throw DataError("standardize_returns: shape mismatch");
    if ((one_day_vols.array() <= 0.0).any())
        throw DataError("standardize_returns: nonpositive volatility (floor upstream)");
    return returns.array() / one_day_vols.array();
}

Eigen::MatrixXd build_factor_returns(const Eigen::MatrixXd& std_returns,
                                     const std::vector<std::string>& assets,
                                     const std::vector<FactorSpec>& specs) {
    const auto t = std_returns.rows();
    Eigen::MatrixXd f = Eigen::MatrixXd::Zero(t, static_cast<Eigen::Index>(specs.size()));
    std::map<std::string, Eigen::Index> index;
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(assets.size()); ++i)
        index[assets[i]] = i;
    for (std::size_t k = 0; k < specs.size(); ++k) {
        for (const auto& [ticker, w] : specs[k].weights) {
            auto it = index.find(ticker);
            if (it == index.end()) continue;  // spec may name assets outside the panel
            f.col(static_cast<Eigen::Index>(k)) += w * std_returns.col(it->second);
        }
        // re-standardize the factor series
        auto col = f.col(static_cast<Eigen::Index>(k));
        const double mean = col.mean();
        const double sd = std::sqrt((col.array() - mean).square().sum() /
                                    static_cast<double>(t - 1));
        if (!(sd > 0.0))
            throw DataError("degenerate factor (zero variance): " + specs[k].name);
        col = (col.array() - mean) / sd;
    }
    return f;
}

LayerFit fit_layer(const Eigen::MatrixXd& z_panel, const Eigen::MatrixXd& factors,
                   const BekkParams& params) {
    params.check();
    const Eigen::Index t = z_panel.rows();
    const Eigen::Index n = z_panel.cols();
    const Eigen::Index k = factors.cols();
    if (factors.rows() != t) throw DataError("fit_layer: panel/factor length mismatch");
    if (t < 3) throw DataError("fit_layer: need at least 3 observations");
    for (Eigen::Index j = 0; j < k; ++j) {
        const double var = (factors.col(j).array() - factors.col(j).mean()).square().sum();
        if (!(var > 0.0)) throw DataError("fit_layer: degenerate factor column");
    }

    // Long-run loadings: OLS of each asset on the factors plus a constant.
    Eigen::MatrixXd design(t, k + 1);
    design.col(0).setOnes();
    design.rightCols(k) = factors;
    Eigen::MatrixXd coef =
        design.colPivHouseholderQr().solve(z_panel);  // (k+1) x n
    Eigen::MatrixXd b_longrun = coef.bottomRows(k).transpose();  // n x k

    // Long-run covariance targets implied by the OLS fit.
    Eigen::MatrixXd f_cov = (factors.transpose() * factors) / static_cast<double>(t);
    Eigen::MatrixXd c0 = b_longrun * f_cov;  // n x k asset-factor covariances

    // Factor covariance recursion for the within-layer loading solve;
    // identity shrinkage target.
    MatrixBekk vf = MatrixBekk::start(Eigen::MatrixXd::Identity(k, k), params);
    Eigen::MatrixXd c = c0;  // n x k running covariances
    const double keep = 1.0 - params.omega - params.gamma;

    LayerFit out;
    out.loadings_longrun = b_longrun;
    out.residuals.resize(t, n);
    for (Eigen::Index s = 0; s < t; ++s) {
        if (s > 0) {
            vf.update(factors.row(s - 1).transpose());
            c = params.omega * c0 +
                params.gamma * (z_panel.row(s - 1).transpose() * factors.row(s - 1)) +
                keep * c;
        }
        Eigen::LLT<Eigen::MatrixXd> llt(vf.sigma);
        Eigen::MatrixXd b = llt.solve(c.transpose()).transpose();  // n x k
        out.residuals.row(s) = z_panel.row(s) - (b * factors.row(s).transpose()).transpose();
    }
    // Post-sample snapshot: loadings applying to the day after the sample.
    vf.update(factors.row(t - 1).transpose());
    c = params.omega * c0 +
        params.gamma * (z_panel.row(t - 1).transpose() * factors.row(t - 1)) + keep * c;
    out.loadings = Eigen::LLT<Eigen::MatrixXd>(vf.sigma).solve(c.transpose()).transpose();

    // Re-standardize residuals to mean 0, sd 1 per asset.
    out.resid_scale.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        auto col = out.residuals.col(i);
        const double mean = col.mean();
        double sd = std::sqrt((col.array() - mean).square().sum() /
                              static_cast<double>(t - 1));
        if (!(sd > 0.0)) sd = 1.0;  // asset fully explained by the factors
        out.resid_scale(i) = sd;
        col = (col.array() - mean) / sd;
    }
    return out;
}

FactorRiskModel assemble_covariance(const Eigen::MatrixXd& std_returns,
                                    const std::vector<std::string>& assets,
                                    const std::vector<FactorSpec>& specs,
                                    const BekkParams& params,
                                    const Eigen::VectorXd& vol_scale, Date date) {
    params.check();
    const Eigen::Index t = std_returns.rows();
    const Eigen::Index n = std_returns.cols();
    if (static_cast<Eigen::Index>(assets.size()) != n)
        throw DataError("assemble_covariance: asset list / panel mismatch");
    if (vol_scale.size() != n) throw DataError("assemble_covariance: vol_scale size");
    if (!std_returns.allFinite()) throw DataError("assemble_covariance: non-finite returns");

    std::vector<FactorSpec> by_level[3];
    for (const auto& s : specs) {
        if (s.level < 1 || s.level > 3) throw ConfigError("factor level must be 1..3");
        by_level[s.level - 1].push_back(s);
    }
    if (by_level[0].empty()) throw ConfigError("no level-1 factor configured");

    FactorRiskModel model;
    model.date = date;
    model.assets = assets;
    model.vol_scale = vol_scale;

    Eigen::Index k_total = 0;
    for (const auto& lv : by_level) k_total += static_cast<Eigen::Index>(lv.size());
    model.loadings.resize(n, k_total);

    Eigen::MatrixXd all_factors(t, k_total);
    Eigen::MatrixXd panel = std_returns;
    Eigen::VectorXd chain_scale = Eigen::VectorXd::Ones(n);
    Eigen::Index col0 = 0;
    for (int lv = 0; lv < 3; ++lv) {
        if (by_level[lv].empty()) continue;
        const auto k = static_cast<Eigen::Index>(by_level[lv].size());
        // Factors are combinations of the *original* standardized returns;
        // only the left-hand side cascades through residuals.
        Eigen::MatrixXd f = build_factor_returns(std_returns, assets, by_level[lv]);
        LayerFit fit = fit_layer(panel, f, params);
        for (Eigen::Index i = 0; i < n; ++i)
            model.loadings.block(i, col0, 1, k) =
                chain_scale(i) * fit.loadings.row(i);
        all_factors.middleCols(col0, k) = f;
        for (const auto& s : by_level[lv]) model.factor_names.push_back(s.name);
        chain_scale = chain_scale.cwiseProduct(fit.resid_scale);
        panel = fit.residuals;
        col0 += k;
    }

    // Specific risk: scalar BEKK per asset on the final (unit variance)
    // residuals; the chain scale restores standardized-return units.
    model.specific_var.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        ScalarBekk s = ScalarBekk::start(1.0, params);
        for (Eigen::Index r = 0; r < t; ++r)
            s.update(panel(r, i) * panel(r, i));
        model.specific_var(i) = std::max(s.sigma, 0.0) * chain_scale(i) * chain_scale(i);
    }

    // Factor covariance: matrix BEKK over the stacked factor vector,
    // identity shrinkage target.
    MatrixBekk fc = MatrixBekk::start(Eigen::MatrixXd::Identity(k_total, k_total), params);
    for (Eigen::Index r = 0; r < t; ++r)
        fc.update(all_factors.row(r).transpose());
    model.factor_cov = fc.sigma;

    if (!model.loadings.allFinite() || !model.factor_cov.allFinite() ||
        !model.specific_var.allFinite())
        throw DataError("assemble_covariance: non-finite model entries");
    return model;
}

Eigen::MatrixXd FactorRiskModel::covariance() const {
    Eigen::MatrixXd sigma_z =
        loadings * factor_cov * loadings.transpose();
    sigma_z.diagonal() += specific_var;
    Eigen::MatrixXd sigma =
        vol_scale.asDiagonal() * sigma_z * vol_scale.asDiagonal();
    sigma = ((sigma + sigma.transpose()) / 2.0).eval();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma);
    if (es.eigenvalues().minCoeff() < -1e-10) {
        Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
        sigma = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
        sigma = ((sigma + sigma.transpose()) / 2.0).eval();
    }
    return sigma;
}

double portfolio_variance(const Eigen::VectorXd& w, const FactorRiskModel& model) {
    return w.dot(model.covariance() * w);
}

double annualized_vol(const Eigen::VectorXd& w, const FactorRiskModel& model) {
    return std::sqrt(252.0 * portfolio_variance(w, model));
}

RiskDecomposition risk_decomposition(const Eigen::VectorXd& w,
                                     const FactorRiskModel& model) {
    const Eigen::Index k = model.loadings.cols();
    // Scaled weights so the factor algebra happens in standardized units.
    Eigen::VectorXd ws = w.cwiseProduct(model.vol_scale);
    Eigen::VectorXd exposure = model.loadings.transpose() * ws;  // k

    RiskDecomposition d;
    d.m6m_var = exposure(0) * exposure(0) * model.factor_cov(0, 0);
    for (Eigen::Index j = 1; j < k; ++j)
        d.other_systematic_var += exposure(j) * exposure(j) * model.factor_cov(j, j);
    d.specific_var = ws.array().square().matrix().dot(model.specific_var);
    const double total =
        exposure.dot(model.factor_cov * exposure) + d.specific_var;
    d.covariance_effect = total - d.m6m_var - d.other_systematic_var - d.specific_var;
    d.total = total;
    return d;
}

GridSearchResult grid_search(const Eigen::MatrixXd& std_returns,
                             const std::vector<std::string>& assets,
                             const std::vector<FactorSpec>& specs,
                             const GridConfig& cfg) {
    const Eigen::Index t = std_returns.rows();
    const Eigen::Index n = std_returns.cols();
    const Eigen::Index test_len =
        static_cast<Eigen::Index>(cfg.n_windows) * cfg.window_days;
    if (t <= test_len + 10)
        throw DataError("grid_search: not enough history before the test windows");

    GridSearchResult result;
    const double log2pi = std::log(2.0 * M_PI);
    for (double omega : cfg.omegas) {
        for (double gamma : cfg.gammas) {
            GridCell cell{omega, gamma, 0.0, false};
            try {
                double ll = 0.0;
                for (int wdx = 0; wdx < cfg.n_windows; ++wdx) {
                    const Eigen::Index start = t - test_len + wdx * cfg.window_days;
                    FactorRiskModel m = assemble_covariance(
                        std_returns.topRows(start), assets, specs,
                        {omega, gamma}, Eigen::VectorXd::Ones(n), {});
                    Eigen::MatrixXd sigma =
                        m.loadings * m.factor_cov * m.loadings.transpose();
                    sigma.diagonal() += m.specific_var;
                    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
                    if (llt.info() != Eigen::Success)
                        throw DataError("non-PD covariance in grid cell");
                    double logdet = 0.0;
                    for (Eigen::Index i = 0; i < n; ++i)
                        logdet += 2.0 * std::log(llt.matrixL()(i, i));
                    for (Eigen::Index r = start; r < start + cfg.window_days; ++r) {
                        Eigen::VectorXd x = std_returns.row(r).transpose();
                        ll -= 0.5 * (static_cast<double>(n) * log2pi + logdet +
                                     x.dot(llt.solve(x)));
                    }
                }
                cell.log_lik = ll;
                cell.ok = true;
            } catch (const std::exception&) {
                cell.ok = false;  // excluded with warning at the CLI layer
            }
            result.cells.push_back(cell);
        }
    }

    const GridCell* best = nullptr;
    for (const auto& c : result.cells)
        if (c.ok && (!best || c.log_lik > best->log_lik)) best = &c;
    if (!best) throw DataError("grid_search: every cell failed to fit");
    result.omega = best->omega;
    result.gamma = best->gamma;
    return result;
}

namespace {

void add_factor(std::vector<FactorSpec>& out, std::string name, int level,
                std::map<std::string, double> weights) {
    out.push_back({std::move(name), level, std::move(weights)});
}

std::map<std::string, double> equal_weights(const std::vector<std::string>& longs,
                                            const std::vector<std::string>& shorts = {}) {
    std::map<std::string, double> w;
    for (const auto& s : longs) w[s] = 1.0 / static_cast<double>(longs.size());
    for (const auto& s : shorts) w[s] = -1.0 / static_cast<double>(shorts.size());
    return w;
}

}  // namespace

std::vector<FactorSpec> default_factor_specs() {
    static const std::vector<std::string> etfs = {
        "EWA",    "EWC",    "EWG",    "EWH",    "EWJ",    "EWL",    "EWQ",
        "EWT",    "EWU",    "EWY",    "EWZ",    "GSG",    "HIGH.L", "HYG",
        "IAU",    "ICLN",   "IEAA.L", "IEF",    "IEFM.L", "IEMG",   "IEUS",
        "IEVL.L", "IGF",    "INDA",   "IUMO.L", "IUVL.L", "IVV",    "IWM",
        "IXN",    "JPEA.L", "LQD",    "MCHI",   "MVEU.L", "REET",   "SEGA.L",
        "SHY",    "SLV",    "SPMV.L", "TLT",    "VXX",    "XLB",    "XLC",
        "XLE",    "XLF",    "XLI",    "XLK",    "XLP",    "XLU",    "XLV",
        "XLY"};

    std::vector<FactorSpec> out;
    add_factor(out, "M6M", 1, equal_weights(etfs));
    add_factor(out, "USE", 2, equal_weights({"IVV", "IWM"}));
    add_factor(out, "EUE", 2, equal_weights({"EWG", "EWQ", "EWL", "EWU", "IEUS"}));
    add_factor(out, "AE", 2,
               equal_weights({"EWJ", "EWH", "EWT", "EWY", "MCHI", "INDA", "EWA"}));
    add_factor(out, "TERM", 2, equal_weights({"TLT", "IEF"}, {"SHY"}));
    add_factor(out, "CREDIT", 2, equal_weights({"LQD", "HYG"}, {"IEF", "SHY"}));
    add_factor(out, "MOM", 2, equal_weights({"IUMO.L"}, {"IVV"}));
    add_factor(out, "VAL", 2, equal_weights({"IEVL.L", "IUVL.L"}, {"IVV"}));
    add_factor(out, "SIZ", 2, equal_weights({"IWM", "IEUS"}, {"IVV"}));
    add_factor(out, "TECH", 3, equal_weights({"XLK", "IXN"}));
    add_factor(out, "FIN", 3, equal_weights({"XLF"}));
    add_factor(out, "HEALTH", 3, equal_weights({"XLV"}));
    add_factor(out, "ENERGY", 3, equal_weights({"XLE"}));
    add_factor(out, "DISC", 3, equal_weights({"XLY"}));
    add_factor(out, "IND", 3, equal_weights({"XLI"}));
    add_factor(out, "COMMS", 3, equal_weights({"XLC"}));
    add_factor(out, "UTIL", 3, equal_weights({"XLU"}));
    add_factor(out, "STAPLES", 3, equal_weights({"XLP"}));
    add_factor(out, "MATERIAL", 3, equal_weights({"XLB"}));
    return out;
}

std::vector<FactorSpec> load_factor_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open factor config: " + path);
    std::vector<FactorSpec> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ss(line);
        FactorSpec spec;
        if (!(ss >> spec.level >> spec.name)) continue;  // blank / comment line
        if (spec.level < 1 || spec.level > 3)
            throw ParseError("factor level must be 1..3", line_no);
        std::string tok;
        while (ss >> tok) {
            auto colon = tok.rfind(':');
            if (colon == std::string::npos)
                throw ParseError("expected ticker:weight, got '" + tok + "'", line_no);
            try {
                spec.weights[tok.substr(0, colon)] = std::stod(tok.substr(colon + 1));
            } catch (const std::exception&) {
                throw ParseError("bad weight in '" + tok + "'", line_no);
            }
        }
        if (spec.weights.empty())
            throw ParseError("factor " + spec.name + " has no weights", line_no);
        out.push_back(std::move(spec));
    }
    if (out.empty()) throw ConfigError("factor config is empty: " + path);
    return out;
}

}  // namespace m6
