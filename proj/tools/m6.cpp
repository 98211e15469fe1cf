// m6: batch CLI over the competition machinery. Subcommands: validate,
// score, riskmodel fit|forecast|decompose|gridsearch, study <name>, universe.
// Exit codes: 0 success, 1 domain failure, 2 environment/I-O failure.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "m6/analysis.hpp"
#include "m6/errors.hpp"
#include "m6/factor_risk.hpp"
#include "m6/market_data.hpp"
#include "m6/portfolio_opt.hpp"
#include "m6/run_config.hpp"
#include "m6/scoring.hpp"
#include "m6/submission.hpp"
#include "m6/universe.hpp"
#include "m6/volatility.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// environment/I-O problems exit with 2; domain errors with 1
struct EnvError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw EnvError("cannot open " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == '\n'))
            line.pop_back();
        if (!line.empty() && line[0] != '#') lines.push_back(line);
    }
    return lines;
}

std::string fmt(double x) {
    std::ostringstream os;
    os.precision(12);
    os << x;
    return os.str();
}

// --- submission archive -----------------------------------------------------

// Files are named <team>_<period>.csv; the team id may itself contain
// underscores, the trailing field is the period index.
std::map<std::string, std::vector<m6::Submission>> load_archive(
    const std::string& dir) {
    if (!fs::is_directory(dir)) throw EnvError("not a directory: " + dir);
    std::map<std::string, std::vector<m6::Submission>> out;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.path().extension() == ".csv") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    long stamp = 0;
    for (const auto& f : files) {
        const std::string stem = f.stem().string();
        const auto us = stem.rfind('_');
        if (us == std::string::npos || us + 1 >= stem.size())
            throw m6::DataError("submission file not named <team>_<period>.csv: " +
                                f.filename().string());
        m6::Submission sub = m6::read_submission_csv(f.string());
        sub.team_id = stem.substr(0, us);
        sub.period_index = std::stoi(stem.substr(us + 1));
        sub.submitted_at = ++stamp;  // lexicographic file order within a period
        out[sub.team_id].push_back(std::move(sub));
    }
    for (auto& [_, history] : out)
        std::stable_sort(history.begin(), history.end(),
                         [](const m6::Submission& a, const m6::Submission& b) {
                             if (a.period_index != b.period_index)
                                 return a.period_index < b.period_index;
                             return a.submitted_at < b.submitted_at;
                         });
    return out;
}

// --- scored context ----------------------------------------------------------

struct PeriodData {
    m6::PeriodSpec spec;
    std::vector<m6::QuintileOutcome> outcomes;
    std::size_t ref_idx = 0;  // last calendar index <= submission date
    std::size_t end_idx = 0;  // last calendar index <= period end
};

struct ScoreContext {
    std::vector<std::string> universe;
    std::vector<m6::Date> calendar;
    std::map<std::string, m6::PriceHistory> prices;  // forward filled
    std::vector<PeriodData> periods;
    std::map<std::string, std::vector<m6::Submission>> archive;
};

std::size_t last_index_leq(const std::vector<m6::Date>& calendar, m6::Date d) {
    auto it = std::upper_bound(calendar.begin(), calendar.end(), d);
    if (it == calendar.begin())
        throw EnvError("no price data on or before " + d.iso());
    return static_cast<std::size_t>(it - calendar.begin()) - 1;
}

std::map<std::string, double> prices_at(const ScoreContext& ctx, std::size_t idx) {
    std::map<std::string, double> out;
    for (const auto& [asset, h] : ctx.prices) {
        const m6::Date d = ctx.calendar[idx];
        auto it = std::lower_bound(h.calendar.begin(), h.calendar.end(), d);
        if (it != h.calendar.end() && *it == d)
            out[asset] = h.rows[static_cast<std::size_t>(it - h.calendar.begin())]
                             .adjusted_close;
    }
    return out;
}

ScoreContext build_score_context(const m6::RunConfig& cfg) {
    ScoreContext ctx;
    if (cfg.universe_path.empty()) throw EnvError("config is missing 'universe'");
    if (cfg.prices_path.empty()) throw EnvError("config is missing 'prices'");
    ctx.universe = read_lines(cfg.universe_path);
    auto loaded = m6::load_prices(cfg.prices_path, ctx.universe);
    if (!loaded.missing_tickers.empty()) {
        std::string who;
        for (const auto& t : loaded.missing_tickers) who += " " + t;
        throw EnvError("price file missing tickers:" + who);
    }
    ctx.calendar = m6::union_calendar(loaded.histories);
    for (const auto& [asset, h] : loaded.histories)
        ctx.prices[asset] = m6::forward_fill(h, ctx.calendar);

    for (const auto& spec : cfg.periods) {
        PeriodData pd;
        pd.spec = spec;
        pd.ref_idx = last_index_leq(ctx.calendar, spec.submission);
        pd.end_idx = last_index_leq(ctx.calendar, spec.end());
        if (pd.end_idx <= pd.ref_idx)
            throw EnvError("no trading days in period " + std::to_string(spec.index) +
                           " (" + spec.start().iso() + " .. " + spec.end().iso() + ")");
        const auto p0 = prices_at(ctx, pd.ref_idx);
        const auto p1 = prices_at(ctx, pd.end_idx);
        std::map<std::string, double> rets;
        for (const auto& asset : ctx.universe) {
            auto a = p0.find(asset), b = p1.find(asset);
            if (a == p0.end() || b == p1.end())
                throw EnvError("price coverage gap for " + asset + " in period " +
                               std::to_string(spec.index));
            rets[asset] = b->second / a->second - 1.0;
        }
        pd.outcomes = m6::quintile_outcomes(rets, ctx.universe.size() != 100);
        ctx.periods.push_back(std::move(pd));
    }
    if (!cfg.submissions_dir.empty()) ctx.archive = load_archive(cfg.submissions_dir);
    return ctx;
}

// daily log returns of one weight vector across one period
std::vector<double> period_daily_returns(const ScoreContext& ctx,
                                         const std::map<std::string, double>& weights,
                                         const PeriodData& pd) {
    std::vector<double> rets;
    for (std::size_t t = pd.ref_idx + 1; t <= pd.end_idx; ++t)
        rets.push_back(m6::portfolio_daily_return(weights, prices_at(ctx, t - 1),
                                                  prices_at(ctx, t))
                           .log);
    return rets;
}

std::map<std::string, double> weight_map(const m6::Submission& sub) {
    std::map<std::string, double> w;
    for (const auto& r : sub.rows) w[r.asset_id] = r.weight;
    return w;
}

// effective submission per evaluated period; empty optional = not eligible
std::vector<std::optional<m6::Submission>> effective_series(
    const ScoreContext& ctx, const std::vector<m6::Submission>& history) {
    std::vector<std::optional<m6::Submission>> out;
    for (const auto& pd : ctx.periods)
        out.push_back(
            m6::effective_submission(history, ctx.universe, pd.spec.index));
    return out;
}

struct TeamScores {
    std::string team_id;
    std::vector<double> period_rps;   // one per evaluated period
    std::vector<double> daily_rets;   // concatenated log returns
    std::vector<m6::IrStats> period_ir;
    bool complete = true;  // effective submission available in every period
};

TeamScores score_team(const ScoreContext& ctx,
                      const std::vector<m6::Submission>& history,
                      const std::string& team_id) {
    TeamScores ts;
    ts.team_id = team_id;
    const auto effs = effective_series(ctx, history);
    for (std::size_t p = 0; p < ctx.periods.size(); ++p) {
        if (!effs[p]) {
            ts.complete = false;
            ts.period_rps.push_back(0.0);
            ts.period_ir.push_back({});
            continue;
        }
        ts.period_rps.push_back(m6::rps_period(*effs[p], ctx.periods[p].outcomes));
        const auto rets = period_daily_returns(ctx, weight_map(*effs[p]), ctx.periods[p]);
        ts.period_ir.push_back(m6::information_ratio(rets));
        ts.daily_rets.insert(ts.daily_rets.end(), rets.begin(), rets.end());
    }
    return ts;
}

std::string leaderboard_csv(const std::vector<m6::RankedRow>& rows) {
    std::ostringstream os;
    os << "team,rps,ir,rank_rps,rank_ir,overall_rank\n";
    for (const auto& r : rows)
        os << r.team_id << ',' << fmt(r.rps) << ','
           << (r.ir_defined ? fmt(r.ir) : "NA") << ',' << fmt(r.rank_rps) << ','
           << fmt(r.rank_ir) << ',' << fmt(r.overall_rank) << '\n';
    return os.str();
}

// --- risk model state --------------------------------------------------------

struct RiskState {
    m6::FactorRiskModel model;
    m6::HexpModel hexp1, hexp20;
    std::map<std::string, m6::VarianceFeatures> latest;  // per asset
};

json matrix_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
    const auto r = j.size();
    const auto c = r ? j[0].size() : 0;
    Eigen::MatrixXd m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t k = 0; k < c; ++k)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
                j[i][k].get<double>();
    return m;
}

json hexp_json(const m6::HexpModel& h) {
    return json{{"horizon", h.horizon_days},
                {"kappa", h.kappa},
                {"fit_date", h.fit_date.iso()},
                {"n_obs", h.n_obs},
                {"residual_variance", h.residual_variance}};
}

m6::HexpModel hexp_from_json(const json& j) {
    m6::HexpModel h;
    h.horizon_days = j.at("horizon").get<int>();
    const auto k = j.at("kappa");
    for (int i = 0; i < 5; ++i) h.kappa[static_cast<std::size_t>(i)] = k[static_cast<std::size_t>(i)].get<double>();
    h.fit_date = m6::Date::parse(j.at("fit_date").get<std::string>());
    h.n_obs = j.at("n_obs").get<std::size_t>();
    h.residual_variance = j.at("residual_variance").get<double>();
    return h;
}

std::string risk_state_json(const RiskState& st) {
    json j;
    j["date"] = st.model.date.iso();
    j["assets"] = st.model.assets;
    j["factor_names"] = st.model.factor_names;
    j["loadings"] = matrix_json(st.model.loadings);
    j["factor_cov"] = matrix_json(st.model.factor_cov);
    j["specific_var"] = std::vector<double>(
        st.model.specific_var.data(),
        st.model.specific_var.data() + st.model.specific_var.size());
    j["vol_scale"] = std::vector<double>(
        st.model.vol_scale.data(), st.model.vol_scale.data() + st.model.vol_scale.size());
    j["hexp1"] = hexp_json(st.hexp1);
    j["hexp20"] = hexp_json(st.hexp20);
    json feats = json::object();
    for (const auto& [asset, f] : st.latest)
        feats[asset] = json{{"exp_rv", f.exp_rv},
                            {"global_rv", f.global_rv},
                            {"long_run_rv", f.long_run_rv},
                            {"date", f.date.iso()}};
    j["latest_features"] = std::move(feats);
    return j.dump(2) + "\n";
}

RiskState load_risk_state(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw m6::DataError("no fitted risk model at " + path +
                                 " (run `m6 riskmodel fit` first)");
    json j = json::parse(in);
    RiskState st;
    st.model.date = m6::Date::parse(j.at("date").get<std::string>());
    st.model.assets = j.at("assets").get<std::vector<std::string>>();
    st.model.factor_names = j.at("factor_names").get<std::vector<std::string>>();
    st.model.loadings = matrix_from_json(j.at("loadings"));
    st.model.factor_cov = matrix_from_json(j.at("factor_cov"));
    const auto sv = j.at("specific_var").get<std::vector<double>>();
    const auto vs = j.at("vol_scale").get<std::vector<double>>();
    st.model.specific_var =
        Eigen::Map<const Eigen::VectorXd>(sv.data(), static_cast<Eigen::Index>(sv.size()));
    st.model.vol_scale =
        Eigen::Map<const Eigen::VectorXd>(vs.data(), static_cast<Eigen::Index>(vs.size()));
    st.hexp1 = hexp_from_json(j.at("hexp1"));
    st.hexp20 = hexp_from_json(j.at("hexp20"));
    for (const auto& [asset, f] : j.at("latest_features").items()) {
        m6::VarianceFeatures vf;
        vf.asset_id = asset;
        const auto e = f.at("exp_rv");
        for (std::size_t k = 0; k < 4; ++k) vf.exp_rv[k] = e[k].get<double>();
        vf.global_rv = f.at("global_rv").get<double>();
        vf.long_run_rv = f.at("long_run_rv").get<double>();
        vf.date = m6::Date::parse(f.at("date").get<std::string>());
        st.latest[asset] = vf;
    }
    return st;
}

// annualized 20-day vol forecast per model asset
Eigen::VectorXd sigma20(const RiskState& st) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(st.model.assets.size()));
    for (std::size_t i = 0; i < st.model.assets.size(); ++i) {
        auto it = st.latest.find(st.model.assets[i]);
        if (it == st.latest.end())
            throw m6::DataError("no features for " + st.model.assets[i]);
        out(static_cast<Eigen::Index>(i)) =
            std::sqrt(252.0 * m6::forecast_variance(st.hexp20, it->second));
    }
    return out;
}

// --- risk model fitting ------------------------------------------------------

struct FitInputs {
    ScoreContext ctx;
    std::vector<std::string> assets;   // universe order
    Eigen::MatrixXd std_returns;       // T x N
    Eigen::VectorXd vol_scale;         // current 1-day sd per asset
    RiskState state;                   // hexp + latest features filled
};

FitInputs build_fit_inputs(const m6::RunConfig& cfg) {
    FitInputs fi;
    fi.ctx = build_score_context(cfg);
    fi.assets = fi.ctx.universe;

    std::map<std::string, std::vector<m6::VarianceFeatures>> panel;
    std::map<std::string, std::vector<m6::LogDayComponents>> comps;
    m6::Date start{1900, 1, 1};
    for (const auto& asset : fi.assets) {
        const auto& h = fi.ctx.prices.at(asset);
        panel[asset] = m6::feature_series(h);
        comps[asset] = m6::log_components(h);
        start = std::max(start, h.first_valid_date());
    }
    m6::attach_global_rv(panel);

    std::vector<m6::HexpObservation> rows1, rows20;
    for (const auto& asset : fi.assets) {
        auto r1 = m6::hexp_training_rows(panel[asset], comps[asset], 1);
        auto r20 = m6::hexp_training_rows(panel[asset], comps[asset], 20);
        rows1.insert(rows1.end(), r1.begin(), r1.end());
        rows20.insert(rows20.end(), r20.begin(), r20.end());
    }
    const m6::Date fit_date = fi.ctx.calendar.back();
    fi.state.hexp1 = m6::fit_hexp(rows1, 1, fit_date);
    fi.state.hexp20 = m6::fit_hexp(rows20, 20, fit_date);
    for (const auto& asset : fi.assets) fi.state.latest[asset] = panel[asset].back();

    // balanced panel from the latest first-valid date on
    const std::size_t t0 = static_cast<std::size_t>(
        std::lower_bound(fi.ctx.calendar.begin(), fi.ctx.calendar.end(), start) -
        fi.ctx.calendar.begin());
    const std::size_t T = fi.ctx.calendar.size();
    if (T - t0 < 60) throw m6::DataError("balanced return panel too short");
    const auto n = static_cast<Eigen::Index>(fi.assets.size());
    Eigen::MatrixXd rets(static_cast<Eigen::Index>(T - t0 - 1), n);
    Eigen::MatrixXd vols(rets.rows(), n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& h = fi.ctx.prices.at(fi.assets[static_cast<std::size_t>(i)]);
        const auto& feats = panel[fi.assets[static_cast<std::size_t>(i)]];
        // history rows align with the union calendar after forward fill
        const std::size_t off = static_cast<std::size_t>(
            std::lower_bound(h.calendar.begin(), h.calendar.end(),
                             fi.ctx.calendar[t0]) -
            h.calendar.begin());
        for (Eigen::Index t = 0; t < rets.rows(); ++t) {
            const std::size_t a = off + static_cast<std::size_t>(t);
            rets(t, i) = h.rows[a + 1].adjusted_close / h.rows[a].adjusted_close - 1.0;
            // return on calendar[a+1] standardized by the forecast made the
            // day before; feature index f corresponds to calendar[f+1]
            const std::size_t fidx = a > 0 ? a - 1 : 0;
            vols(t, i) =
                std::sqrt(m6::forecast_variance(fi.state.hexp1, feats[fidx]));
        }
    }
    fi.std_returns = m6::standardize_returns(rets, vols);
    fi.vol_scale.resize(n);
    for (Eigen::Index i = 0; i < n; ++i)
        fi.vol_scale(i) = std::sqrt(m6::forecast_variance(
            fi.state.hexp1, panel[fi.assets[static_cast<std::size_t>(i)]].back()));
    return fi;
}

std::vector<m6::FactorSpec> factor_specs(const m6::RunConfig& cfg) {
    if (cfg.factor_config_path.empty()) return m6::default_factor_specs();
    return m6::load_factor_config(cfg.factor_config_path);
}

// --- study helpers -----------------------------------------------------------

Eigen::VectorXd submission_weights_vec(const m6::Submission& sub,
                                       const std::vector<std::string>& assets) {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(assets.size()));
    for (std::size_t i = 0; i < assets.size(); ++i)
        if (const auto* r = sub.find(assets[i])) w(static_cast<Eigen::Index>(i)) = r->weight;
    return w;
}

int run_validate(const std::string& file, const std::string& universe_path,
                 const std::string& out_dir) {
    if (!fs::exists(file)) throw EnvError("no such file: " + file);
    const m6::Submission sub = m6::read_submission_csv(file);
    std::vector<std::string> universe;
    if (!universe_path.empty())
        universe = read_lines(universe_path);
    else
        for (const auto& r : sub.rows) universe.push_back(r.asset_id);
    const auto report = m6::validate(sub, universe);

    json j;
    j["file"] = file;
    j["valid"] = report.valid();
    j["violations"] = json::array();
    for (const auto& v : report.violations) {
        std::cout << m6::rule_name(v.rule) << " " << v.row_id << ": " << v.detail
                  << "\n";
        j["violations"].push_back(json{{"rule", m6::rule_name(v.rule)},
                                       {"row", v.row_id},
                                       {"detail", v.detail}});
    }
    std::cout << (report.valid() ? "VALID" : "INVALID") << "\n";
    m6::Manifest manifest(out_dir);
    manifest.write_artifact("validation.json", j.dump(2) + "\n");
    manifest.finalize();
    return report.valid() ? 0 : 1;
}

int run_score(const m6::RunConfig& cfg) {
    ScoreContext ctx = build_score_context(cfg);
    if (ctx.archive.empty()) {
        std::cerr << "no submissions found in " << cfg.submissions_dir << "\n";
        return 1;
    }
    // benchmark: uniform forecast + 1/N long portfolio, one entry per period
    std::vector<m6::Submission> bench;
    {
        m6::Submission b = m6::benchmark_forecast(ctx.universe);
        const m6::Submission bp = m6::benchmark_portfolio(ctx.universe);
        for (std::size_t i = 0; i < b.rows.size(); ++i)
            b.rows[i].weight = bp.rows[i].weight;
        b.team_id = "BENCHMARK";
        b.period_index = 1;
        bench.push_back(b);
    }
    auto archive = ctx.archive;
    archive["BENCHMARK"] = bench;

    std::map<std::string, TeamScores> scores;
    for (const auto& [team, history] : archive)
        scores[team] = score_team(ctx, history, team);

    m6::Manifest manifest(cfg.out_dir);
    // per-period boards
    for (std::size_t p = 0; p < ctx.periods.size(); ++p) {
        std::vector<m6::MetricRow> rows;
        for (const auto& [team, ts] : scores) {
            if (!ts.period_ir[p].n_days) continue;
            rows.push_back({team, ts.period_rps[p], ts.period_ir[p].ir_annualized,
                            ts.period_ir[p].defined});
        }
        manifest.write_artifact(
            "leaderboard_period_" + std::to_string(ctx.periods[p].spec.index) + ".csv",
            leaderboard_csv(m6::overall_rank(rows)));
    }
    // quarters
    for (int q = 1; q <= 4; ++q) {
        std::vector<m6::MetricRow> rows;
        for (const auto& [team, ts] : scores) {
            double rps_sum = 0.0;
            std::vector<double> rets;
            int n = 0;
            bool ok = true;
            for (std::size_t p = 0; p < ctx.periods.size(); ++p) {
                if (ctx.periods[p].spec.quarter() != q) continue;
                if (!ts.period_ir[p].n_days) ok = false;
                rps_sum += ts.period_rps[p];
                ++n;
            }
            if (!ok || n == 0) continue;
            // IR over the quarter's concatenated days
            std::vector<double> qdays;
            std::size_t off = 0;
            for (std::size_t p = 0; p < ctx.periods.size(); ++p) {
                const std::size_t len = ts.period_ir[p].n_days;
                if (ctx.periods[p].spec.quarter() == q)
                    qdays.insert(qdays.end(), ts.daily_rets.begin() + static_cast<std::ptrdiff_t>(off),
                                 ts.daily_rets.begin() + static_cast<std::ptrdiff_t>(off + len));
                off += len;
            }
            const auto ir = m6::information_ratio(qdays);
            rows.push_back({team, rps_sum / n, ir.ir_annualized, ir.defined});
        }
        manifest.write_artifact("leaderboard_quarter_" + std::to_string(q) + ".csv",
                                leaderboard_csv(m6::overall_rank(rows)));
    }
    // global
    std::vector<m6::MetricRow> rows;
    for (const auto& [team, ts] : scores) {
        if (!ts.complete) continue;
        const double rps = m6::rps_overall(ts.period_rps);
        const auto ir = m6::information_ratio(ts.daily_rets);
        rows.push_back({team, rps, ir.ir_annualized, ir.defined});
    }
    manifest.write_artifact("leaderboard_global.csv",
                            leaderboard_csv(m6::overall_rank(rows)));
    manifest.finalize();
    return 0;
}

int run_riskmodel(const m6::RunConfig& cfg, const std::string& sub_cmd,
                  const std::string& portfolio_file) {
    m6::Manifest manifest(cfg.out_dir);
    const std::string state_path =
        (fs::path(cfg.out_dir) / "riskmodel_state.json").string();

    if (sub_cmd == "fit") {
        FitInputs fi = build_fit_inputs(cfg);
        m6::BekkParams params{cfg.omega, cfg.gamma};
        params.check();
        fi.state.model =
            m6::assemble_covariance(fi.std_returns, fi.assets, factor_specs(cfg),
                                    params, fi.vol_scale, fi.ctx.calendar.back());
        manifest.write_artifact("riskmodel_state.json", risk_state_json(fi.state));
        manifest.finalize();
        return 0;
    }
    if (sub_cmd == "gridsearch") {
        FitInputs fi = build_fit_inputs(cfg);
        const auto res =
            m6::grid_search(fi.std_returns, fi.assets, factor_specs(cfg));
        std::ostringstream os;
        os << "omega,gamma,log_lik,ok\n";
        for (const auto& c : res.cells)
            os << c.omega << ',' << c.gamma << ',' << fmt(c.log_lik) << ','
               << (c.ok ? 1 : 0) << '\n';
        os << "# selected omega=" << res.omega << " gamma=" << res.gamma << '\n';
        manifest.write_artifact("gridsearch.csv", os.str());
        manifest.finalize();
        std::cout << "selected omega=" << res.omega << " gamma=" << res.gamma << "\n";
        return 0;
    }

    // forecast / decompose need fitted state
    RiskState st = load_risk_state(state_path);
    if (sub_cmd == "forecast") {
        const Eigen::VectorXd s20 = sigma20(st);
        std::ostringstream os;
        os << "asset,var_1d,vol_20d_annualized\n";
        for (std::size_t i = 0; i < st.model.assets.size(); ++i) {
            const auto& f = st.latest.at(st.model.assets[i]);
            os << st.model.assets[i] << ','
               << fmt(m6::forecast_variance(st.hexp1, f)) << ','
               << fmt(s20(static_cast<Eigen::Index>(i))) << '\n';
        }
        manifest.write_artifact("volatility_forecast.csv", os.str());
        manifest.finalize();
        return 0;
    }
    if (sub_cmd == "decompose") {
        if (portfolio_file.empty())
            throw m6::ConfigError("decompose needs --portfolio <submission.csv>");
        const m6::Submission sub = m6::read_submission_csv(portfolio_file);
        const Eigen::VectorXd w = submission_weights_vec(sub, st.model.assets);
        const auto dec = m6::risk_decomposition(w, st.model);
        json j{{"m6m_var", dec.m6m_var},
               {"other_systematic_var", dec.other_systematic_var},
               {"specific_var", dec.specific_var},
               {"covariance_effect", dec.covariance_effect},
               {"total_var", dec.total},
               {"annualized_vol", std::sqrt(252.0 * dec.total)}};
        manifest.write_artifact("risk_decomposition.json", j.dump(2) + "\n");
        manifest.finalize();
        std::cout << j.dump(2) << "\n";
        return 0;
    }
    throw m6::ConfigError("unknown riskmodel subcommand: " + sub_cmd);
}

int run_universe(const m6::RunConfig& cfg) {
    if (cfg.stocks_path.empty() || cfg.sectors_path.empty())
        throw EnvError("universe command needs 'stocks' and 'sectors' in config");
    // stocks file: date,ticker,adj_close,volume
    std::ifstream in(cfg.stocks_path);
    if (!in) throw EnvError("cannot open " + cfg.stocks_path);
    struct Series {
        std::vector<m6::Date> dates;
        std::vector<double> px, vol;
    };
    std::map<std::string, Series> series;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (lineno == 1 || line.empty()) continue;  // header
        std::istringstream ls(line);
        std::string date_s, ticker, px_s, vol_s;
        if (!std::getline(ls, date_s, ',') || !std::getline(ls, ticker, ',') ||
            !std::getline(ls, px_s, ',') || !std::getline(ls, vol_s))
            throw m6::ParseError("bad stock row", lineno);
        auto& s = series[ticker];
        s.dates.push_back(m6::Date::parse(date_s));
        s.px.push_back(std::stod(px_s));
        s.vol.push_back(std::stod(vol_s));
    }
    std::map<std::string, std::string> sector_of;
    for (const auto& row : read_lines(cfg.sectors_path)) {
        const auto comma = row.find(',');
        if (comma == std::string::npos) continue;
        if (row.substr(0, comma) == "ticker") continue;
        sector_of[row.substr(0, comma)] = row.substr(comma + 1);
    }

    m6::Date as_of{1900, 1, 1};
    for (const auto& [_, s] : series) as_of = std::max(as_of, s.dates.back());

    std::map<std::string, std::vector<std::string>> sector_tickers;
    std::map<std::string, std::vector<m6::StockFeatures>> sector_features;
    for (const auto& [ticker, s] : series) {
        auto sec = sector_of.find(ticker);
        if (sec == sector_of.end())
            throw m6::DataError("no sector for ticker " + ticker);
        sector_tickers[sec->second].push_back(ticker);
        sector_features[sec->second].push_back(
            m6::compute_features(s.dates, s.px, s.vol, as_of));
    }

    std::vector<m6::SectorClusters> clusters;
    for (const auto& [sector, tickers] : sector_tickers) {
        const auto res = m6::cluster_sector(sector_features[sector], cfg.seed);
        m6::SectorClusters sc;
        sc.sector = sector;
        sc.clusters.resize(static_cast<std::size_t>(res.k));
        for (std::size_t i = 0; i < tickers.size(); ++i)
            sc.clusters[static_cast<std::size_t>(res.assignment[i])].push_back(tickers[i]);
        clusters.push_back(std::move(sc));
    }
    const auto sample =
        m6::sample_universe(m6::default_sector_plan(), clusters, cfg.seed);
    for (const auto& w : sample.warnings) std::cerr << "warning: " << w << "\n";

    std::ostringstream os;
    for (const auto& t : sample.tickers) os << t << '\n';
    for (const auto& t : m6::m6_etf_list()) os << t << '\n';
    m6::Manifest manifest(cfg.out_dir);
    manifest.write_artifact("universe.txt", os.str());
    manifest.finalize();
    return 0;
}

// ranked full-year team histories for the crowds study
std::vector<m6::TeamYear> ranked_team_years(const ScoreContext& ctx,
                                            const std::string& metric) {
    std::vector<m6::MetricRow> rows;
    std::map<std::string, TeamScores> scores;
    std::map<std::string, std::vector<m6::Submission>> effs;
    for (const auto& [team, history] : ctx.archive) {
        TeamScores ts = score_team(ctx, history, team);
        if (!ts.complete) continue;
        scores[team] = ts;
        std::vector<m6::Submission> series;
        for (auto& e : effective_series(ctx, history)) series.push_back(*e);
        effs[team] = std::move(series);
        const auto ir = m6::information_ratio(ts.daily_rets);
        rows.push_back({team, m6::rps_overall(ts.period_rps), ir.ir_annualized,
                        ir.defined});
    }
    if (rows.empty()) throw m6::DataError("crowds study: no complete team histories");
    auto ranked = m6::overall_rank(rows);
    std::stable_sort(ranked.begin(), ranked.end(),
                     [&](const m6::RankedRow& a, const m6::RankedRow& b) {
                         if (metric == "rps") return a.rps < b.rps;
                         if (metric == "ir") return a.rank_ir < b.rank_ir;
                         return a.overall_rank < b.overall_rank;
                     });
    std::vector<m6::TeamYear> out;
    for (const auto& r : ranked) out.push_back({r.team_id, effs.at(r.team_id)});
    return out;
}

int run_study(const m6::RunConfig& cfg, const std::string& study) {
    m6::Manifest manifest(cfg.out_dir);

    if (study == "crowds") {
        ScoreContext ctx = build_score_context(cfg);
        if (ctx.archive.empty()) throw m6::DataError("crowds study: no submissions");
        auto scorer = [&](const std::vector<m6::Submission>& combined) {
            std::vector<double> rps;
            std::vector<double> days;
            for (std::size_t p = 0; p < ctx.periods.size(); ++p) {
                rps.push_back(m6::rps_period(combined[p], ctx.periods[p].outcomes));
                const auto r =
                    period_daily_returns(ctx, weight_map(combined[p]), ctx.periods[p]);
                days.insert(days.end(), r.begin(), r.end());
            }
            return std::make_pair(m6::rps_overall(rps), m6::information_ratio(days));
        };
        std::ostringstream os;
        os << "metric,fraction,n_teams,rps,ir\n";
        for (const std::string metric : {"rps", "ir", "or"}) {
            const auto ranked = ranked_team_years(ctx, metric);
            const auto curve = m6::top_fraction_combination_study(
                ranked, m6::CombineMode::Both, scorer);
            for (const auto& pt : curve)
                os << metric << ',' << pt.fraction << ',' << pt.n_teams << ','
                   << fmt(pt.rps) << ',' << (pt.ir_defined ? fmt(pt.ir) : "NA")
                   << '\n';
        }
        manifest.write_artifact("crowds.csv", os.str());
        manifest.finalize();
        return 0;
    }

    if (study == "connection" || study == "calibration" || study == "strategy" ||
        study == "concentration") {
        ScoreContext ctx = build_score_context(cfg);
        if (ctx.archive.empty()) throw m6::DataError(study + " study: no submissions");
        std::ostringstream os;
        if (study == "connection") {
            std::map<std::string, int> census;
            os << "team,r_con,class\n";
            for (const auto& [team, history] : ctx.archive) {
                std::vector<m6::Submission> effs;
                for (auto& e : effective_series(ctx, history))
                    if (e) effs.push_back(*e);
                if (effs.empty()) continue;
                auto res = m6::connection_coefficient(effs);
                res.team_id = team;
                os << team << ',' << fmt(res.r_con) << ','
                   << m6::connection_class_name(res.cls) << '\n';
                ++census[m6::connection_class_name(res.cls)];
            }
            for (const char* c : {"WELL_CONNECTED", "CONNECTED", "WEAKLY_CONNECTED",
                                  "DISCONNECTED", "OPPOSITE", "NA"})
                os << "# " << c << "=" << census[c] << '\n';
            manifest.write_artifact("connection.csv", os.str());
        } else if (study == "calibration") {
            std::vector<m6::Submission> forecasts;
            std::vector<std::vector<m6::QuintileOutcome>> outcomes;
            for (const auto& [team, history] : ctx.archive) {
                const auto effs = effective_series(ctx, history);
                for (std::size_t p = 0; p < effs.size(); ++p)
                    if (effs[p]) {
                        forecasts.push_back(*effs[p]);
                        outcomes.push_back(ctx.periods[p].outcomes);
                    }
            }
            const auto bins = m6::calibration_curve(forecasts, outcomes);
            os << "bin_low,bin_high,mean_assessed,relative_frequency,count\n";
            for (const auto& b : bins)
                os << b.bin_low << ',' << b.bin_high << ',' << fmt(b.mean_assessed)
                   << ',' << fmt(b.relative_frequency) << ',' << b.count << '\n';
            manifest.write_artifact("calibration.csv", os.str());
        } else if (study == "strategy") {
            os << "team,changes\n";
            std::map<int, int> histogram;
            for (const auto& [team, history] : ctx.archive) {
                std::vector<m6::Submission> effs;
                for (auto& e : effective_series(ctx, history))
                    if (e) effs.push_back(*e);
                const int changes = m6::strategy_changes(effs);
                os << team << ',' << changes << '\n';
                ++histogram[changes];
            }
            for (const auto& [k, v] : histogram) os << "# changes=" << k << " teams=" << v << '\n';
            manifest.write_artifact("strategy.csv", os.str());
        } else {
            os << "team,mean_n_invested,mean_abs_weight\n";
            for (const auto& [team, history] : ctx.archive) {
                double n_sum = 0.0, w_sum = 0.0;
                int cnt = 0;
                for (auto& e : effective_series(ctx, history))
                    if (e) {
                        const auto m = m6::concentration_metrics(*e);
                        n_sum += static_cast<double>(m.n_invested);
                        w_sum += m.mean_abs_weight;
                        ++cnt;
                    }
                if (cnt)
                    os << team << ',' << fmt(n_sum / cnt) << ',' << fmt(w_sum / cnt)
                       << '\n';
            }
            manifest.write_artifact("concentration.csv", os.str());
        }
        manifest.finalize();
        return 0;
    }

    if (study == "optimize" || study == "risk-target" || study == "reverse") {
        ScoreContext ctx = build_score_context(cfg);
        if (ctx.archive.empty()) throw m6::DataError(study + " study: no submissions");
        RiskState st = load_risk_state(
            (fs::path(cfg.out_dir) / "riskmodel_state.json").string());
        const Eigen::MatrixXd cov = st.model.covariance();
        const Eigen::VectorXd s20 = sigma20(st);

        if (study == "reverse") {
            std::ostringstream os;
            os << "team,period,rps_actual,rps_implied\n";
            for (const auto& [team, history] : ctx.archive) {
                const auto effs = effective_series(ctx, history);
                for (std::size_t p = 0; p < effs.size(); ++p) {
                    if (!effs[p]) continue;
                    const Eigen::VectorXd w =
                        submission_weights_vec(*effs[p], st.model.assets);
                    if (w.lpNorm<1>() == 0.0) continue;
                    m6::ReverseOptConfig rcfg;
                    rcfg.implied_ic = cfg.ic;
                    const auto rev = m6::reverse_optimize(w, cov, s20, rcfg);
                    m6::Submission implied = *effs[p];
                    for (std::size_t i = 0; i < st.model.assets.size(); ++i)
                        if (auto* row = const_cast<m6::SubmissionRow*>(
                                implied.find(st.model.assets[i])))
                            row->probs = rev.forecast[i];
                    os << team << ',' << ctx.periods[p].spec.index << ','
                       << fmt(m6::rps_period(*effs[p], ctx.periods[p].outcomes)) << ','
                       << fmt(m6::rps_period(implied, ctx.periods[p].outcomes)) << '\n';
                }
            }
            manifest.write_artifact("reverse.csv", os.str());
            manifest.finalize();
            return 0;
        }

        // optimize / risk-target: rebuild each submission's portfolio from its
        // own forecasts and compare
        std::vector<m6::IcStudyEntry> entries;
        for (const auto& [team, history] : ctx.archive) {
            const auto effs = effective_series(ctx, history);
            for (std::size_t p = 0; p < effs.size(); ++p) {
                if (!effs[p]) continue;
                const auto& pd = ctx.periods[p];
                std::vector<std::array<double, 5>> probs;
                for (const auto& a : st.model.assets) {
                    const auto* r = effs[p]->find(a);
                    probs.push_back(r ? r->probs
                                      : std::array<double, 5>{0.2, 0.2, 0.2, 0.2, 0.2});
                }
                const Eigen::VectorXd scores = m6::score_submission(probs);
                const Eigen::VectorXd alpha =
                    m6::linear_bayes_alpha(scores, cfg.ic, s20);
                m6::OptimizedPortfolio opt;
                try {
                    opt = study == "risk-target"
                              ? m6::max_sharpe_risk_target(alpha, cov, cfg.min_vol,
                                                           {}, cfg.seed)
                              : m6::max_sharpe(alpha, cov, {}, cfg.seed);
                } catch (const m6::DataError&) {
                    continue;  // benchmark-identical forecasts have zero alpha
                }
                if (opt.status != m6::SolverStatus::OK) continue;

                Eigen::VectorXd rets(static_cast<Eigen::Index>(st.model.assets.size()));
                for (std::size_t i = 0; i < st.model.assets.size(); ++i) {
                    auto it = std::find_if(pd.outcomes.begin(), pd.outcomes.end(),
                                           [&](const m6::QuintileOutcome& o) {
                                               return o.asset_id == st.model.assets[i];
                                           });
                    rets(static_cast<Eigen::Index>(i)) =
                        it != pd.outcomes.end() ? it->rank_value : 3.0;
                }
                const auto ic = m6::realized_ic(scores, rets);

                std::map<std::string, double> opt_w;
                for (std::size_t i = 0; i < st.model.assets.size(); ++i)
                    opt_w[st.model.assets[i]] = opt.weights(static_cast<Eigen::Index>(i));
                const auto sub_days =
                    period_daily_returns(ctx, weight_map(*effs[p]), pd);
                const auto opt_days = period_daily_returns(ctx, opt_w, pd);
                const auto sub_ir = m6::information_ratio(sub_days);
                const auto opt_ir = m6::information_ratio(opt_days);
                const Eigen::VectorXd sub_w =
                    submission_weights_vec(*effs[p], st.model.assets);

                m6::IcStudyEntry e;
                e.period = pd.spec.index;
                e.realized_ic = ic.ic;
                e.sub_risk = std::sqrt(252.0 * sub_w.dot(cov * sub_w));
                e.opt_risk = opt.ex_ante_vol;
                e.sub_ret = sub_ir.ret;
                e.opt_ret = opt_ir.ret;
                e.sub_ir = sub_ir.ir_annualized;
                e.opt_ir = opt_ir.ir_annualized;
                entries.push_back(e);
            }
        }
        if (entries.empty()) throw m6::DataError(study + " study: nothing to optimize");
        const auto table = m6::ic_quintile_report(entries);
        std::ostringstream os;
        os << "ic_quintile,median_ic,sub_risk,opt_risk,sub_ret,opt_ret,sub_ir,opt_ir\n";
        for (const auto& r : table)
            os << r.quintile << ',' << fmt(r.median_ic) << ','
               << fmt(r.median_sub_risk) << ',' << fmt(r.median_opt_risk) << ','
               << fmt(r.median_sub_ret) << ',' << fmt(r.median_opt_ret) << ','
               << fmt(r.median_sub_ir) << ',' << fmt(r.median_opt_ir) << '\n';
        manifest.write_artifact(study == "risk-target" ? "risk_target.csv"
                                                       : "optimize.csv",
                                os.str());
        manifest.finalize();
        return 0;
    }

    throw m6::ConfigError("unknown study: " + study);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"M6 competition machinery"};
    app.require_subcommand(1);

    std::string config_path, out_override;
    std::uint64_t seed_override = 0;
    bool seed_set = false;
    app.add_option("--config", config_path, "run config file (key = value lines)");
    app.add_option("--out", out_override, "output directory (overrides config)");
    auto* seed_opt = app.add_option("--seed", seed_override, "RNG seed (overrides config)");

    std::string validate_file, validate_universe;
    auto* cmd_validate = app.add_subcommand("validate", "check one submission file");
    cmd_validate->add_option("file", validate_file, "submission CSV")->required();
    cmd_validate->add_option("--universe", validate_universe, "universe ticker list");

    auto* cmd_score = app.add_subcommand("score", "build leaderboards");

    std::string risk_sub, portfolio_file;
    auto* cmd_risk = app.add_subcommand("riskmodel", "risk model pipeline");
    cmd_risk->add_option("action", risk_sub, "fit|forecast|decompose|gridsearch")
        ->required()
        ->check(CLI::IsMember({"fit", "forecast", "decompose", "gridsearch"}));
    cmd_risk->add_option("--portfolio", portfolio_file, "submission CSV to decompose");

    std::string study_name;
    auto* cmd_study = app.add_subcommand("study", "run one analysis study");
    cmd_study->add_option("name", study_name, "study name")
        ->required()
        ->check(CLI::IsMember({"optimize", "risk-target", "reverse", "crowds",
                               "connection", "calibration", "strategy",
                               "concentration"}));

    auto* cmd_universe = app.add_subcommand("universe", "construct the 100-asset universe");

    CLI11_PARSE(app, argc, argv);
    seed_set = seed_opt->count() > 0;

    try {
        m6::RunConfig cfg;
        if (!config_path.empty()) cfg = m6::load_run_config(config_path);
        if (!out_override.empty()) cfg.out_dir = out_override;
        if (seed_set) cfg.seed = seed_override;

        if (cmd_validate->parsed())
            return run_validate(validate_file, validate_universe, cfg.out_dir);
        if (cmd_score->parsed()) return run_score(cfg);
        if (cmd_risk->parsed()) return run_riskmodel(cfg, risk_sub, portfolio_file);
        if (cmd_study->parsed()) return run_study(cfg, study_name);
        if (cmd_universe->parsed()) return run_universe(cfg);
        return 2;
    } catch (const EnvError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const m6::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
