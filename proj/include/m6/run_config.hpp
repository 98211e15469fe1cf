#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "m6/dates.hpp"

namespace m6 {

// Calendar-day arithmetic (proleptic Gregorian).
Date add_days(Date d, int days);
int days_between(Date a, Date b);  // b - a

// One competition round: submissions close on `submission` (a Sunday), the
// evaluation window is the following four weeks.
struct PeriodSpec {
    int index = 0;  // 1..12
    Date submission;

    Date start() const { return add_days(submission, 1); }
    Date end() const { return add_days(submission, 28); }
    int quarter() const { return (index - 1) / 3 + 1; }
};

// The twelve submission dates of the 2022-23 competition year.
std::vector<PeriodSpec> default_periods();

struct RunConfig {
    std::string prices_path;
    std::string submissions_dir;
    std::string universe_path;
    std::string factor_config_path;  // empty = built-in factor set
    std::string stocks_path;         // candidate stock prices+volumes (universe cmd)
    std::string sectors_path;        // ticker,sector map (universe cmd)
    double ic = 0.3;
    double omega = 0.01;
    double gamma = 0.005;
    double min_vol = 0.0;  // annualized floor for the risk-target study
    std::uint64_t seed = 42;
    std::string out_dir = "out";
    std::vector<PeriodSpec> periods = default_periods();

    // Throws ConfigError on unknown keys or unparsable values.
    void apply(const std::string& key, const std::string& value);
};

// `key = value` lines, '#' comments, blank lines ignored.
RunConfig load_run_config(const std::string& path);

// FNV-1a 64-bit content hash, hex encoded.
std::string content_hash(const std::string& path);

// Collects output artifacts and writes `manifest.json` under out_dir with
// their content hashes.
class Manifest {
  public:
    explicit Manifest(std::string out_dir);
    // Writes content to out_dir/name, records it, returns the full path.
    std::string write_artifact(const std::string& name, const std::string& content);
    void finalize() const;  // writes manifest.json

  private:
    std::string out_dir_;
    std::vector<std::pair<std::string, std::string>> entries_;  // name, path
};

}  // namespace m6
