#include "m6/run_config.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "m6/errors.hpp"

namespace m6 {

namespace {

// days since 1970-01-01, Howard Hinnant's civil-days algorithm
long to_serial(Date d) {
    long y = d.year;
    const long m = d.month;
    const long day = d.day;
    y -= m <= 2;
    const long era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = static_cast<unsigned>((153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + day - 1);
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<long>(doe) - 719468;
}

Date from_serial(long z) {
    z += 719468;
    const long era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const long y = static_cast<long>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned day = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp + (mp < 10 ? 3 : -9);
    return Date{static_cast<std::int16_t>(y + (m <= 2)), static_cast<std::int8_t>(m),
                static_cast<std::int8_t>(day)};
}

}  // namespace

Date add_days(Date d, int days) { return from_serial(to_serial(d) + days); }

int days_between(Date a, Date b) { return static_cast<int>(to_serial(b) - to_serial(a)); }

std::vector<PeriodSpec> default_periods() {
    const Date subs[12] = {
        {2022, 3, 6},  {2022, 4, 3},  {2022, 5, 1},  {2022, 5, 29},
        {2022, 6, 26}, {2022, 7, 24}, {2022, 8, 21}, {2022, 9, 18},
        {2022, 10, 16}, {2022, 11, 13}, {2022, 12, 11}, {2023, 1, 8},
    };
    std::vector<PeriodSpec> out;
    for (int i = 0; i < 12; ++i) out.push_back({i + 1, subs[i]});
    return out;
}

namespace {

double parse_double(const std::string& key, const std::string& v) {
    double x = 0.0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc{} || p != v.data() + v.size())
        throw ConfigError("bad numeric value for '" + key + "': " + v);
    return x;
}

}  // namespace

void RunConfig::apply(const std::string& key, const std::string& value) {
    if (key == "prices") prices_path = value;
    else if (key == "submissions") submissions_dir = value;
    else if (key == "universe") universe_path = value;
    else if (key == "factors") factor_config_path = value;
    else if (key == "stocks") stocks_path = value;
    else if (key == "sectors") sectors_path = value;
    else if (key == "out") out_dir = value;
    else if (key == "ic") ic = parse_double(key, value);
    else if (key == "omega") omega = parse_double(key, value);
    else if (key == "gamma") gamma = parse_double(key, value);
    else if (key == "min_vol") min_vol = parse_double(key, value);
    else if (key == "seed") {
        std::uint64_t s = 0;
        auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), s);
        if (ec != std::errc{} || p != value.data() + value.size())
            throw ConfigError("bad seed: " + value);
        seed = s;
    } else {
        throw ConfigError("unknown config key: " + key);
    }
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    RunConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
        };
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError("config line has no '='", lineno);
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        // strip optional TOML-style quotes
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
            value = value.substr(1, value.size() - 2);
        cfg.apply(key, value);
    }
    bool increasing = true;
    for (std::size_t i = 1; i < cfg.periods.size(); ++i)
        if (!(cfg.periods[i - 1].submission < cfg.periods[i].submission))
            increasing = false;
    if (!increasing) throw ConfigError("period dates not strictly increasing");
    return cfg;
}

std::string content_hash(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("content_hash: cannot open " + path);
    std::uint64_t h = 1469598103934665603ULL;
    char buf[1 << 14];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ULL;
        }
        if (!in) break;
    }
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << h;
    return os.str();
}

Manifest::Manifest(std::string out_dir) : out_dir_(std::move(out_dir)) {
    std::filesystem::create_directories(out_dir_);
}

std::string Manifest::write_artifact(const std::string& name, const std::string& content) {
    const std::string path = (std::filesystem::path(out_dir_) / name).string();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write artifact: " + path);
    out << content;
    out.close();
    entries_.emplace_back(name, path);
    return path;
}

void Manifest::finalize() const {
    std::ostringstream os;
    os << "{\n  \"artifacts\": [\n";
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        os << "    {\"name\": \"" << entries_[i].first << "\", \"hash\": \""
           << content_hash(entries_[i].second) << "\"}";
        os << (i + 1 < entries_.size() ? ",\n" : "\n");
    }
    os << "  ]\n}\n";
    const std::string path = (std::filesystem::path(out_dir_) / "manifest.json").string();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write manifest: " + path);
    out << os.str();
}

}  // namespace m6
