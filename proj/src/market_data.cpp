#include "m6/market_data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "m6/errors.hpp"

namespace m6 {

bool Date::valid() const {
    if (month < 1 || month > 12 || day < 1) return false;
    static const int days_in[] = {31, 29, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    return day <= days_in[month - 1];
}

std::string Date::iso() const {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", int(year), int(month), int(day));
    return buf;
}

Date Date::parse(const std::string& s) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-')
        throw ParseError("bad date '" + s + "'", 0);
    auto num = [&](int from, int to) {
        int v = 0;
        for (int i = from; i < to; ++i) {
            if (!std::isdigit(static_cast<unsigned char>(s[i])))
                throw ParseError("bad date '" + s + "'", 0);
            v = v * 10 + (s[i] - '0');
        }
        return v;
    };
    Date d{static_cast<std::int16_t>(num(0, 4)), static_cast<std::int8_t>(num(5, 7)),
           static_cast<std::int8_t>(num(8, 10))};
    if (!d.valid()) throw ParseError("bad date '" + s + "'", 0);
    return d;
}

void PriceHistory::check_invariants() const {
    if (calendar.size() != rows.size())
        throw DataError(asset_id + ": calendar/rows length mismatch");
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (i > 0 && !(calendar[i - 1] < calendar[i]))
            throw DataError(asset_id + ": calendar not strictly increasing at " +
                            calendar[i].iso());
        if (r.open <= 0 || r.high <= 0 || r.low <= 0 || r.close <= 0 ||
            r.adjusted_close <= 0)
            throw DataError(asset_id + ": nonpositive price on " + calendar[i].iso());
        if (r.high < std::max(r.open, r.close) || r.low > std::min(r.open, r.close))
            throw DataError(asset_id + ": high/low do not bracket open/close on " +
                            calendar[i].iso());
    }
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

double parse_price(const std::string& s, std::size_t line_no) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw ParseError("bad number '" + s + "'", line_no);
    return v;
}

}  // namespace

LoadResult load_prices(const std::string& source_path,
                       const std::vector<std::string>& universe) {
    std::ifstream in(source_path);
    if (!in) throw DataError("cannot open price file: " + source_path);
    std::set<std::string> wanted(universe.begin(), universe.end());

    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) throw ParseError("empty price file", 0);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "date,ticker,open,high,low,close,adj_close")
        throw ParseError("unexpected header '" + line + "'", line_no);

    // ticker -> (date -> row); the file need not be sorted.
    std::map<std::string, std::map<Date, OhlcRow>> table;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto f = split_csv(line);
        if (f.size() != 7) throw ParseError("expected 7 fields, got " +
                                            std::to_string(f.size()), line_no);
        if (!wanted.empty() && !wanted.count(f[1])) continue;
        Date d;
        try {
            d = Date::parse(f[0]);
        } catch (const ParseError& e) {
            throw ParseError(e.what(), line_no);
        }
        OhlcRow row{parse_price(f[2], line_no), parse_price(f[3], line_no),
                    parse_price(f[4], line_no), parse_price(f[5], line_no),
                    parse_price(f[6], line_no)};
        if (row.open <= 0 || row.high <= 0 || row.low <= 0 || row.close <= 0 ||
            row.adjusted_close <= 0)
            throw DataError("nonpositive price for " + f[1] + " on " + d.iso());
        if (row.low > row.high)
            throw DataError("low > high for " + f[1] + " on " + d.iso());
        table[f[1]][d] = row;
    }

    LoadResult out;
    for (auto& [ticker, by_date] : table) {
        PriceHistory h;
        h.asset_id = ticker;
        for (auto& [d, r] : by_date) {
            h.calendar.push_back(d);
            h.rows.push_back(r);
        }
        h.check_invariants();
        out.histories.emplace(ticker, std::move(h));
    }
    for (const auto& t : universe)
        if (!out.histories.count(t)) out.missing_tickers.push_back(t);
    return out;
}

std::vector<Date> union_calendar(const std::map<std::string, PriceHistory>& histories) {
    std::set<Date> dates;
    for (const auto& [_, h] : histories)
        dates.insert(h.calendar.begin(), h.calendar.end());
    return {dates.begin(), dates.end()};
}

PriceHistory forward_fill(const PriceHistory& history,
                          const std::vector<Date>& universe_calendar) {
    if (history.empty()) throw DataError("forward_fill: empty history");
    PriceHistory out;
    out.asset_id = history.asset_id;
    const Date start = history.first_valid_date();
    std::size_t src = 0;
    for (const Date& d : universe_calendar) {
        if (d < start) continue;
        while (src + 1 < history.size() && history.calendar[src + 1] <= d) ++src;
        // src points at the last available row with date <= d
        if (history.calendar[src] <= d) {
            out.calendar.push_back(d);
            out.rows.push_back(history.rows[src]);
        }
    }
    return out;
}

std::vector<double> daily_returns(const PriceHistory& history) {
    if (history.size() < 2) throw DataError(history.asset_id + ": need >= 2 rows for returns");
    std::vector<double> r(history.size() - 1);
    for (std::size_t t = 1; t < history.size(); ++t)
        r[t - 1] = history.rows[t].adjusted_close / history.rows[t - 1].adjusted_close - 1.0;
    return r;
}

std::vector<LogDayComponents> log_components(const PriceHistory& history) {
    if (history.size() < 2) throw DataError(history.asset_id + ": need >= 2 rows for components");
    history.check_invariants();
    std::vector<LogDayComponents> out(history.size() - 1);
    for (std::size_t t = 1; t < history.size(); ++t) {
        const auto& r = history.rows[t];
        out[t - 1].o = std::log(r.open) - std::log(history.rows[t - 1].close);
        out[t - 1].u = std::log(r.high) - std::log(r.open);
        out[t - 1].d = std::log(r.low) - std::log(r.open);
        out[t - 1].c = std::log(r.close) - std::log(r.open);
    }
    return out;
}

}  // namespace m6
