#pragma once

#include <map>
#include <string>
#include <vector>

#include "m6/dates.hpp"

namespace m6 {

struct OhlcRow {
    double open = 0.0;
    double high = 0.0;
    double low = 0.0;
    double close = 0.0;
    double adjusted_close = 0.0;
};

// Daily OHLC + adjusted close for one asset, aligned on an increasing
// calendar. Immutable after construction; safe for concurrent reads.
struct PriceHistory {
    std::string asset_id;
    std::vector<Date> calendar;
    std::vector<OhlcRow> rows;

    Date first_valid_date() const { return calendar.front(); }
    std::size_t size() const { return rows.size(); }
    bool empty() const { return rows.empty(); }

    // Throws DataError if calendar is not strictly increasing, a price is
    // nonpositive, or high/low do not bracket open/close.
    void check_invariants() const;
};

// Overnight and intraday log components of one trading day:
//   o: open vs prior close, u: high vs open, d: low vs open, c: close vs open.
struct LogDayComponents {
    double o = 0.0;
    double u = 0.0;
    double d = 0.0;
    double c = 0.0;
};

struct LoadResult {
    std::map<std::string, PriceHistory> histories;
    std::vector<std::string> missing_tickers;  // requested but absent from file
};

// CSV loader; header `date,ticker,open,high,low,close,adj_close`.
// Rows for tickers outside `universe` are skipped. Throws ParseError on
// malformed rows, DataError on nonpositive prices or invariant breaks.
LoadResult load_prices(const std::string& source_path,
                       const std::vector<std::string>& universe);

// Union of all dates present across the loaded histories, sorted.
std::vector<Date> union_calendar(const std::map<std::string, PriceHistory>& histories);

// Fills every universe-calendar date >= the asset's first observation with
// the last available row. Idempotent. Throws DataError on empty history.
PriceHistory forward_fill(const PriceHistory& history,
                          const std::vector<Date>& universe_calendar);

// Simple returns on adjusted close: r_t = P_t / P_{t-1} - 1, length size-1.
std::vector<double> daily_returns(const PriceHistory& history);

// Per-day {o,u,d,c}; entry t corresponds to calendar[t+1] (needs prior close).
std::vector<LogDayComponents> log_components(const PriceHistory& history);

}  // namespace m6
