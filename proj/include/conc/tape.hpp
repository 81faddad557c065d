#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "conc/time_util.hpp"

namespace conc {

using SymbolId = uint32_t;
using FirmId = uint32_t;

enum class Aggressor : uint8_t { BuyerInitiated, SellerInitiated };

/// One firm-attributed trade. Strings are interned; ids index the pools in
/// Tape. Volumes are GBP notional throughout (price * size).
struct TradeRecord {
    int64_t timestamp_ms = 0;
    SymbolId symbol = 0;
    double price = 0.0;
    int64_t size = 0;
    double notional = 0.0;
    FirmId buyer_firm = 0;
    FirmId seller_firm = 0;
    Aggressor aggressor = Aggressor::BuyerInitiated;
};

/// Insertion-ordered string interner; ids are dense and deterministic for a
/// given input, which keeps every downstream artifact byte-reproducible.
class StringPool {
public:
    uint32_t intern(std::string_view s);
    const std::string& name(uint32_t id) const { return names_.at(id); }
    size_t size() const { return names_.size(); }

private:
    std::map<std::string, uint32_t, std::less<>> index_;
    std::vector<std::string> names_;
};

struct RowError {
    size_t line;
    std::string message;
};

struct ParseOptions {
    /// Abort with InputError once this many malformed rows have been seen.
    size_t max_errors = 1000;
};

struct Tape {
    StringPool symbols;
    StringPool firms;
    std::vector<TradeRecord> records;
    std::vector<RowError> errors;
};

/// Parse the trade-tape CSV. Header is mandatory; columns are
/// timestamp,symbol,price,size,buyer_firm,seller_firm,aggressor with an
/// optional notional column (validated when present, recomputed otherwise).
/// Malformed rows are collected in Tape::errors and skipped; a missing
/// required column throws InputError.
Tape parse_tape(std::istream& in, const ParseOptions& opts = {});
Tape parse_tape_file(const std::string& path, const ParseOptions& opts = {});

struct SessionClock {
    int open_minute = 8 * 60;        // 08:00 UTC
    int close_minute = 16 * 60 + 30; // 16:30 UTC
};

struct WindowSpec {
    enum class Kind { CalendarDay, TradeCount };
    Kind kind = Kind::CalendarDay;
    int trade_count = 0;  // TradeCount windows only, >= 1
    int64_t trim_open_ms = 30 * kMsPerMinute;
    int64_t trim_close_ms = 30 * kMsPerMinute;
    SessionClock clock;
};

enum class Exclusion : uint8_t { TooFewTrades, LargeMove, ZeroVariance };

std::string_view exclusion_name(Exclusion e);

/// Trimmed, per-(symbol, window) slice of the tape with per-firm volume
/// tallies. Volume maps are keyed by firm id and therefore iterate
/// deterministically.
struct SessionTape {
    SymbolId symbol = 0;
    std::string session_id;   // ISO date for calendar days, window index otherwise
    int64_t day_index = 0;    // epoch days of the first retained trade
    std::vector<TradeRecord> trades;
    std::map<FirmId, double> firm_buy_volume;
    std::map<FirmId, double> firm_sell_volume;
    double total_notional = 0.0;
    std::optional<Exclusion> excluded;

    size_t n_buyers() const { return firm_buy_volume.size(); }
    size_t n_sellers() const { return firm_sell_volume.size(); }
};

/// Partition records into sessions. Records must arrive grouped by symbol
/// with non-decreasing timestamps inside each group; the first violation is
/// a fatal InputError naming the offending pair. Trades inside the trim
/// buffers are dropped before windowing.
std::vector<SessionTape> sessionize(std::span<const TradeRecord> records,
                                    const WindowSpec& spec);

/// Streaming variant: invokes the sink once per completed session, in input
/// order, without materialising more than one session at a time.
void sessionize_stream(std::span<const TradeRecord> records, const WindowSpec& spec,
                       const std::function<void(SessionTape&&)>& sink);

struct FilterConfig {
    int min_trades = 500;
    double max_abs_return_pct = 5.0;
};

struct ExclusionCounts {
    size_t too_few_trades = 0;
    size_t large_move = 0;
    size_t zero_variance = 0;
    size_t included = 0;
};

/// Apply the trade-count and large-move screens in place. The move screen
/// uses the raw head/tail VWAP session return, before any market
/// adjustment. Returns tallies per exclusion reason.
ExclusionCounts filter_sessions(std::vector<SessionTape>& sessions, const FilterConfig& cfg);

}  // namespace conc
