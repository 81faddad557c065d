#include "conc/tape.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>

#include "conc/errors.hpp"
#include "conc/flow.hpp"

namespace conc {

uint32_t StringPool::intern(std::string_view s) {
    auto it = index_.find(s);
    if (it != index_.end()) return it->second;
    const auto id = static_cast<uint32_t>(names_.size());
    names_.emplace_back(s);
    index_.emplace(names_.back(), id);
    return id;
}

std::string_view exclusion_name(Exclusion e) {
    switch (e) {
        case Exclusion::TooFewTrades: return "TooFewTrades";
        case Exclusion::LargeMove: return "LargeMove";
        case Exclusion::ZeroVariance: return "ZeroVariance";
    }
    return "Unknown";
}

namespace {

constexpr size_t kNoColumn = static_cast<size_t>(-1);

struct ColumnMap {
    size_t timestamp = kNoColumn;
    size_t symbol = kNoColumn;
    size_t price = kNoColumn;
    size_t size = kNoColumn;
    size_t buyer = kNoColumn;
    size_t seller = kNoColumn;
    size_t aggressor = kNoColumn;
    size_t notional = kNoColumn;  // optional
    size_t n_columns = 0;
};

size_t split_fields(std::string_view line, std::string_view* out, size_t max_fields) {
    size_t n = 0;
    size_t start = 0;
    while (n < max_fields) {
        const size_t pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out[n++] = line.substr(start);
            break;
        }
        out[n++] = line.substr(start, pos - start);
        start = pos + 1;
    }
    return n;
}

ColumnMap parse_header(std::string_view header) {
    std::array<std::string_view, 16> fields;
    const size_t n = split_fields(header, fields.data(), fields.size());
    ColumnMap map;
    map.n_columns = n;
    for (size_t i = 0; i < n; ++i) {
        const std::string_view f = fields[i];
        size_t* slot = nullptr;
        if (f == "timestamp") slot = &map.timestamp;
        else if (f == "symbol") slot = &map.symbol;
        else if (f == "price") slot = &map.price;
        else if (f == "size") slot = &map.size;
        else if (f == "buyer_firm") slot = &map.buyer;
        else if (f == "seller_firm") slot = &map.seller;
        else if (f == "aggressor") slot = &map.aggressor;
        else if (f == "notional") slot = &map.notional;
        else throw InputError("tape header: unknown column '" + std::string(f) + "'");
        if (*slot != kNoColumn)
            throw InputError("tape header: duplicate column '" + std::string(f) + "'");
        *slot = i;
    }
    const char* missing = nullptr;
    if (map.timestamp == kNoColumn) missing = "timestamp";
    else if (map.symbol == kNoColumn) missing = "symbol";
    else if (map.price == kNoColumn) missing = "price";
    else if (map.size == kNoColumn) missing = "size";
    else if (map.buyer == kNoColumn) missing = "buyer_firm";
    else if (map.seller == kNoColumn) missing = "seller_firm";
    else if (map.aggressor == kNoColumn) missing = "aggressor";
    if (missing != nullptr)
        throw InputError(std::string("tape header: missing required column '") + missing + "'");
    return map;
}

bool parse_double(std::string_view s, double& out) {
    const char* first = s.data();
    const char* last = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last;
}

bool parse_int(std::string_view s, int64_t& out) {
    const char* first = s.data();
    const char* last = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last;
}

}  // namespace

Tape parse_tape(std::istream& in, const ParseOptions& opts) {
    Tape tape;
    std::string line;
    if (!std::getline(in, line)) throw InputError("tape: empty input, header required");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const ColumnMap cols = parse_header(line);

    std::array<std::string_view, 16> f;
    size_t line_no = 1;
    auto row_error = [&](const std::string& msg) {
        tape.errors.push_back({line_no, msg});
        if (tape.errors.size() > opts.max_errors)
            throw InputError("tape: more than " + std::to_string(opts.max_errors) +
                             " malformed rows, aborting (last at line " +
                             std::to_string(line_no) + ")");
    };

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const size_t n = split_fields(line, f.data(), f.size());
        if (n != cols.n_columns) {
            row_error("expected " + std::to_string(cols.n_columns) + " fields, got " +
                      std::to_string(n));
            continue;
        }
        TradeRecord rec;
        const auto ts = parse_rfc3339_ms(f[cols.timestamp]);
        if (!ts) {
            row_error("bad timestamp '" + std::string(f[cols.timestamp]) + "'");
            continue;
        }
        rec.timestamp_ms = *ts;
        if (f[cols.symbol].empty()) {
            row_error("empty symbol");
            continue;
        }
        if (!parse_double(f[cols.price], rec.price) || !(rec.price > 0.0)) {
            row_error("non-positive or malformed price");
            continue;
        }
        if (!parse_int(f[cols.size], rec.size) || rec.size <= 0) {
            row_error("non-positive size");
            continue;
        }
        if (f[cols.buyer].empty() || f[cols.seller].empty()) {
            row_error("empty firm code");
            continue;
        }
        const std::string_view aggr = f[cols.aggressor];
        if (aggr == "B") rec.aggressor = Aggressor::BuyerInitiated;
        else if (aggr == "S") rec.aggressor = Aggressor::SellerInitiated;
        else {
            row_error("aggressor must be B or S, got '" + std::string(aggr) + "'");
            continue;
        }
        rec.notional = rec.price * static_cast<double>(rec.size);
        if (cols.notional != kNoColumn) {
            double given = 0.0;
            if (!parse_double(f[cols.notional], given)) {
                row_error("malformed notional");
                continue;
            }
            const double tol = 1e-9 * std::max(1.0, std::fabs(rec.notional));
            if (std::fabs(given - rec.notional) > tol) {
                row_error("notional does not equal price*size");
                continue;
            }
        }
        rec.symbol = tape.symbols.intern(f[cols.symbol]);
        rec.buyer_firm = tape.firms.intern(f[cols.buyer]);
        rec.seller_firm = tape.firms.intern(f[cols.seller]);
        tape.records.push_back(rec);
    }
    return tape;
}

Tape parse_tape_file(const std::string& path, const ParseOptions& opts) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open tape file: " + path);
    return parse_tape(in, opts);
}

namespace {

void validate_window_spec(const WindowSpec& spec) {
    if (spec.trim_open_ms < 0 || spec.trim_close_ms < 0)
        throw InputError("window spec: trims must be non-negative");
    if (spec.kind == WindowSpec::Kind::TradeCount && spec.trade_count < 1)
        throw InputError("window spec: trade count must be >= 1");
    if (spec.clock.open_minute >= spec.clock.close_minute)
        throw InputError("window spec: session open must precede close");
}

class SessionBuilder {
public:
    SessionBuilder(SymbolId symbol, std::string session_id, int64_t day_index)
        : session_{} {
        session_.symbol = symbol;
        session_.session_id = std::move(session_id);
        session_.day_index = day_index;
    }

    void add(const TradeRecord& rec) {
        session_.trades.push_back(rec);
        session_.firm_buy_volume[rec.buyer_firm] += rec.notional;
        session_.firm_sell_volume[rec.seller_firm] += rec.notional;
        session_.total_notional += rec.notional;
    }

    size_t count() const { return session_.trades.size(); }
    SessionTape take() { return std::move(session_); }

private:
    SessionTape session_;
};

}  // namespace

void sessionize_stream(std::span<const TradeRecord> records, const WindowSpec& spec,
                       const std::function<void(SessionTape&&)>& sink) {
    validate_window_spec(spec);

    const int64_t open_offset =
        static_cast<int64_t>(spec.clock.open_minute) * kMsPerMinute + spec.trim_open_ms;
    const int64_t close_offset =
        static_cast<int64_t>(spec.clock.close_minute) * kMsPerMinute - spec.trim_close_ms;

    std::vector<SymbolId> seen_symbols;
    bool have_current = false;
    SymbolId current_symbol = 0;
    int64_t prev_ts = 0;
    size_t prev_index = 0;

    std::optional<SessionBuilder> builder;
    int64_t builder_day = -1;
    int window_index = 0;

    auto flush = [&](bool symbol_done) {
        if (builder) {
            if (spec.kind == WindowSpec::Kind::TradeCount) {
                // Incomplete trailing window: discard.
                if (symbol_done &&
                    builder->count() < static_cast<size_t>(spec.trade_count)) {
                    builder.reset();
                    return;
                }
            }
            if (builder->count() > 0) sink(builder->take());
            builder.reset();
        }
    };

    for (size_t i = 0; i < records.size(); ++i) {
        const TradeRecord& rec = records[i];
        if (!have_current || rec.symbol != current_symbol) {
            if (have_current) {
                if (std::find(seen_symbols.begin(), seen_symbols.end(), rec.symbol) !=
                    seen_symbols.end())
                    throw InputError(
                        "sessionize: records not sorted by (symbol, timestamp): symbol of "
                        "record " +
                        std::to_string(i) + " reappears after record " +
                        std::to_string(prev_index));
                flush(true);
            }
            seen_symbols.push_back(rec.symbol);
            current_symbol = rec.symbol;
            have_current = true;
            prev_ts = rec.timestamp_ms;
            builder_day = -1;
            window_index = 0;
        } else if (rec.timestamp_ms < prev_ts) {
            throw InputError("sessionize: records not sorted by (symbol, timestamp): record " +
                             std::to_string(i) + " (t=" + format_rfc3339_ms(rec.timestamp_ms) +
                             ") precedes record " + std::to_string(prev_index) +
                             " (t=" + format_rfc3339_ms(prev_ts) + ")");
        }
        prev_ts = rec.timestamp_ms;
        prev_index = i;

        const int64_t day = utc_day_index(rec.timestamp_ms);
        const int64_t day_ms = day * kMsPerDay;
        const int64_t intraday = rec.timestamp_ms - day_ms;
        if (intraday < open_offset || intraday > close_offset) continue;  // trimmed

        if (spec.kind == WindowSpec::Kind::CalendarDay) {
            if (!builder || day != builder_day) {
                flush(false);
                builder.emplace(rec.symbol, format_date(day), day);
                builder_day = day;
            }
            builder->add(rec);
        } else {
            if (!builder) {
                builder.emplace(rec.symbol, std::to_string(window_index), day);
                ++window_index;
            }
            builder->add(rec);
            if (builder->count() == static_cast<size_t>(spec.trade_count)) flush(false);
        }
    }
    flush(true);
}

std::vector<SessionTape> sessionize(std::span<const TradeRecord> records,
                                    const WindowSpec& spec) {
    std::vector<SessionTape> out;
    sessionize_stream(records, spec, [&](SessionTape&& s) { out.push_back(std::move(s)); });
    return out;
}

ExclusionCounts filter_sessions(std::vector<SessionTape>& sessions, const FilterConfig& cfg) {
    if (cfg.min_trades < 1) throw InputError("filter: min_trades must be >= 1");
    if (!(cfg.max_abs_return_pct > 0.0))
        throw InputError("filter: max_abs_return_pct must be > 0");
    ExclusionCounts counts;
    for (SessionTape& s : sessions) {
        if (s.trades.size() < static_cast<size_t>(cfg.min_trades)) {
            s.excluded = Exclusion::TooFewTrades;
            ++counts.too_few_trades;
            continue;
        }
        // The move screen uses the raw head/tail VWAP return, before any
        // market adjustment. Single-trade sessions have no defined return
        // and pass (they only survive here when min_trades == 1).
        if (s.trades.size() >= 2) {
            const double ret = session_return(s);
            if (std::fabs(ret) > cfg.max_abs_return_pct) {
                s.excluded = Exclusion::LargeMove;
                ++counts.large_move;
                continue;
            }
        }
        s.excluded.reset();
        ++counts.included;
    }
    return counts;
}

}  // namespace conc
