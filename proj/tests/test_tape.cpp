#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "conc/errors.hpp"
#include "conc/flow.hpp"
#include "conc/tape.hpp"

using namespace conc;

namespace {

constexpr char kHeader[] = "timestamp,symbol,price,size,buyer_firm,seller_firm,aggressor\n";

Tape parse(const std::string& body, const ParseOptions& opts = {}) {
    std::istringstream in(std::string(kHeader) + body);
    return parse_tape(in, opts);
}

std::string row(const char* time, const char* sym, const char* price, const char* size,
                const char* b, const char* s, const char* a) {
    std::string out;
    out += std::string("2000-05-09T") + time + "Z," + sym + "," + price + "," + size + "," +
           b + "," + s + "," + a + "\n";
    return out;
}

}  // namespace

TEST_CASE("parse: direct field mapping") {
    const Tape t = parse("2000-05-09T08:31:00.000Z,LLOY,6.50,1000,A1,B2,B\n");
    REQUIRE(t.records.size() == 1);
    REQUIRE(t.errors.empty());
    const TradeRecord& r = t.records[0];
    CHECK(r.price == doctest::Approx(6.50));
    CHECK(r.size == 1000);
    CHECK(r.notional == doctest::Approx(6500.0).epsilon(1e-12));
    CHECK(r.aggressor == Aggressor::BuyerInitiated);
    CHECK(t.symbols.name(r.symbol) == "LLOY");
    CHECK(t.firms.name(r.buyer_firm) == "A1");
    CHECK(t.firms.name(r.seller_firm) == "B2");
    const auto ts = parse_rfc3339_ms("2000-05-09T08:31:00.000Z");
    REQUIRE(ts.has_value());
    CHECK(r.timestamp_ms == *ts);
}

TEST_CASE("parse: empty file after header gives empty sequence") {
    const Tape t = parse("");
    CHECK(t.records.empty());
    CHECK(t.errors.empty());
}

TEST_CASE("parse: zero size is a row error with the line number") {
    const Tape t = parse(row("08:31:00.000", "LLOY", "6.50", "0", "A", "B", "B") +
                         row("08:32:00.000", "LLOY", "6.50", "10", "A", "B", "S"));
    REQUIRE(t.records.size() == 1);
    REQUIRE(t.errors.size() == 1);
    CHECK(t.errors[0].line == 2);
    CHECK(t.errors[0].message.find("size") != std::string::npos);
}

TEST_CASE("parse: malformed rows are collected, not fatal") {
    const Tape t = parse("not,a,row\n" +
                         row("08:31:00.000", "X", "1.0", "5", "A", "B", "B") +
                         row("08:32:00.000", "X", "-3", "5", "A", "B", "B") +
                         row("08:33:00.000", "X", "1.0", "5", "A", "B", "Q") +
                         row("08:34:00.000", "X", "1.0", "5", "", "B", "B") +
                         "2000-13-40T08:00:00.000Z,X,1,1,A,B,B\n");
    CHECK(t.records.size() == 1);
    CHECK(t.errors.size() == 5);
}

TEST_CASE("parse: error cap aborts") {
    std::string body;
    for (int i = 0; i < 40; ++i) body += "bad,row\n";
    ParseOptions opts;
    opts.max_errors = 10;
    CHECK_THROWS_AS((void)parse(body, opts), InputError);
}

TEST_CASE("parse: missing required column is fatal") {
    std::istringstream in("timestamp,symbol,price,size,buyer_firm,seller_firm\n");
    CHECK_THROWS_AS((void)parse_tape(in), InputError);
    std::istringstream in2("timestamp,symbol,price,size,buyer_firm,seller_firm,aggressor,x\n");
    CHECK_THROWS_AS((void)parse_tape(in2), InputError);
}

TEST_CASE("parse: optional notional column is validated") {
    const std::string header =
        "timestamp,symbol,price,size,buyer_firm,seller_firm,aggressor,notional\n";
    {
        std::istringstream in(header + "2000-05-09T09:00:00.000Z,X,2.5,100,A,B,B,250\n");
        const Tape t = parse_tape(in);
        CHECK(t.records.size() == 1);
        CHECK(t.errors.empty());
    }
    {
        std::istringstream in(header + "2000-05-09T09:00:00.000Z,X,2.5,100,A,B,B,251\n");
        const Tape t = parse_tape(in);
        CHECK(t.records.empty());
        REQUIRE(t.errors.size() == 1);
        CHECK(t.errors[0].message.find("notional") != std::string::npos);
    }
}

TEST_CASE("rfc3339 parsing and formatting round-trip") {
    const auto ts = parse_rfc3339_ms("2000-05-09T16:29:59.999Z");
    REQUIRE(ts.has_value());
    CHECK(format_rfc3339_ms(*ts) == "2000-05-09T16:29:59.999Z");
    CHECK(parse_rfc3339_ms("2000-05-09T16:29:59Z").has_value());
    CHECK(parse_rfc3339_ms("2000-05-09T16:29:59.5Z") ==
          parse_rfc3339_ms("2000-05-09T16:29:59.500Z"));
    CHECK(!parse_rfc3339_ms("2000-05-09 16:29:59.999Z").has_value());
    CHECK(!parse_rfc3339_ms("2000-05-09T16:29:59.999").has_value());
    CHECK(!parse_rfc3339_ms("2000-02-30T00:00:00.000Z").has_value());
}

TEST_CASE("sessionize: half-hour trims drop open and close trades") {
    const Tape t = parse(row("08:15:00.000", "X", "1.0", "1", "A", "B", "B") +
                         row("09:00:00.000", "X", "1.0", "1", "A", "B", "B") +
                         row("16:10:00.000", "X", "1.0", "1", "A", "B", "B"));
    const auto sessions = sessionize(t.records, WindowSpec{});
    REQUIRE(sessions.size() == 1);
    CHECK(sessions[0].trades.size() == 1);
    CHECK(format_rfc3339_ms(sessions[0].trades[0].timestamp_ms) == "2000-05-09T09:00:00.000Z");
    CHECK(sessions[0].session_id == "2000-05-09");
}

TEST_CASE("sessionize: trim boundaries are inclusive on the retained side") {
    const Tape t = parse(row("08:29:59.999", "X", "1.0", "1", "A", "B", "B") +
                         row("08:30:00.000", "X", "1.0", "1", "A", "B", "B") +
                         row("16:00:00.000", "X", "1.0", "1", "A", "B", "B") +
                         row("16:00:00.001", "X", "1.0", "1", "A", "B", "B"));
    const auto sessions = sessionize(t.records, WindowSpec{});
    REQUIRE(sessions.size() == 1);
    REQUIRE(sessions[0].trades.size() == 2);
    CHECK(format_rfc3339_ms(sessions[0].trades[0].timestamp_ms) == "2000-05-09T08:30:00.000Z");
    CHECK(format_rfc3339_ms(sessions[0].trades[1].timestamp_ms) == "2000-05-09T16:00:00.000Z");
}

TEST_CASE("sessionize: trades spanning two days give two sessions") {
    const Tape t = parse(row("09:00:00.000", "X", "1.0", "1", "A", "B", "B") +
                         "2000-05-10T09:00:00.000Z,X,1.0,1,A,B,B\n");
    const auto sessions = sessionize(t.records, WindowSpec{});
    REQUIRE(sessions.size() == 2);
    CHECK(sessions[0].session_id == "2000-05-09");
    CHECK(sessions[1].session_id == "2000-05-10");
}

TEST_CASE("sessionize: trade-count windows discard the incomplete tail") {
    std::string body;
    for (int i = 0; i < 1200; ++i) {
        char time[32];
        std::snprintf(time, sizeof(time), "10:%02d:%02d.%03d", (i / 60) % 60, i % 60, i % 1000);
        body += row(time, "X", "1.0", "1", "A", "B", "B");
    }
    const Tape t = parse(body);
    REQUIRE(t.records.size() == 1200);
    WindowSpec spec;
    spec.kind = WindowSpec::Kind::TradeCount;
    spec.trade_count = 500;
    const auto sessions = sessionize(t.records, spec);
    // 1200 trades -> 2 full windows of 500; 200 discarded as incomplete tail.
    REQUIRE(sessions.size() == 2);
    CHECK(sessions[0].trades.size() == 500);
    CHECK(sessions[1].trades.size() == 500);
    CHECK(sessions[0].session_id == "0");
    CHECK(sessions[1].session_id == "1");
}

TEST_CASE("sessionize: unsorted input is fatal and names the offending pair") {
    const Tape t = parse(row("10:00:00.000", "X", "1.0", "1", "A", "B", "B") +
                         row("09:00:00.000", "X", "1.0", "1", "A", "B", "B"));
    try {
        (void)sessionize(t.records, WindowSpec{});
        FAIL("expected InputError");
    } catch (const InputError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("record 1") != std::string::npos);
        CHECK(msg.find("record 0") != std::string::npos);
    }

    // A symbol reappearing after another symbol's block is also unsorted.
    const Tape t2 = parse(row("09:00:00.000", "X", "1.0", "1", "A", "B", "B") +
                          row("09:00:00.000", "Y", "1.0", "1", "A", "B", "B") +
                          row("09:30:00.000", "X", "1.0", "1", "A", "B", "B"));
    CHECK_THROWS_AS((void)sessionize(t2.records, WindowSpec{}), InputError);
}

TEST_CASE("sessionize: conservation of buy, sell and total notional") {
    std::string body;
    for (int i = 0; i < 200; ++i) {
        char time[32];
        std::snprintf(time, sizeof(time), "10:%02d:%02d.000", i / 60, i % 60);
        char price[32];
        std::snprintf(price, sizeof(price), "%.4f", 5.0 + 0.37 * (i % 7));
        body += row(time, "X", price, std::to_string(1 + i * 13 % 997).c_str(),
                    ("F" + std::to_string(i % 11)).c_str(),
                    ("F" + std::to_string(i % 7)).c_str(), i % 2 ? "B" : "S");
    }
    const Tape t = parse(body);
    const auto sessions = sessionize(t.records, WindowSpec{});
    REQUIRE(sessions.size() == 1);
    const SessionTape& s = sessions[0];
    double buy_total = 0.0, sell_total = 0.0;
    for (const auto& [firm, v] : s.firm_buy_volume) buy_total += v;
    for (const auto& [firm, v] : s.firm_sell_volume) sell_total += v;
    CHECK(std::fabs(buy_total - sell_total) <= 1e-12 * s.total_notional);
    CHECK(std::fabs(buy_total - s.total_notional) <= 1e-12 * s.total_notional);
}

TEST_CASE("sessionize: idempotent on its own output") {
    std::string body;
    for (int i = 0; i < 50; ++i) {
        char time[32];
        std::snprintf(time, sizeof(time), "%02d:%02d:00.000", 9 + i / 30, i % 30);
        body += row(time, "X", "2.0", "10", "A", "B", "B");
    }
    const Tape t = parse(body);
    const auto first = sessionize(t.records, WindowSpec{});
    std::vector<TradeRecord> flattened;
    for (const auto& s : first)
        flattened.insert(flattened.end(), s.trades.begin(), s.trades.end());
    const auto second = sessionize(flattened, WindowSpec{});
    REQUIRE(second.size() == first.size());
    for (size_t i = 0; i < first.size(); ++i) {
        CHECK(second[i].session_id == first[i].session_id);
        CHECK(second[i].trades.size() == first[i].trades.size());
        CHECK(second[i].total_notional == first[i].total_notional);
        CHECK(second[i].firm_buy_volume == first[i].firm_buy_volume);
    }
}

TEST_CASE("sessionize: no retained trade inside the trimmed buffers") {
    std::string body;
    for (int i = 0; i < 500; ++i) {
        const int minute = i % (9 * 60);  // spread over 08:00..17:00
        char time[32];
        std::snprintf(time, sizeof(time), "%02d:%02d:00.000", 8 + minute / 60, minute % 60);
        body += row(time, "X", "1.0", "1", "A", "B", "B");
    }
    Tape t = parse(body);
    std::sort(t.records.begin(), t.records.end(),
              [](const TradeRecord& a, const TradeRecord& b) {
                  return a.timestamp_ms < b.timestamp_ms;
              });
    const auto sessions = sessionize(t.records, WindowSpec{});
    const auto open_plus_trim = parse_rfc3339_ms("2000-05-09T08:30:00.000Z");
    const auto close_minus_trim = parse_rfc3339_ms("2000-05-09T16:00:00.000Z");
    for (const auto& s : sessions) {
        for (const auto& tr : s.trades) {
            CHECK(tr.timestamp_ms >= *open_plus_trim);
            CHECK(tr.timestamp_ms <= *close_minus_trim);
        }
    }
}

TEST_CASE("filter: trade-count and large-move screens") {
    // 499 trades -> TooFewTrades at the default threshold.
    std::vector<SessionTape> sessions(3);
    for (int i = 0; i < 499; ++i) {
        TradeRecord r;
        r.price = 100.0;
        r.size = 1;
        r.notional = 100.0;
        sessions[0].trades.push_back(r);
    }
    // 500 flat trades -> included.
    for (int i = 0; i < 500; ++i) {
        TradeRecord r;
        r.price = 100.0;
        r.size = 1;
        r.notional = 100.0;
        sessions[1].trades.push_back(r);
    }
    // 500 trades with a +5.1% head-to-tail move -> LargeMove.
    for (int i = 0; i < 500; ++i) {
        TradeRecord r;
        r.price = i < 250 ? 100.0 : 105.1;
        r.size = 1;
        r.notional = r.price;
        sessions[2].trades.push_back(r);
    }
    const ExclusionCounts counts = filter_sessions(sessions, FilterConfig{});
    CHECK(sessions[0].excluded == Exclusion::TooFewTrades);
    CHECK(!sessions[1].excluded.has_value());
    CHECK(sessions[2].excluded == Exclusion::LargeMove);
    CHECK(counts.too_few_trades == 1);
    CHECK(counts.large_move == 1);
    CHECK(counts.included == 1);
}

TEST_CASE("filter: boundary interior -4.9% with 500 trades is included") {
    std::vector<SessionTape> sessions(1);
    for (int i = 0; i < 500; ++i) {
        TradeRecord r;
        r.price = i < 250 ? 100.0 : 95.1;
        r.size = 1;
        r.notional = r.price;
        sessions[0].trades.push_back(r);
    }
    (void)filter_sessions(sessions, FilterConfig{});
    CHECK(!sessions[0].excluded.has_value());
}
