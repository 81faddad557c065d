#include "conc/panel_io.hpp"

#include <array>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>

#include "conc/errors.hpp"

namespace conc {

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

namespace {

constexpr char kPanelHeader[] =
    "symbol,session_id,dP_bps,E_b,E_s,G_b,G_s,dE,dG,dM,dV,dN,excluded";

void write_row(std::ostream& out, const SessionFeatures& r) {
    out << r.symbol << ',' << r.session_id << ',';
    if (!r.excluded) {
        out << format_double(r.dP_bps) << ',' << format_double(r.E_b) << ','
            << format_double(r.E_s) << ',' << format_double(r.G_b) << ','
            << format_double(r.G_s) << ',' << format_double(r.dE) << ','
            << format_double(r.dG) << ',' << format_double(r.dM) << ','
            << format_double(r.dV) << ',' << format_double(r.dN) << ',';
    } else {
        out << ",,,,,,,,,," << exclusion_name(*r.excluded);
    }
    out << '\n';
}

size_t split(std::string_view line, std::string_view* out, size_t max_fields) {
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

double parse_field(std::string_view s, size_t line_no) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw InputError("panel: malformed number at line " + std::to_string(line_no));
    return v;
}

}  // namespace

void write_panel_csv(const Panel& panel, std::ostream& out) {
    out << kPanelHeader << '\n';
    for (const auto& r : panel.rows) write_row(out, r);
    for (const auto& r : panel.excluded_rows) write_row(out, r);
}

Panel read_panel_csv(std::istream& in) {
    Panel panel;
    panel.standardized = true;  // the interchange format carries standardized rows
    std::string line;
    if (!std::getline(in, line)) throw InputError("panel: empty input");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kPanelHeader)
        throw InputError(std::string("panel: header must be '") + kPanelHeader + "'");
    size_t line_no = 1;
    std::array<std::string_view, 14> f;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (split(line, f.data(), f.size()) != 13)
            throw InputError("panel: expected 13 fields at line " + std::to_string(line_no));
        SessionFeatures r;
        r.symbol = std::string(f[0]);
        r.session_id = std::string(f[1]);
        if (const auto day = parse_date(r.session_id)) r.day_index = *day;
        const std::string_view excluded = f[12];
        if (!excluded.empty()) {
            if (excluded == "TooFewTrades") r.excluded = Exclusion::TooFewTrades;
            else if (excluded == "LargeMove") r.excluded = Exclusion::LargeMove;
            else if (excluded == "ZeroVariance") r.excluded = Exclusion::ZeroVariance;
            else
                throw InputError("panel: unknown exclusion '" + std::string(excluded) +
                                 "' at line " + std::to_string(line_no));
            panel.excluded_rows.push_back(std::move(r));
            switch (*panel.excluded_rows.back().excluded) {
                case Exclusion::TooFewTrades: ++panel.exclusions.too_few_trades; break;
                case Exclusion::LargeMove: ++panel.exclusions.large_move; break;
                case Exclusion::ZeroVariance: ++panel.exclusions.zero_variance; break;
            }
            continue;
        }
        r.dP_bps = parse_field(f[2], line_no);
        r.E_b = parse_field(f[3], line_no);
        r.E_s = parse_field(f[4], line_no);
        r.G_b = parse_field(f[5], line_no);
        r.G_s = parse_field(f[6], line_no);
        r.dE = parse_field(f[7], line_no);
        r.dG = parse_field(f[8], line_no);
        r.dM = parse_field(f[9], line_no);
        r.dV = parse_field(f[10], line_no);
        r.dN = parse_field(f[11], line_no);
        panel.rows.push_back(std::move(r));
        ++panel.exclusions.included;
    }
    return panel;
}

Panel read_panel_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open panel file: " + path);
    return read_panel_csv(in);
}

void write_summands_csv(std::span<const PreparedSeries> series, const StringPool& firms,
                        std::ostream& out) {
    out << "symbol,session_id,side,firm,z_prime\n";
    for (const auto& s : series) {
        const char* side = s.side == Side::Buy ? "B" : "S";
        for (const auto& sess : s.sessions) {
            for (const auto& [firm, zp] : sess.z) {
                out << s.symbol << ',' << sess.session_id << ',' << side << ','
                    << firms.name(firm) << ',' << format_double(zp) << '\n';
            }
        }
    }
}

std::vector<PreparedSeries> read_summands_csv(std::istream& in, StringPool& firms) {
    std::string line;
    if (!std::getline(in, line)) throw InputError("summands: empty input");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "symbol,session_id,side,firm,z_prime")
        throw InputError("summands: unexpected header");

    std::vector<PreparedSeries> out;
    size_t line_no = 1;
    std::array<std::string_view, 6> f;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (split(line, f.data(), f.size()) != 5)
            throw InputError("summands: expected 5 fields at line " + std::to_string(line_no));
        const std::string symbol(f[0]);
        const std::string session(f[1]);
        Side side;
        if (f[2] == "B") side = Side::Buy;
        else if (f[2] == "S") side = Side::Sell;
        else throw InputError("summands: side must be B or S at line " + std::to_string(line_no));
        const FirmId firm = firms.intern(f[3]);
        const double zp = parse_field(f[4], line_no);

        // Rows arrive grouped by (symbol, side), sessions in order.
        if (out.empty() || out.back().symbol != symbol || out.back().side != side) {
            PreparedSeries s;
            s.symbol = symbol;
            s.side = side;
            out.push_back(std::move(s));
        }
        auto& sessions = out.back().sessions;
        if (sessions.empty() || sessions.back().session_id != session) {
            SummandSession sess;
            sess.session_id = session;
            if (const auto day = parse_date(session)) sess.day_index = *day;
            sessions.push_back(std::move(sess));
        }
        sessions.back().z.emplace_back(firm, zp);
        sessions.back().e_raw += zp;
    }
    return out;
}

}  // namespace conc
