#pragma once

#include <iosfwd>
#include <string>

#include "conc/acf.hpp"
#include "conc/flow.hpp"

namespace conc {

/// Panel CSV: symbol,session_id,dP_bps,E_b,E_s,G_b,G_s,dE,dG,dM,dV,dN,excluded
/// Included rows leave `excluded` empty; excluded rows carry the reason and
/// empty feature fields.
void write_panel_csv(const Panel& panel, std::ostream& out);
Panel read_panel_csv(std::istream& in);
Panel read_panel_file(const std::string& path);

/// Summand sidecar: symbol,session_id,side,firm,z_prime (demeaned).
void write_summands_csv(std::span<const PreparedSeries> series, const StringPool& firms,
                        std::ostream& out);
std::vector<PreparedSeries> read_summands_csv(std::istream& in, StringPool& firms);

std::string format_double(double v);

}  // namespace conc
