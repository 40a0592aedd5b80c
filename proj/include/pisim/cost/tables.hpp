#pragma once

// Tab-separated calibration and knob tables. Column schemas: docs/file_formats.md.

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "pisim/cost/model.hpp"

namespace pisim::cost {

namespace detail {

inline std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, '\t')) out.push_back(cell);
  if (!line.empty() && line.back() == '\t') out.emplace_back();
  return out;
}

// Header-keyed rows; blank lines and '#' comments skipped.
struct TsvTable {
  std::vector<std::string> header;
  std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;  // (line, cells)

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw ParseError("missing column '" + name + "'", 1, 1);
  }
  bool has(const std::string& name) const {
    for (const auto& h : header)
      if (h == name) return true;
    return false;
  }
};

inline TsvTable read_tsv(std::istream& in) {
  TsvTable t;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto cells = split_tabs(line);
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size())
      throw ParseError("expected " + std::to_string(t.header.size()) + " columns, got " + std::to_string(cells.size()), n, 1);
    t.rows.emplace_back(n, std::move(cells));
  }
  if (t.header.empty()) throw ParseError("table has no header", n == 0 ? 1 : n, 1);
  return t;
}

inline double to_double(const std::string& s, std::size_t line, std::size_t col) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) throw ParseError("expected a number, got '" + s + "'", line, col);
  return v;
}

inline std::optional<double> to_optional(const std::string& s, std::size_t line, std::size_t col) {
  if (s == "NA" || s == "na" || s.empty()) return std::nullopt;
  return to_double(s, line, col);
}

inline bool source_is_measured(const std::string& s, std::size_t line, std::size_t col) {
  if (s == "measured") return true;
  if (s == "derived") return false;
  throw ParseError("storage source must be 'measured' or 'derived', got '" + s + "'", line, col);
}

}  // namespace detail

inline const std::vector<std::string>& measured_costs_columns() {
  static const std::vector<std::string> cols{
      "protocol",       "model",          "dataset",      "offline_s",      "online_s",
      "offline_comm_bytes", "online_comm_bytes", "client_storage_bytes", "server_storage_bytes",
      "client_storage_source", "server_storage_source", "bandwidth_bytes_per_s"};
  return cols;
}

inline std::vector<MeasuredCosts> read_measured_costs(std::istream& in) {
  const auto t = detail::read_tsv(in);
  for (const auto& c : measured_costs_columns()) (void)t.column(c);
  std::vector<MeasuredCosts> out;
  for (const auto& [line, cells] : t.rows) {
    const auto cell = [&](const char* name) -> const std::string& { return cells[t.column(name)]; };
    const auto num = [&](const char* name) { return detail::to_double(cell(name), line, t.column(name) + 1); };
    MeasuredCosts r;
    try {
      r.protocol = parse_protocol(cell("protocol"));
    } catch (const InvalidConfig& e) {
      throw ParseError(e.what(), line, t.column("protocol") + 1);
    }
    r.model = netarch::datasets::lower(cell("model"));
    r.dataset = detail::dataset_id(cell("dataset"));
    r.offline_latency = num("offline_s");
    r.online_latency = num("online_s");
    r.offline_comm = detail::to_optional(cell("offline_comm_bytes"), line, t.column("offline_comm_bytes") + 1);
    r.online_comm = detail::to_optional(cell("online_comm_bytes"), line, t.column("online_comm_bytes") + 1);
    r.client_storage = num("client_storage_bytes");
    r.server_storage = num("server_storage_bytes");
    r.client_storage_measured =
        detail::source_is_measured(cell("client_storage_source"), line, t.column("client_storage_source") + 1);
    r.server_storage_measured =
        detail::source_is_measured(cell("server_storage_source"), line, t.column("server_storage_source") + 1);
    r.measured_bandwidth = num("bandwidth_bytes_per_s");
    if (!(r.offline_latency > 0) || !(r.online_latency > 0) || r.client_storage < 0 || r.server_storage < 0 ||
        !(r.measured_bandwidth > 0))
      throw ParseError("latencies and bandwidth must be positive, storage non-negative", line, 1);
    out.push_back(r);
  }
  return out;
}

inline std::vector<MeasuredCosts> load_measured_costs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidConfig("cannot open measured-costs table '" + path + "'");
  return read_measured_costs(in);
}

inline void write_measured_costs(std::ostream& os, const std::vector<MeasuredCosts>& rows) {
  const auto& cols = measured_costs_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "\t" : "") << cols[i];
  os << "\n";
  const auto opt = [](const std::optional<double>& v) {
    std::ostringstream s;
    if (v) s << std::setprecision(6) << *v; else s << "NA";
    return s.str();
  };
  for (const auto& r : rows) {
    os << to_string(r.protocol) << "\t" << r.model << "\t" << r.dataset << "\t" << r.offline_latency << "\t"
       << r.online_latency << "\t" << opt(r.offline_comm) << "\t" << opt(r.online_comm) << "\t"
       << std::setprecision(6) << r.client_storage << "\t" << r.server_storage << "\t"
       << (r.client_storage_measured ? "measured" : "derived") << "\t"
       << (r.server_storage_measured ? "measured" : "derived") << "\t" << r.measured_bandwidth << "\n";
  }
}

// label -> knobs; factors default to 1 when a cell is empty.
inline std::map<std::string, OptimizationKnobs> read_optimizations(std::istream& in) {
  const auto t = detail::read_tsv(in);
  const auto lc = t.column("label");
  std::map<std::string, OptimizationKnobs> out;
  for (const auto& [line, cells] : t.rows) {
    OptimizationKnobs k;
    k.label = cells[lc];
    const auto factor = [&](const char* name, double& dst) {
      if (!t.has(name)) return;
      const auto c = t.column(name);
      if (!cells[c].empty()) dst = detail::to_double(cells[c], line, c + 1);
    };
    factor("relu_factor", k.relu_factor);
    factor("flop_factor", k.flop_factor);
    factor("gc_per_relu_factor", k.gc_per_relu_factor);
    factor("he_per_flop_factor", k.he_per_flop_factor);
    try {
      k.check();
    } catch (const InvalidConfig& e) {
      throw ParseError(e.what(), line, 1);
    }
    out[netarch::datasets::lower(k.label)] = k;
  }
  return out;
}

inline std::map<std::string, OptimizationKnobs> load_optimizations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidConfig("cannot open optimization table '" + path + "'");
  return read_optimizations(in);
}

// Inline knob syntax: "relu=0.2,flop=0.25,gc=0.5,he=1".
inline OptimizationKnobs parse_knobs(std::string_view text) {
  OptimizationKnobs k;
  k.label = std::string(text);
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find(',', start);
    if (end == std::string_view::npos) end = text.size();
    const auto item = text.substr(start, end - start);
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) throw InvalidConfig("knob '" + std::string(item) + "' is not key=value");
    const auto key = netarch::datasets::lower(item.substr(0, eq));
    const std::string val(item.substr(eq + 1));
    char* stop = nullptr;
    const double v = std::strtod(val.c_str(), &stop);
    if (val.empty() || stop != val.c_str() + val.size()) throw InvalidConfig("knob value '" + val + "' is not a number");
    if (key == "relu") k.relu_factor = v;
    else if (key == "flop" || key == "flops") k.flop_factor = v;
    else if (key == "gc") k.gc_per_relu_factor = v;
    else if (key == "he") k.he_per_flop_factor = v;
    else throw InvalidConfig("unknown knob '" + key + "' (valid: relu, flop, gc, he)");
    start = end + 1;
  }
  k.check();
  return k;
}

}  // namespace pisim::cost
