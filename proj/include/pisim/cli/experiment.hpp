#pragma once

// Flat key = value experiment specs. Later assignments win, so CLI overrides are applied by
// feeding more assignments through the same parser.

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "pisim/cost/model.hpp"
#include "pisim/cost/tables.hpp"
#include "pisim/errors.hpp"
#include "pisim/sim/config.hpp"

namespace pisim::cli {

struct ExperimentSpec {
  std::string name = "experiment";
  sim::SimConfig base;
  std::vector<double> rates;                                 // sweep rates; empty = base.arrival_rate
  std::vector<cost::Protocol> protocols;                     // empty = base.protocol
  std::map<cost::Protocol, std::vector<double>> capacities;  // client capacities per protocol
  std::string optimization;                                  // label from optimizations.tsv
  std::string output_dir = "results";
  std::set<std::string> formats{"csv"};

  std::vector<cost::Protocol> sweep_protocols() const {
    return protocols.empty() ? std::vector<cost::Protocol>{base.protocol} : protocols;
  }
  std::vector<double> sweep_rates() const { return rates.empty() ? std::vector<double>{base.arrival_rate} : rates; }
  std::vector<double> sweep_capacities(cost::Protocol p) const {
    const auto it = capacities.find(p);
    return it == capacities.end() || it->second.empty() ? std::vector<double>{base.client_capacity} : it->second;
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  for (const auto& x : out)
    if (x.empty()) throw InvalidConfig("empty item in list '" + std::string(s) + "'");
  return out;
}

// Number followed by an optional unit suffix from `units` (case-insensitive).
inline double scaled_number(std::string_view text, const std::map<std::string, double>& units, std::string_view what) {
  const auto s = trim(text);
  std::size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw InvalidConfig("invalid " + std::string(what) + " '" + s + "'");
  }
  auto unit = netarch::datasets::lower(trim(std::string_view(s).substr(pos)));
  const auto it = units.find(unit);
  if (it == units.end()) throw InvalidConfig("invalid " + std::string(what) + " unit in '" + s + "'");
  v *= it->second;
  if (!std::isfinite(v)) throw InvalidConfig("invalid " + std::string(what) + " '" + s + "'");
  return v;
}

}  // namespace detail

// Decimal units: 1 GB = 1e9 bytes.
inline double parse_size(std::string_view s) {
  static const std::map<std::string, double> u{{"", 1}, {"b", 1}, {"kb", 1e3}, {"mb", 1e6}, {"gb", 1e9}, {"tb", 1e12}};
  return detail::scaled_number(s, u, "size");
}

inline double parse_bandwidth(std::string_view s) {
  static const std::map<std::string, double> u{{"", 1},        {"b/s", 1},     {"kb/s", 1e3}, {"mb/s", 1e6},
                                               {"gb/s", 1e9},  {"b", 1},       {"kb", 1e3},   {"mb", 1e6},
                                               {"gb", 1e9}};
  return detail::scaled_number(s, u, "bandwidth");
}

inline double parse_duration(std::string_view s) {
  static const std::map<std::string, double> u{{"", 1}, {"s", 1}, {"m", 60}, {"min", 60}, {"h", 3600}, {"d", 86400}};
  return detail::scaled_number(s, u, "duration");
}

inline double parse_number(std::string_view s, std::string_view what) {
  static const std::map<std::string, double> u{{"", 1}};
  return detail::scaled_number(s, u, what);
}

inline std::int64_t parse_integer(std::string_view text, std::string_view what) {
  const auto s = detail::trim(text);
  std::int64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) throw InvalidConfig("invalid " + std::string(what) + " '" + s + "'");
  return v;
}

inline bool parse_bool(std::string_view text) {
  const auto s = netarch::datasets::lower(detail::trim(text));
  if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
  if (s == "0" || s == "false" || s == "no" || s == "off") return false;
  throw InvalidConfig("invalid boolean '" + std::string(text) + "'");
}

inline std::vector<cost::Protocol> parse_protocols(std::string_view s) {
  const auto n = netarch::datasets::lower(detail::trim(s));
  if (n == "both" || n == "all") return {cost::Protocol::ServerGarbler, cost::Protocol::ClientGarbler};
  std::vector<cost::Protocol> out;
  for (const auto& x : detail::split_list(s)) out.push_back(cost::parse_protocol(x));
  return out;
}

inline const std::vector<std::string>& experiment_keys() {
  static const std::vector<std::string> keys{
      "name",          "protocol",     "protocols",       "model",           "dataset",   "arch",
      "arrival_rate",  "rates",        "horizon",         "n_runs",          "seed",      "client_capacity",
      "capacities",    "sg_capacities", "cg_capacities",  "server_capacity", "bandwidth", "cost_mode",
      "knobs",         "optimization", "pipeline",        "output_dir",      "formats",   "trace"};
  return keys;
}

// Applies one assignment. Throws InvalidConfig for unknown keys or bad values.
inline void apply_setting(ExperimentSpec& e, const std::string& key_in, const std::string& value_in) {
  const auto key = netarch::datasets::lower(detail::trim(key_in));
  const auto value = detail::trim(value_in);
  auto& c = e.base;
  const auto sizes = [&] {
    std::vector<double> v;
    for (const auto& x : detail::split_list(value)) v.push_back(parse_size(x));
    return v;
  };
  if (key == "name") e.name = value;
  else if (key == "protocol") c.protocol = cost::parse_protocol(value), e.protocols.clear();
  else if (key == "protocols") e.protocols = parse_protocols(value);
  else if (key == "model") c.model = value, c.arch_path.clear();
  else if (key == "dataset") c.dataset = value;
  else if (key == "arch") c.arch_path = value;
  else if (key == "arrival_rate") c.arrival_rate = parse_number(value, "arrival_rate"), e.rates.clear();
  else if (key == "rates") {
    e.rates.clear();
    for (const auto& x : detail::split_list(value)) e.rates.push_back(parse_number(x, "rate"));
  } else if (key == "horizon") c.horizon = parse_duration(value);
  else if (key == "n_runs") c.n_runs = static_cast<int>(parse_integer(value, "n_runs"));
  else if (key == "seed") c.seed = static_cast<std::uint64_t>(parse_integer(value, "seed"));
  else if (key == "client_capacity") c.client_capacity = parse_size(value), e.capacities.clear();
  else if (key == "capacities") {
    const auto v = sizes();
    e.capacities[cost::Protocol::ServerGarbler] = v;
    e.capacities[cost::Protocol::ClientGarbler] = v;
  } else if (key == "sg_capacities") e.capacities[cost::Protocol::ServerGarbler] = sizes();
  else if (key == "cg_capacities") e.capacities[cost::Protocol::ClientGarbler] = sizes();
  else if (key == "server_capacity") c.server_capacity = parse_size(value);
  else if (key == "bandwidth") c.bandwidth = parse_bandwidth(value);
  else if (key == "cost_mode") c.cost_mode = cost::parse_cost_mode(value);
  else if (key == "knobs") {
    std::string compact;
    for (char ch : value)
      if (!std::isspace(static_cast<unsigned char>(ch))) compact += ch;
    c.knobs = cost::parse_knobs(compact);
    e.optimization.clear();
  }
  else if (key == "optimization") e.optimization = netarch::datasets::lower(value);
  else if (key == "pipeline") c.pipeline = cost::parse_pipeline(value);
  else if (key == "output_dir") e.output_dir = value;
  else if (key == "formats") {
    e.formats.clear();
    for (const auto& f : detail::split_list(value)) {
      const auto l = netarch::datasets::lower(f);
      if (l != "csv" && l != "json") throw InvalidConfig("unknown output format '" + f + "' (valid: csv, json)");
      e.formats.insert(l);
    }
  } else if (key == "trace") c.trace = parse_bool(value);
  else {
    std::string valid;
    for (const auto& k : experiment_keys()) valid += (valid.empty() ? "" : ", ") + k;
    throw InvalidConfig("unknown experiment key '" + key + "' (valid: " + valid + ")");
  }
}

// "key=value"
inline void apply_assignment(ExperimentSpec& e, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) throw InvalidConfig("expected key=value, got '" + std::string(assignment) + "'");
  apply_setting(e, std::string(assignment.substr(0, eq)), std::string(assignment.substr(eq + 1)));
}

inline void read_experiment(std::istream& in, ExperimentSpec& e) {
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
    if (detail::trim(line).empty()) continue;
    try {
      apply_assignment(e, line);
    } catch (const InvalidConfig& err) {
      throw ParseError(err.what(), n, 1);
    }
  }
}

inline ExperimentSpec parse_experiment(std::string_view text) {
  ExperimentSpec e;
  std::istringstream in{std::string(text)};
  read_experiment(in, e);
  return e;
}

inline ExperimentSpec load_experiment(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidConfig("cannot open experiment spec '" + path + "'");
  ExperimentSpec e;
  read_experiment(in, e);
  return e;
}

}  // namespace pisim::cli
