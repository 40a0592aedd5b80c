#pragma once

#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pisim/sim/config.hpp"
#include "pisim/sim/runner.hpp"
#include "pisim/sim/simulator.hpp"

namespace pisim::sim {

inline constexpr const char* kMetricsSchema = "pisim.metrics.v1";

namespace detail {

inline std::string num(double x) {
  if (std::isnan(x)) return "NA";
  std::ostringstream os;
  os << std::setprecision(10) << x;
  return os.str();
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline nlohmann::json num_json(double x) { return std::isnan(x) ? nlohmann::json(nullptr) : nlohmann::json(x); }

}  // namespace detail

inline const std::vector<std::string>& aggregate_csv_columns() {
  static const std::vector<std::string> cols{
      "protocol",        "model",           "dataset",          "pipeline",          "arrival_rate",
      "client_capacity", "server_capacity", "bandwidth",        "horizon",           "n_runs",
      "seed",            "mean_latency",    "ci95_half_width",  "median_latency",    "p95_latency",
      "queue_wait",      "precompute_wait", "online",           "completed_per_run", "censored_per_run",
      "bundles_per_run", "client_high_water", "server_high_water"};
  return cols;
}

inline const std::vector<std::string>& run_csv_columns() {
  static const std::vector<std::string> cols{"protocol",    "model",          "dataset",        "arrival_rate",
                                              "client_capacity", "run",       "seed",           "arrivals",
                                              "completed",  "censored",       "mean_latency",   "median_latency",
                                              "p95_latency", "queue_wait",    "precompute_wait", "online",
                                              "bundles_produced", "client_high_water", "server_high_water"};
  return cols;
}

inline const std::vector<std::string>& sweep_csv_columns() {
  static const std::vector<std::string> cols{"protocol", "model",     "dataset",    "client_capacity", "arrival_rate",
                                             "statistic", "value",    "saturated",  "infeasible",      "failures"};
  return cols;
}

inline void write_header(std::ostream& os, const std::vector<std::string>& cols) {
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << "\n";
}

inline void write_aggregate_csv(std::ostream& os, const SimConfig& cfg, const AggregateMetrics& a, bool header = true) {
  using detail::num;
  if (header) write_header(os, aggregate_csv_columns());
  os << cost::to_string(cfg.protocol) << "," << detail::csv_field(cfg.model) << "," << detail::csv_field(cfg.dataset) << ","
     << cost::to_string(cfg.pipeline) << "," << num(cfg.arrival_rate) << "," << num(cfg.client_capacity) << ","
     << num(cfg.server_capacity) << "," << num(cfg.bandwidth) << "," << num(cfg.horizon) << "," << a.n_runs << "," << cfg.seed
     << "," << num(a.mean_latency) << "," << num(a.ci95_half_width) << "," << num(a.median_latency) << ","
     << num(a.p95_latency) << "," << num(a.decomposition.queue_wait) << "," << num(a.decomposition.precompute_wait) << ","
     << num(a.decomposition.online) << "," << num(a.completed) << "," << num(a.censored) << "," << num(a.bundles_produced)
     << "," << num(a.client_high_water) << "," << num(a.server_high_water) << "\n";
}

inline void write_runs_csv(std::ostream& os, const SimConfig& cfg, const AggregateMetrics& a) {
  using detail::num;
  write_header(os, run_csv_columns());
  for (std::size_t i = 0; i < a.runs.size(); ++i) {
    const auto& r = a.runs[i];
    const bool any = !r.requests.empty();
    os << cost::to_string(cfg.protocol) << "," << detail::csv_field(cfg.model) << "," << detail::csv_field(cfg.dataset) << ","
       << num(cfg.arrival_rate) << "," << num(cfg.client_capacity) << "," << i << "," << cfg.seed + i << "," << r.arrivals
       << "," << r.requests.size() << "," << r.censored << "," << num(r.mean_latency) << "," << num(r.median_latency) << ","
       << num(r.p95_latency) << "," << (any ? num(r.decomposition.queue_wait) : "NA") << ","
       << (any ? num(r.decomposition.precompute_wait) : "NA") << "," << (any ? num(r.decomposition.online) : "NA") << ","
       << r.bundles_produced << "," << num(r.client_high_water) << "," << num(r.server_high_water) << "\n";
  }
}

inline std::vector<std::pair<std::string, double>> sweep_statistics(const AggregateMetrics& a) {
  return {{"mean_latency", a.mean_latency},
          {"ci95_half_width", a.ci95_half_width},
          {"median_latency", a.median_latency},
          {"p95_latency", a.p95_latency},
          {"queue_wait", a.decomposition.queue_wait},
          {"precompute_wait", a.decomposition.precompute_wait},
          {"online", a.decomposition.online},
          {"completed_per_run", a.completed},
          {"censored_per_run", a.censored}};
}

inline void write_sweep_csv(std::ostream& os, const SimConfig& base, const std::vector<SweepRow>& rows) {
  using detail::num;
  write_header(os, sweep_csv_columns());
  const AggregateMetrics empty;
  for (const auto& r : rows) {
    for (const auto& [stat, value] : sweep_statistics(r.infeasible ? empty : r.metrics)) {
      os << cost::to_string(r.protocol) << "," << detail::csv_field(base.model) << "," << detail::csv_field(base.dataset) << ","
         << num(r.client_capacity) << "," << num(r.arrival_rate) << "," << stat << "," << (r.infeasible ? "NA" : num(value))
         << "," << (r.saturated ? "true" : "false") << "," << (r.infeasible ? "true" : "false") << ","
         << detail::csv_field(r.failure) << "\n";
    }
  }
}

inline nlohmann::json config_json(const SimConfig& cfg) {
  return {{"protocol", cost::to_string(cfg.protocol)},
          {"model", cfg.model},
          {"dataset", cfg.dataset},
          {"arch_path", cfg.arch_path},
          {"arrival_rate", cfg.arrival_rate},
          {"horizon", cfg.horizon},
          {"n_runs", cfg.n_runs},
          {"seed", cfg.seed},
          {"client_capacity", cfg.client_capacity},
          {"server_capacity", cfg.server_capacity},
          {"bandwidth", cfg.bandwidth},
          {"cost_mode", cost::to_string(cfg.cost_mode)},
          {"pipeline", cost::to_string(cfg.pipeline)},
          {"knobs",
           {{"relu_factor", cfg.knobs.relu_factor},
            {"flop_factor", cfg.knobs.flop_factor},
            {"gc_per_relu_factor", cfg.knobs.gc_per_relu_factor},
            {"he_per_flop_factor", cfg.knobs.he_per_flop_factor}}}};
}

inline nlohmann::json aggregate_json(const SimConfig& cfg, const AggregateMetrics& a) {
  using detail::num_json;
  return {{"schema", kMetricsSchema},
          {"config", config_json(cfg)},
          {"n_runs", a.n_runs},
          {"runs_with_completions", a.runs_with_completions},
          {"mean_latency", num_json(a.mean_latency)},
          {"latency_sd", num_json(a.latency_sd)},
          {"ci95_half_width", num_json(a.ci95_half_width)},
          {"median_latency", num_json(a.median_latency)},
          {"p95_latency", num_json(a.p95_latency)},
          {"decomposition",
           {{"queue_wait", num_json(a.decomposition.queue_wait)},
            {"precompute_wait", num_json(a.decomposition.precompute_wait)},
            {"online", num_json(a.decomposition.online)}}},
          {"completed_per_run", a.completed},
          {"censored_per_run", a.censored},
          {"bundles_per_run", a.bundles_produced},
          {"client_high_water", a.client_high_water},
          {"server_high_water", a.server_high_water}};
}

inline void write_trace_jsonl(std::ostream& os, const RunMetrics& m) {
  for (const auto& e : m.trace) {
    nlohmann::json j{{"time", e.time}, {"kind", to_string(e.kind)}};
    if (e.request_id >= 0) j["request_id"] = e.request_id;
    os << j.dump() << "\n";
  }
}

}  // namespace pisim::sim
