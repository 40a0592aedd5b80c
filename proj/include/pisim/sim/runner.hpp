#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "pisim/cost/model.hpp"
#include "pisim/errors.hpp"
#include "pisim/netarch/network.hpp"
#include "pisim/sim/config.hpp"
#include "pisim/sim/simulator.hpp"

namespace pisim::sim {

struct AggregateMetrics {
  int n_runs = 0;
  int runs_with_completions = 0;
  double mean_latency = std::numeric_limits<double>::quiet_NaN();  // mean of per-run means
  double latency_sd = std::numeric_limits<double>::quiet_NaN();    // across runs
  double ci95_half_width = std::numeric_limits<double>::quiet_NaN();
  double median_latency = std::numeric_limits<double>::quiet_NaN();
  double p95_latency = std::numeric_limits<double>::quiet_NaN();
  LatencyDecomposition decomposition;
  double completed = 0;  // per run
  double censored = 0;
  double bundles_produced = 0;
  double client_high_water = 0;  // max over runs
  double server_high_water = 0;
  std::vector<RunMetrics> runs;

  friend bool operator==(const AggregateMetrics& a, const AggregateMetrics& b) {
    const auto same = [](double x, double y) { return x == y || (std::isnan(x) && std::isnan(y)); };
    return a.n_runs == b.n_runs && a.runs_with_completions == b.runs_with_completions && same(a.mean_latency, b.mean_latency) &&
           same(a.latency_sd, b.latency_sd) && same(a.ci95_half_width, b.ci95_half_width) &&
           same(a.median_latency, b.median_latency) && same(a.p95_latency, b.p95_latency) &&
           same(a.decomposition.queue_wait, b.decomposition.queue_wait) &&
           same(a.decomposition.precompute_wait, b.decomposition.precompute_wait) &&
           same(a.decomposition.online, b.decomposition.online) && a.completed == b.completed && a.censored == b.censored &&
           a.bundles_produced == b.bundles_produced && a.client_high_water == b.client_high_water &&
           a.server_high_water == b.server_high_water;
  }
};

// Runs f(i) for i in [0, n) on up to `jobs` threads; the first exception is rethrown.
template <class Fn>
void parallel_for(int n, int jobs, Fn&& f) {
  jobs = std::max(1, std::min(jobs, n));
  if (jobs == 1) {
    for (int i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr err;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (int j = 0; j < jobs; ++j)
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          f(i);
        } catch (...) {
          std::lock_guard lk(mu);
          if (!err) err = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

inline AggregateMetrics aggregate(std::vector<RunMetrics> runs) {
  AggregateMetrics a;
  a.n_runs = static_cast<int>(runs.size());
  std::vector<double> means;
  double med = 0, p95 = 0;
  for (const auto& r : runs) {
    a.completed += static_cast<double>(r.requests.size());
    a.censored += static_cast<double>(r.censored);
    a.bundles_produced += static_cast<double>(r.bundles_produced);
    a.client_high_water = std::max(a.client_high_water, r.client_high_water);
    a.server_high_water = std::max(a.server_high_water, r.server_high_water);
    if (r.requests.empty()) continue;
    means.push_back(r.mean_latency);
    med += r.median_latency;
    p95 += r.p95_latency;
    a.decomposition.queue_wait += r.decomposition.queue_wait;
    a.decomposition.precompute_wait += r.decomposition.precompute_wait;
    a.decomposition.online += r.decomposition.online;
  }
  const double n_all = std::max<double>(1, static_cast<double>(runs.size()));
  a.completed /= n_all;
  a.censored /= n_all;
  a.bundles_produced /= n_all;
  a.runs_with_completions = static_cast<int>(means.size());
  if (!means.empty()) {
    const double n = static_cast<double>(means.size());
    double s = 0;
    for (double x : means) s += x;
    a.mean_latency = s / n;
    a.median_latency = med / n;
    a.p95_latency = p95 / n;
    a.decomposition.queue_wait /= n;
    a.decomposition.precompute_wait /= n;
    a.decomposition.online /= n;
    const auto [lo, hi] = std::minmax_element(means.begin(), means.end());
    // Spread at rounding level means every run saw the same latencies.
    if (means.size() > 1 && *hi - *lo > 1e-12 * std::abs(a.mean_latency)) {
      double ss = 0;
      for (double x : means) ss += (x - a.mean_latency) * (x - a.mean_latency);
      a.latency_sd = std::sqrt(ss / (n - 1));
      a.ci95_half_width = 1.96 * a.latency_sd / std::sqrt(n);
    } else {
      a.latency_sd = 0;
      a.ci95_half_width = 0;
    }
  }
  a.runs = std::move(runs);
  return a;
}

// n_runs independent runs with seeds seed, seed+1, ...; results do not depend on `jobs`.
inline AggregateMetrics run_many(const SimConfig& cfg, const cost::PhaseCosts& c, int jobs = 1, bool keep_runs = true) {
  cfg.check();
  check_feasible(cfg, c);
  std::vector<RunMetrics> runs(static_cast<std::size_t>(cfg.n_runs));
  parallel_for(cfg.n_runs, jobs, [&](int i) {
    SimConfig one = cfg;
    one.seed = cfg.seed + static_cast<std::uint64_t>(i);
    runs[static_cast<std::size_t>(i)] = run(one, c);
  });
  auto a = aggregate(std::move(runs));
  if (!keep_runs) a.runs.clear();
  return a;
}

// Phase costs for a configuration. Knobs other than identity describe a different workload
// than the measured rows, so they force the component model.
inline cost::PhaseCosts resolve_costs(const SimConfig& cfg, const netarch::NetworkArch& arch, const cost::CostModel& calibrated) {
  cfg.knobs.check();
  auto cm = cost::apply_optimization(calibrated, cfg.knobs);
  cm.mode = cfg.knobs.identity() ? cfg.cost_mode : cost::CostMode::ComponentScaled;
  const auto w = cost::apply_optimization(cost::workload_of(arch, cm.he_slots), cfg.knobs);
  if (cm.mode == cost::CostMode::TableDirect) {
    const auto* row = cost::find_row(cm, cfg.protocol, arch.name, arch.input.name);
    if (!row)
      throw UncalibratedTriple("no measured row for (" + std::string(cost::to_string(cfg.protocol)) + ", " + arch.name + ", " +
                               arch.input.name + ")");
    return cost::phase_costs(cfg.protocol, w, cm, cfg.bandwidth, row);
  }
  return cost::phase_costs(cfg.protocol, w, cm, cfg.bandwidth);
}

struct SweepRow {
  cost::Protocol protocol = cost::Protocol::ClientGarbler;
  double client_capacity = 0;
  double arrival_rate = 0;
  bool infeasible = false;
  bool saturated = false;  // rate above max_sustainable_rate for the configured pipeline
  std::string failure;
  AggregateMetrics metrics;
};

// Cross product of protocols x capacities x rates, ordered by that key. Infeasible cells are
// kept with the reason.
inline std::vector<SweepRow> sweep(const SimConfig& base, const std::vector<double>& rates, const std::vector<double>& capacities,
                                   const std::vector<cost::Protocol>& protocols,
                                   const std::map<cost::Protocol, cost::PhaseCosts>& costs, int jobs = 1) {
  if (rates.empty() || capacities.empty() || protocols.empty()) throw InvalidConfig("sweep lists must be non-empty");
  std::vector<SweepRow> rows;
  for (auto p : protocols)
    for (double cap : capacities)
      for (double rate : rates) {
        SweepRow r;
        r.protocol = p;
        r.client_capacity = cap;
        r.arrival_rate = rate;
        rows.push_back(r);
      }
  parallel_for(static_cast<int>(rows.size()), jobs, [&](int i) {
    auto& r = rows[static_cast<std::size_t>(i)];
    const auto it = costs.find(r.protocol);
    if (it == costs.end()) throw InvalidConfig("no phase costs for protocol " + std::string(cost::to_string(r.protocol)));
    SimConfig cfg = base;
    cfg.protocol = r.protocol;
    cfg.client_capacity = r.client_capacity;
    cfg.arrival_rate = r.arrival_rate;
    r.saturated = r.arrival_rate > cost::max_sustainable_rate(it->second, cfg.pipeline);
    try {
      r.metrics = run_many(cfg, it->second, 1, false);
    } catch (const ConfigInfeasible& e) {
      r.infeasible = true;
      r.failure = e.what();
    }
  });
  return rows;
}

}  // namespace pisim::sim
