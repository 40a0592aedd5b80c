#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <queue>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "pisim/cost/model.hpp"
#include "pisim/errors.hpp"
#include "pisim/sim/arrivals.hpp"
#include "pisim/sim/config.hpp"
#include "pisim/sim/ledger.hpp"

namespace pisim::sim {

enum class EventKind { Arrival, OfflineStart, OfflineDone, OnlineStart, OnlineDone };

inline std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::Arrival: return "arrival";
    case EventKind::OfflineStart: return "offline_start";
    case EventKind::OfflineDone: return "offline_done";
    case EventKind::OnlineStart: return "online_start";
    case EventKind::OnlineDone: return "online_done";
  }
  return "?";
}

struct Event {
  double time = 0;
  EventKind kind = EventKind::Arrival;
  std::int64_t request_id = -1;  // -1 for offline events
  friend bool operator==(const Event&, const Event&) = default;
};

struct RequestRecord {
  std::int64_t id = 0;
  double arrival_time = 0;
  double queue_exit_time = 0;  // reached the head of the queue with the online server free
  double precompute_wait = 0;  // waiting for a committed bundle (or, serially, a running offline phase)
  double online_start = 0;
  double online_done = 0;

  double latency() const { return online_done - arrival_time; }
  double queue_wait() const { return queue_exit_time - arrival_time; }
  double online_duration() const { return online_done - online_start; }
};

struct LatencyDecomposition {
  double queue_wait = 0;
  double precompute_wait = 0;
  double online = 0;
  double total() const { return queue_wait + precompute_wait + online; }
};

struct InventorySample {
  double time = 0;
  int bundles = 0;  // committed, not yet consumed
  double client_used = 0;
  double server_used = 0;
};

struct RunMetrics {
  std::vector<RequestRecord> requests;  // completed within the horizon, in FIFO order
  std::int64_t arrivals = 0;
  std::int64_t censored = 0;  // arrived but not served by the horizon
  double mean_latency = std::numeric_limits<double>::quiet_NaN();
  double median_latency = std::numeric_limits<double>::quiet_NaN();
  double p95_latency = std::numeric_limits<double>::quiet_NaN();
  LatencyDecomposition decomposition;
  std::int64_t bundles_produced = 0;
  std::int64_t bundles_consumed = 0;
  double client_high_water = 0;
  double server_high_water = 0;
  std::vector<Event> trace;               // only with SimConfig::trace
  std::vector<InventorySample> inventory; // only with SimConfig::trace

  std::int64_t served_within_horizon() const { return static_cast<std::int64_t>(requests.size()); }
};

inline LatencyDecomposition decompose_latency(const RunMetrics& m) {
  if (m.requests.empty()) throw NoCompletedRequests("no request completed within the horizon");
  LatencyDecomposition d;
  for (const auto& r : m.requests) {
    d.queue_wait += r.queue_wait();
    d.precompute_wait += r.precompute_wait;
    d.online += r.online_duration();
  }
  const double n = static_cast<double>(m.requests.size());
  d.queue_wait /= n;
  d.precompute_wait /= n;
  d.online /= n;
  return d;
}

// Linear-interpolated quantile of a sorted sample.
inline double quantile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - static_cast<double>(lo));
}

inline std::string format_bytes(double b) {
  std::ostringstream os;
  os.precision(3);
  if (b >= 1e12) os << b / 1e12 << " TB";
  else if (b >= 1e9) os << b / 1e9 << " GB";
  else if (b >= 1e6) os << b / 1e6 << " MB";
  else if (b >= 1e3) os << b / 1e3 << " KB";
  else os << b << " B";
  return os.str();
}

// Throws ConfigInfeasible if one bundle cannot fit on a party.
inline void check_feasible(const SimConfig& cfg, const cost::PhaseCosts& c) {
  const auto fail = [&](std::string_view party, double need, double cap) {
    throw ConfigInfeasible(std::string(party) + " storage of " + format_bytes(cap) + " cannot hold a single precompute bundle (" +
                           format_bytes(need) + " for " + std::string(cost::long_name(cfg.protocol)) + " " + cfg.model + "/" +
                           cfg.dataset + ")");
  };
  if (c.client_storage_delta > cfg.client_capacity) fail("client", c.client_storage_delta, cfg.client_capacity);
  if (c.server_storage_delta > cfg.server_capacity) fail("server", c.server_storage_delta, cfg.server_capacity);
}

namespace detail {

// Pending completions; arrivals come from the pre-drawn list.
struct Pending {
  double time;
  EventKind kind;
  std::int64_t id;
};

inline int priority(EventKind k) {
  // a finishing online phase frees storage first, a finished bundle can then serve a
  // simultaneous arrival
  switch (k) {
    case EventKind::OnlineDone: return 0;
    case EventKind::OfflineDone: return 1;
    case EventKind::Arrival: return 2;
    default: return 3;
  }
}

struct Later {
  bool operator()(const Pending& a, const Pending& b) const {
    return std::tuple(a.time, priority(a.kind), a.id) > std::tuple(b.time, priority(b.kind), b.id);
  }
};

}  // namespace detail

// One simulated horizon. The offline producer builds bundles one at a time whenever both
// parties can reserve a bundle's storage; the online server takes requests FIFO, each
// consuming one committed bundle. Under Pipeline::Serial the two never overlap and a waiting
// request is served before another offline phase starts.
inline RunMetrics run(const SimConfig& cfg, const cost::PhaseCosts& c) {
  cfg.check();
  check_feasible(cfg, c);
  const bool serial = cfg.pipeline == cost::Pipeline::Serial;
  const double off = c.offline_latency, on = c.online_latency;
  const double need_c = c.client_storage_delta, need_s = c.server_storage_delta;

  std::mt19937_64 rng(cfg.seed);
  const auto arrivals = generate_arrivals(cfg.arrival_rate, cfg.horizon, rng);

  RunMetrics m;
  m.arrivals = static_cast<std::int64_t>(arrivals.size());
  StorageLedger client(Party::Client, cfg.client_capacity), server(Party::Server, cfg.server_capacity);
  std::priority_queue<detail::Pending, std::vector<detail::Pending>, detail::Later> pending;
  std::deque<std::int64_t> queue;
  std::vector<RequestRecord> rec(arrivals.size());
  std::size_t next_arrival = 0;
  int stock = 0;
  bool offline_busy = false, online_busy = false;
  double last_online_done = 0;
  double now = 0;

  const auto log = [&](EventKind k, std::int64_t id) {
    if (cfg.trace) m.trace.push_back({now, k, id});
  };
  const auto sample = [&] {
    if (cfg.trace) m.inventory.push_back({now, stock, client.used(), server.used()});
  };

  const auto dispatch = [&] {
    if (!online_busy && !(serial && offline_busy) && !queue.empty() && stock > 0) {
      const auto id = queue.front();
      queue.pop_front();
      auto& r = rec[static_cast<std::size_t>(id)];
      r.queue_exit_time = std::max(r.arrival_time, last_online_done);
      r.online_start = now;
      r.precompute_wait = now - r.queue_exit_time;
      --stock;
      online_busy = true;
      log(EventKind::OnlineStart, id);
      pending.push({now + on, EventKind::OnlineDone, id});
    }
    if (!offline_busy && !(serial && online_busy) && client.can_reserve(need_c) && server.can_reserve(need_s)) {
      client.reserve(need_c);
      server.reserve(need_s);
      offline_busy = true;
      log(EventKind::OfflineStart, -1);
      pending.push({now + off, EventKind::OfflineDone, -1});
    }
  };

  dispatch();  // storage starts empty, production starts at t = 0
  while (true) {
    const double t_arr = next_arrival < arrivals.size() ? arrivals[next_arrival] : HUGE_VAL;
    const bool take_arrival =
        pending.empty() || std::tuple(t_arr, detail::priority(EventKind::Arrival)) <
                               std::tuple(pending.top().time, detail::priority(pending.top().kind));
    const double t = take_arrival ? t_arr : pending.top().time;
    if (!(t <= cfg.horizon)) break;
    now = t;
    if (take_arrival) {
      const auto id = static_cast<std::int64_t>(next_arrival++);
      rec[static_cast<std::size_t>(id)].id = id;
      rec[static_cast<std::size_t>(id)].arrival_time = now;
      queue.push_back(id);
      log(EventKind::Arrival, id);
    } else {
      const auto e = pending.top();
      pending.pop();
      if (e.kind == EventKind::OfflineDone) {
        client.commit(need_c);
        server.commit(need_s);
        offline_busy = false;
        ++stock;
        ++m.bundles_produced;
      } else {
        client.release(need_c);
        server.release(need_s);
        online_busy = false;
        last_online_done = now;
        rec[static_cast<std::size_t>(e.id)].online_done = now;
        m.requests.push_back(rec[static_cast<std::size_t>(e.id)]);
        ++m.bundles_consumed;
      }
      log(e.kind, e.id);
    }
    dispatch();
    sample();
  }

  m.censored = m.arrivals - static_cast<std::int64_t>(m.requests.size());
  m.client_high_water = client.high_water();
  m.server_high_water = server.high_water();
  if (!m.requests.empty()) {
    std::vector<double> lat;
    lat.reserve(m.requests.size());
    double sum = 0;
    for (const auto& r : m.requests) {
      lat.push_back(r.latency());
      sum += r.latency();
    }
    std::sort(lat.begin(), lat.end());
    m.mean_latency = sum / static_cast<double>(lat.size());
    m.median_latency = quantile(lat, 0.5);
    m.p95_latency = quantile(lat, 0.95);
    m.decomposition = decompose_latency(m);
  }
  return m;
}

}  // namespace pisim::sim
