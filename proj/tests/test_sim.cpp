#include <gtest/gtest.h>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "pisim/cli/resolve.hpp"
#include "pisim/sim/export.hpp"
#include "pisim/sim/runner.hpp"

using namespace pisim;
using namespace pisim::sim;

namespace {

const cost::CostModel& calibrated() {
  static const auto cm = cli::load_cost_model(std::string(PISIM_SOURCE_DIR) + "/configs");
  return cm;
}

cost::PhaseCosts costs_for(cost::Protocol p, const std::string& model, const std::string& dataset, double bandwidth = cost::kDefaultBandwidth) {
  SimConfig c;
  c.protocol = p;
  c.model = model;
  c.dataset = dataset;
  c.bandwidth = bandwidth;
  return resolve_costs(c, netarch::build_preset(model, dataset), calibrated());
}

cost::PhaseCosts synthetic(double off, double on, double client_bytes, double server_bytes = 1) {
  cost::PhaseCosts c;
  c.offline_latency = off;
  c.online_latency = on;
  c.client_storage_delta = client_bytes;
  c.server_storage_delta = server_bytes;
  return c;
}

struct Served {
  double arrival, start, done;
};

// Concurrent producer holding at most `slots` bundles (in production or waiting), FIFO single
// online server. Bundle k starts when bundle k-1 is done and, once the store is full, when the
// request that consumed bundle k-slots finishes; request i uses bundle i.
std::vector<Served> concurrent_oracle(const std::vector<double>& arr, double off, double on, std::size_t slots, double horizon) {
  std::vector<double> bundle_done, req_done;
  std::vector<Served> out;
  double prev_done = 0;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    while (bundle_done.size() <= i) {
      const std::size_t k = bundle_done.size();
      double start = k == 0 ? 0 : bundle_done[k - 1];
      if (k >= slots) {
        if (k - slots >= req_done.size()) break;  // its storage is freed by a request not yet modelled
        start = std::max(start, req_done[k - slots]);
      }
      bundle_done.push_back(start + off);
    }
    if (bundle_done.size() <= i) break;
    const double start = std::max({arr[i], prev_done, bundle_done[i]});
    const double done = start + on;
    if (done > horizon) break;
    out.push_back({arr[i], start, done});
    req_done.push_back(done);
    prev_done = done;
  }
  return out;
}

// One machine that alternates: serve the head request if it has arrived and a bundle is in
// stock, otherwise produce a bundle. Unlimited storage.
std::vector<Served> serial_oracle(const std::vector<double>& arr, double off, double on, double horizon) {
  std::vector<Served> out;
  double t = 0;
  int stock = 0;
  std::size_t i = 0;
  while (i < arr.size()) {
    if (arr[i] <= t && stock > 0) {
      if (t + on > horizon) break;
      out.push_back({arr[i], t, t + on});
      t += on;
      --stock;
      ++i;
    } else {
      t += off;
      if (t > horizon) break;
      ++stock;
    }
  }
  return out;
}

std::vector<double> arrivals_of(const SimConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  return generate_arrivals(cfg.arrival_rate, cfg.horizon, rng);
}

void expect_matches(const RunMetrics& m, const std::vector<Served>& want) {
  ASSERT_EQ(m.requests.size(), want.size());
  for (std::size_t i = 0; i < want.size(); ++i) {
    EXPECT_NEAR(m.requests[i].arrival_time, want[i].arrival, 1e-9);
    EXPECT_NEAR(m.requests[i].online_start, want[i].start, 1e-6) << "request " << i;
    EXPECT_NEAR(m.requests[i].online_done, want[i].done, 1e-6) << "request " << i;
  }
}

}  // namespace

// --- arrivals and storage -----------------------------------------------------------------

TEST(Arrivals, PoissonStatistics) {
  std::mt19937_64 rng(1);
  const double rate = 0.01, horizon = 1e6;
  const auto a = generate_arrivals(rate, horizon, rng);
  const double n = rate * horizon;
  EXPECT_NEAR(static_cast<double>(a.size()), n, 3 * std::sqrt(n));
  EXPECT_TRUE(std::is_sorted(a.begin(), a.end()));
  EXPECT_GE(a.front(), 0);
  EXPECT_LT(a.back(), horizon);
  double sum = 0, sq = 0;
  for (std::size_t i = 1; i < a.size(); ++i) {
    const double g = a[i] - a[i - 1];
    sum += g;
    sq += g * g;
  }
  const double k = static_cast<double>(a.size() - 1), mean = sum / k;
  // exponential gaps: mean 1/rate, sd 1/rate
  EXPECT_NEAR(mean, 1 / rate, 3 * (1 / rate) / std::sqrt(k));
  EXPECT_NEAR(std::sqrt(sq / k - mean * mean), 1 / rate, 0.05 / rate);
}

TEST(Arrivals, EdgeCases) {
  std::mt19937_64 rng(1);
  EXPECT_TRUE(generate_arrivals(0, 100, rng).empty());
  EXPECT_THROW(generate_arrivals(-1, 100, rng), InvalidConfig);
}

TEST(Ledger, ReserveCommitRelease) {
  StorageLedger l(Party::Client, 10);
  l.reserve(4);
  l.reserve(4);
  EXPECT_FALSE(l.can_reserve(4));
  EXPECT_THROW(l.reserve(4), Error);
  l.commit(4);
  EXPECT_DOUBLE_EQ(l.reserved(), 4);
  EXPECT_DOUBLE_EQ(l.committed(), 4);
  l.release(4);
  EXPECT_DOUBLE_EQ(l.used(), 4);
  EXPECT_DOUBLE_EQ(l.high_water(), 8);
  EXPECT_THROW(l.release(4), Error);
}

TEST(Config, Validation) {
  SimConfig c;
  c.arrival_rate = 1e-3;
  EXPECT_NO_THROW(c.check());
  for (auto bad : {-1.0, std::nan("")}) {
    auto d = c;
    d.arrival_rate = bad;
    EXPECT_THROW(d.check(), InvalidConfig);
  }
  auto d = c;
  d.horizon = 0;
  EXPECT_THROW(d.check(), InvalidConfig);
  d = c;
  d.n_runs = 0;
  EXPECT_THROW(d.check(), InvalidConfig);
  d = c;
  d.client_capacity = 0;
  EXPECT_THROW(d.check(), InvalidConfig);
  d = c;
  d.bandwidth = -5;
  EXPECT_THROW(d.check(), InvalidConfig);
}

// --- the event loop against independent recursions ----------------------------------------

TEST(Simulator, ConcurrentUnlimitedStorageMatchesOracle) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SimConfig cfg;
    cfg.arrival_rate = 0.08;
    cfg.horizon = 5000;
    cfg.seed = seed;
    cfg.client_capacity = 1e12;
    cfg.pipeline = cost::Pipeline::Concurrent;
    const auto c = synthetic(10, 3, 1);
    expect_matches(run(cfg, c), concurrent_oracle(arrivals_of(cfg), 10, 3, 1'000'000'000'000, cfg.horizon));
  }
}

TEST(Simulator, ConcurrentBoundedStorageMatchesOracle) {
  for (std::size_t slots : {1u, 2u, 5u}) {
    SimConfig cfg;
    cfg.arrival_rate = 0.05;
    cfg.horizon = 20000;
    cfg.seed = 7 + slots;
    cfg.client_capacity = 100.0 * static_cast<double>(slots) + 50;  // room for `slots` bundles, not one more
    const auto c = synthetic(12, 4, 100);
    const auto m = run(cfg, c);
    expect_matches(m, concurrent_oracle(arrivals_of(cfg), 12, 4, slots, cfg.horizon));
    EXPECT_LE(m.client_high_water, 100.0 * static_cast<double>(slots));
  }
}

TEST(Simulator, SerialMatchesOracle) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SimConfig cfg;
    cfg.arrival_rate = 0.05;
    cfg.horizon = 5000;
    cfg.seed = seed;
    cfg.client_capacity = 1e12;
    cfg.pipeline = cost::Pipeline::Serial;
    expect_matches(run(cfg, synthetic(6, 2, 1)), serial_oracle(arrivals_of(cfg), 6, 2, cfg.horizon));
  }
}

TEST(Simulator, ConservationAndCausality) {
  SimConfig cfg;
  cfg.arrival_rate = 0.2;
  cfg.horizon = 3000;
  cfg.client_capacity = 350;
  cfg.trace = true;
  const auto c = synthetic(4, 3, 100);
  const auto m = run(cfg, c);
  EXPECT_EQ(m.arrivals, m.served_within_horizon() + m.censored);
  EXPECT_EQ(m.bundles_consumed, m.served_within_horizon());
  EXPECT_GE(m.bundles_produced, m.bundles_consumed);
  EXPECT_GT(m.censored, 0);  // overloaded
  for (std::size_t i = 0; i < m.requests.size(); ++i) {
    const auto& r = m.requests[i];
    EXPECT_LE(r.arrival_time, r.queue_exit_time);
    EXPECT_LE(r.queue_exit_time, r.online_start);
    EXPECT_NEAR(r.online_duration(), 3, 1e-9);
    if (i > 0) {
      EXPECT_GE(r.online_start, m.requests[i - 1].online_done - 1e-9);  // one online server
      EXPECT_GT(r.arrival_time, m.requests[i - 1].arrival_time);        // FIFO
    }
  }
  for (std::size_t i = 1; i < m.trace.size(); ++i) EXPECT_GE(m.trace[i].time, m.trace[i - 1].time);
  for (const auto& s : m.inventory) {
    EXPECT_GE(s.bundles, 0);
    EXPECT_LE(s.client_used, cfg.client_capacity);
  }
}

TEST(Simulator, DecompositionSumsToMean) {
  SimConfig cfg;
  cfg.arrival_rate = 0.1;
  cfg.horizon = 10000;
  cfg.client_capacity = 500;
  const auto m = run(cfg, synthetic(8, 2, 100));
  EXPECT_NEAR(m.decomposition.total(), m.mean_latency, 1e-9 * m.mean_latency);
  EXPECT_GT(m.decomposition.precompute_wait, 0);
  EXPECT_NEAR(m.decomposition.online, 2, 1e-9);
  EXPECT_THROW(decompose_latency(RunMetrics{}), NoCompletedRequests);
}

TEST(Simulator, NoArrivals) {
  SimConfig cfg;
  cfg.arrival_rate = 0;
  cfg.horizon = 100;
  const auto m = run(cfg, synthetic(10, 1, 1));
  EXPECT_EQ(m.arrivals, 0);
  EXPECT_TRUE(std::isnan(m.mean_latency));
  EXPECT_EQ(m.bundles_produced, 10);
  const auto a = run_many([&] { auto c = cfg; c.n_runs = 3; return c; }(), synthetic(10, 1, 1));
  EXPECT_EQ(a.runs_with_completions, 0);
  EXPECT_TRUE(std::isnan(a.mean_latency));
}

// --- calibrated configurations ------------------------------------------------------------

TEST(Simulator, InfeasibleWhenOneBundleDoesNotFit) {
  const auto c = costs_for(cost::Protocol::ServerGarbler, "resnet18", "cifar100");
  SimConfig cfg;
  cfg.protocol = cost::Protocol::ServerGarbler;
  cfg.model = "resnet18";
  cfg.arrival_rate = 1e-3;
  cfg.client_capacity = 8e9;
  ASSERT_GT(c.client_storage_delta, 8e9);
  EXPECT_THROW(run(cfg, c), ConfigInfeasible);
  EXPECT_THROW(run_many(cfg, c), ConfigInfeasible);
}

TEST(Simulator, ServerGarblerEightGigabytesHoldsOneBundle) {
  const auto c = costs_for(cost::Protocol::ServerGarbler, "resnet32", "cifar100");
  SimConfig cfg;
  cfg.protocol = cost::Protocol::ServerGarbler;
  cfg.arrival_rate = 2e-3;
  cfg.horizon = 6 * 3600;
  cfg.client_capacity = 8e9;
  ASSERT_LT(c.client_storage_delta, 8e9);
  ASSERT_GT(2 * c.client_storage_delta, 8e9);
  const auto m = run(cfg, c);
  EXPECT_DOUBLE_EQ(m.client_high_water, c.client_storage_delta);
}

TEST(Simulator, LowRateClientGarblerLatencyIsOnline) {
  const auto c = costs_for(cost::Protocol::ClientGarbler, "resnet32", "cifar100");
  SimConfig cfg;
  cfg.protocol = cost::Protocol::ClientGarbler;
  cfg.arrival_rate = 1e-5;
  cfg.horizon = 30 * 86400;
  cfg.seed = 3;
  const auto m = run(cfg, c);
  ASSERT_GT(m.requests.size(), 10u);
  for (const auto& r : m.requests) EXPECT_NEAR(r.latency(), c.online_latency, 1e-6);
}

TEST(Simulator, MonotoneInCapacity) {
  const auto c = costs_for(cost::Protocol::ServerGarbler, "resnet32", "cifar100");
  SimConfig cfg;
  cfg.protocol = cost::Protocol::ServerGarbler;
  cfg.arrival_rate = 2e-3;
  cfg.horizon = 8 * 3600;
  cfg.n_runs = 5;
  double prev = HUGE_VAL;
  for (double cap : {8e9, 16e9, 32e9, 64e9}) {
    cfg.client_capacity = cap;
    const auto a = run_many(cfg, c, 4);
    EXPECT_LE(a.mean_latency, prev * (1 + 1e-12)) << cap;
    prev = a.mean_latency;
  }
}

TEST(Simulator, MonotoneInBandwidth) {
  SimConfig cfg;
  cfg.protocol = cost::Protocol::ClientGarbler;
  cfg.arrival_rate = 2e-3;
  cfg.horizon = 8 * 3600;
  cfg.n_runs = 5;
  double prev = HUGE_VAL;
  for (double bw : {50e6, 100e6, 1e9}) {
    cfg.bandwidth = bw;
    const auto a = run_many(cfg, costs_for(cfg.protocol, "resnet32", "cifar100", bw), 4);
    EXPECT_LT(a.mean_latency, prev) << bw;
    prev = a.mean_latency;
  }
}

// --- replication --------------------------------------------------------------------------

TEST(Runner, SingleRunEqualsRun) {
  SimConfig cfg;
  cfg.arrival_rate = 0.05;
  cfg.horizon = 2000;
  cfg.n_runs = 1;
  cfg.client_capacity = 300;
  const auto c = synthetic(10, 2, 100);
  const auto a = run_many(cfg, c);
  const auto m = run(cfg, c);
  EXPECT_EQ(a.mean_latency, m.mean_latency);
  EXPECT_EQ(a.median_latency, m.median_latency);
  EXPECT_EQ(a.ci95_half_width, 0);
  EXPECT_EQ(a.completed, static_cast<double>(m.requests.size()));
}

TEST(Runner, SeedsAndConfidenceInterval) {
  SimConfig cfg;
  cfg.arrival_rate = 0.05;
  cfg.horizon = 2000;
  cfg.n_runs = 8;
  cfg.seed = 40;
  cfg.client_capacity = 300;
  const auto c = synthetic(10, 2, 100);
  const auto a = run_many(cfg, c);
  std::vector<double> means;
  for (int i = 0; i < 8; ++i) {
    auto one = cfg;
    one.seed = 40 + static_cast<std::uint64_t>(i);
    means.push_back(run(one, c).mean_latency);
    EXPECT_EQ(a.runs[static_cast<std::size_t>(i)].mean_latency, means.back());
  }
  double mean = 0, ss = 0;
  for (double x : means) mean += x / 8;
  for (double x : means) ss += (x - mean) * (x - mean);
  EXPECT_NEAR(a.mean_latency, mean, 1e-12 * mean);
  EXPECT_NEAR(a.ci95_half_width, 1.96 * std::sqrt(ss / 7) / std::sqrt(8.0), 1e-9);
}

TEST(Runner, DeterministicAndJobsInvariant) {
  SimConfig cfg;
  cfg.arrival_rate = 0.05;
  cfg.horizon = 3000;
  cfg.n_runs = 12;
  cfg.client_capacity = 300;
  const auto c = synthetic(10, 2, 100);
  const auto a1 = run_many(cfg, c, 1);
  EXPECT_EQ(a1, run_many(cfg, c, 1));
  EXPECT_EQ(a1, run_many(cfg, c, 4));
  EXPECT_EQ(a1, run_many(cfg, c, 64));
}

TEST(Runner, SweepFlags) {
  SimConfig base;
  base.horizon = 3600;
  base.n_runs = 2;
  std::map<cost::Protocol, cost::PhaseCosts> costs{
      {cost::Protocol::ServerGarbler, costs_for(cost::Protocol::ServerGarbler, "resnet32", "cifar100")},
      {cost::Protocol::ClientGarbler, costs_for(cost::Protocol::ClientGarbler, "resnet32", "cifar100")}};
  const double msr_sg = cost::max_sustainable_rate(costs[cost::Protocol::ServerGarbler], base.pipeline);
  const std::vector<double> rates{msr_sg / 2, msr_sg * 2};
  const auto rows = sweep(base, rates, {1e9, 16e9}, {cost::Protocol::ServerGarbler, cost::Protocol::ClientGarbler}, costs, 4);
  ASSERT_EQ(rows.size(), 8u);
  EXPECT_EQ(rows[0].protocol, cost::Protocol::ServerGarbler);
  EXPECT_EQ(rows[0].client_capacity, 1e9);
  EXPECT_EQ(rows[1].arrival_rate, rates[1]);
  for (const auto& r : rows) {
    const bool sg = r.protocol == cost::Protocol::ServerGarbler;
    EXPECT_EQ(r.infeasible, sg && r.client_capacity == 1e9);
    if (r.infeasible) {
      EXPECT_NE(r.failure.find("client storage"), std::string::npos);
    }
    EXPECT_EQ(r.saturated, r.arrival_rate > cost::max_sustainable_rate(costs[r.protocol], base.pipeline));
  }
  EXPECT_FALSE(rows[2].saturated);
  EXPECT_TRUE(rows[3].saturated);
  EXPECT_THROW(sweep(base, {}, {1e9}, {cost::Protocol::ServerGarbler}, costs), InvalidConfig);
}

// --- export -------------------------------------------------------------------------------

TEST(Export, CsvHeaders) {
  SimConfig cfg;
  cfg.arrival_rate = 0.05;
  cfg.horizon = 1000;
  cfg.n_runs = 2;
  const auto a = run_many(cfg, synthetic(10, 2, 100));
  std::ostringstream agg, runs, sw;
  write_aggregate_csv(agg, cfg, a);
  write_runs_csv(runs, cfg, a);
  write_sweep_csv(sw, cfg, {});
  const auto first = [](const std::ostringstream& os) { return os.str().substr(0, os.str().find('\n')); };
  EXPECT_EQ(first(agg),
            "protocol,model,dataset,pipeline,arrival_rate,client_capacity,server_capacity,bandwidth,horizon,n_runs,seed,"
            "mean_latency,ci95_half_width,median_latency,p95_latency,queue_wait,precompute_wait,online,completed_per_run,"
            "censored_per_run,bundles_per_run,client_high_water,server_high_water");
  EXPECT_EQ(first(runs),
            "protocol,model,dataset,arrival_rate,client_capacity,run,seed,arrivals,completed,censored,mean_latency,"
            "median_latency,p95_latency,queue_wait,precompute_wait,online,bundles_produced,client_high_water,server_high_water");
  EXPECT_EQ(first(sw), "protocol,model,dataset,client_capacity,arrival_rate,statistic,value,saturated,infeasible,failures");
  const auto run_lines = runs.str();
  EXPECT_EQ(std::count(run_lines.begin(), run_lines.end(), '\n'), 3);
  const auto agg_lines = agg.str();
  EXPECT_EQ(std::count(agg_lines.begin(), agg_lines.end(), ','), 2 * 22);
}

TEST(Export, JsonAndTrace) {
  SimConfig cfg;
  cfg.arrival_rate = 0.05;
  cfg.horizon = 500;
  cfg.n_runs = 1;
  cfg.trace = true;
  const auto a = run_many(cfg, synthetic(10, 2, 100));
  const auto j = aggregate_json(cfg, a);
  EXPECT_EQ(j["schema"], kMetricsSchema);
  EXPECT_EQ(j["config"]["horizon"], 500.0);
  EXPECT_NEAR(j["mean_latency"].get<double>(), a.mean_latency, 1e-12);
  std::ostringstream os;
  write_trace_jsonl(os, a.runs[0]);
  std::istringstream in(os.str());
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    const auto e = nlohmann::json::parse(line);
    EXPECT_TRUE(e.contains("time"));
    EXPECT_TRUE(e.contains("kind"));
    ++n;
  }
  EXPECT_EQ(n, a.runs[0].trace.size());
  EXPECT_GT(n, 0u);
}
