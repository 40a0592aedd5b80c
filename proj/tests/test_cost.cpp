#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "pisim/cli/resolve.hpp"
#include "pisim/cost/calibrate.hpp"
#include "pisim/cost/model.hpp"
#include "pisim/cost/nnls.hpp"
#include "pisim/cost/tables.hpp"
#include "pisim/netarch/presets.hpp"

using namespace pisim;
using namespace pisim::cost;

namespace {

const std::string kConfig = std::string(PISIM_SOURCE_DIR) + "/configs";

struct MeasuredRow {
  Protocol p;
  const char* model;
  const char* dataset;
  double offline, online;
};

// Published latency pairs (seconds).
const std::vector<MeasuredRow> kMeasured{
    {Protocol::ServerGarbler, "resnet32", "cifar100", 115.2, 9.4},   {Protocol::ServerGarbler, "vgg16", "cifar100", 295.6, 9.4},
    {Protocol::ServerGarbler, "resnet18", "cifar100", 420.8, 17.2},  {Protocol::ServerGarbler, "resnet32", "tiny", 401.9, 39.6},
    {Protocol::ServerGarbler, "vgg16", "tiny", 814.7, 34.2},         {Protocol::ServerGarbler, "resnet18", "tiny", 1594.0, 68.5},
    {Protocol::ClientGarbler, "resnet32", "cifar100", 109.1, 11.9},  {Protocol::ClientGarbler, "vgg16", "cifar100", 289.9, 11.6},
    {Protocol::ClientGarbler, "resnet18", "cifar100", 409.6, 21.8},  {Protocol::ClientGarbler, "resnet32", "tiny", 377.4, 49.6},
    {Protocol::ClientGarbler, "vgg16", "tiny", 792.2, 43.4},         {Protocol::ClientGarbler, "resnet18", "tiny", 1549.1, 86.9}};

const CostModel& calibrated() {
  static const CostModel cm = cli::load_cost_model(kConfig);
  return cm;
}

CostModel scaled() {
  auto cm = calibrated();
  cm.mode = CostMode::ComponentScaled;
  return cm;
}

double rel(double got, double want) { return std::abs(got - want) / std::abs(want); }

}  // namespace

TEST(Tables, ShippedTableHasAllTwelveRows) {
  const auto rows = load_measured_costs(kConfig + "/measured_costs.tsv");
  ASSERT_EQ(rows.size(), 12u);
  for (const auto& r : kMeasured) EXPECT_NE(find_row(calibrated(), r.p, r.model, r.dataset), nullptr) << r.model << r.dataset;
}

TEST(Tables, RoundTrip) {
  const auto rows = load_measured_costs(kConfig + "/measured_costs.tsv");
  std::stringstream ss;
  write_measured_costs(ss, rows);
  const auto back = read_measured_costs(ss);
  ASSERT_EQ(back.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(back[i].offline_latency, rows[i].offline_latency);
    EXPECT_EQ(back[i].client_storage_measured, rows[i].client_storage_measured);
    EXPECT_NEAR(back[i].client_storage, rows[i].client_storage, 1e-5 * rows[i].client_storage);
  }
}

TEST(Tables, Malformed) {
  std::stringstream missing("protocol\tmodel\nsg\tresnet32\n");
  EXPECT_THROW(read_measured_costs(missing), ParseError);
  const std::string header =
      "protocol\tmodel\tdataset\toffline_s\tonline_s\toffline_comm_bytes\tonline_comm_bytes\tclient_storage_bytes\t"
      "server_storage_bytes\tclient_storage_source\tserver_storage_source\tbandwidth_bytes_per_s\n";
  std::stringstream bad_num(header + "sg\tresnet32\tc100\tfast\t9.4\tNA\tNA\t1\t1\tmeasured\tmeasured\t1e8\n");
  EXPECT_THROW(read_measured_costs(bad_num), ParseError);
  std::stringstream bad_proto(header + "xg\tresnet32\tc100\t1\t9.4\tNA\tNA\t1\t1\tmeasured\tmeasured\t1e8\n");
  EXPECT_THROW(read_measured_costs(bad_proto), ParseError);
  std::stringstream neg(header + "sg\tresnet32\tc100\t-1\t9.4\tNA\tNA\t1\t1\tmeasured\tmeasured\t1e8\n");
  EXPECT_THROW(read_measured_costs(neg), ParseError);
}

TEST(Tables, Optimizations) {
  const auto t = load_optimizations(kConfig + "/optimizations.tsv");
  ASSERT_TRUE(t.count("deepreduce"));
  EXPECT_DOUBLE_EQ(t.at("deepreduce").relu_factor, 0.2);
  EXPECT_TRUE(t.at("baseline").identity());
  const auto k = parse_knobs("relu=0.2,flop=0.25,gc=0.5,he=1");
  EXPECT_DOUBLE_EQ(k.relu_factor, 0.2);
  EXPECT_DOUBLE_EQ(k.gc_per_relu_factor, 0.5);
  EXPECT_THROW(parse_knobs("relu=0"), InvalidConfig);
  EXPECT_THROW(parse_knobs("speed=2"), InvalidConfig);
  EXPECT_THROW(parse_knobs("relu"), InvalidConfig);
}

TEST(Nnls, KktConditionsOnRandomSystems) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  for (int t = 0; t < 50; ++t) {
    const int m = 6 + t % 5, n = 2 + t % 4;
    Eigen::MatrixXd a(m, n);
    Eigen::VectorXd b(m);
    for (int i = 0; i < a.size(); ++i) a.data()[i] = g(rng);
    for (int i = 0; i < m; ++i) b(i) = g(rng);
    const auto r = nnls(a, b);
    const Eigen::VectorXd grad = a.transpose() * (a * r.x - b);
    for (int j = 0; j < n; ++j) {
      EXPECT_GE(r.x(j), 0);
      if (r.x(j) > 1e-12)
        EXPECT_NEAR(grad(j), 0, 1e-8);
      else
        EXPECT_GE(grad(j), -1e-8);
    }
  }
}

TEST(Nnls, ExactWhenDetermined) {
  Eigen::MatrixXd a(3, 2);
  a << 1, 0, 0, 1, 1, 1;
  Eigen::VectorXd x(2);
  x << 2e-9, 5;
  const auto r = nnls(a, a * x);
  EXPECT_NEAR(r.x(0), 2e-9, 1e-15);  // row 3 carries 5 + 2e-9, so ~1e-15 is all double precision resolves
  EXPECT_NEAR(r.x(1), 5, 1e-9);
}

TEST(Calibrate, GcBytesPerRelu) {
  const auto& cm = calibrated();
  EXPECT_GE(cm.gc_bytes_per_relu, 17e3);
  EXPECT_LE(cm.gc_bytes_per_relu, 20e3);
  // 5.3 GB over ResNet-32's ReLU count
  const double relus = static_cast<double>(netarch::count_layers(netarch::build_preset("resnet32", "c100")).relus);
  EXPECT_LT(rel(cm.gc_bytes_per_relu, 5.3e9 / relus), 0.01);
}

TEST(Calibrate, TableDirectReproducesTable2Exactly) {
  const auto& cm = calibrated();
  ASSERT_EQ(cm.mode, CostMode::TableDirect);
  for (const auto& r : kMeasured) {
    const auto c = phase_costs(r.p, netarch::build_preset(r.model, r.dataset), cm);
    EXPECT_EQ(c.offline_latency, r.offline) << r.model << " " << r.dataset;
    EXPECT_EQ(c.online_latency, r.online) << r.model << " " << r.dataset;
  }
}

TEST(Calibrate, ComponentScaledWithinTenPercent) {
  const auto cm = scaled();
  for (const auto& r : kMeasured) {
    const auto c = phase_costs(r.p, netarch::build_preset(r.model, r.dataset), cm);
    EXPECT_LT(rel(c.offline_latency, r.offline), 0.10) << r.model << " " << r.dataset;
    EXPECT_LT(rel(c.online_latency, r.online), 0.10) << r.model << " " << r.dataset;
  }
}

TEST(Calibrate, StorageResidualsWithinFivePercent) {
  const auto rows = load_measured_costs(kConfig + "/measured_costs.tsv");
  for (const auto& res : calibration_residuals(calibrated(), rows, preset_archs(rows))) {
    EXPECT_LT(std::abs(res.client_storage_rel), 0.05) << res.model << res.dataset;
    EXPECT_LT(std::abs(res.server_storage_rel), 0.05) << res.model << res.dataset;
  }
}

TEST(Calibrate, ResNet18TinyOfflineFromComponents) {
  const auto c = phase_costs(Protocol::ServerGarbler, netarch::build_preset("resnet18", "tiny"), scaled());
  EXPECT_LT(rel(c.offline_latency, 1594.0), 0.10);
}

TEST(Calibrate, InsufficientRows) {
  const auto rows = load_measured_costs(kConfig + "/measured_costs.tsv");
  EXPECT_THROW(calibrate({}, {}), InsufficientRows);
  std::vector<MeasuredCosts> one{rows.front()};
  auto cm = calibrate(one, preset_archs(one));
  cm.mode = CostMode::ComponentScaled;
  const auto arch = netarch::build_preset("resnet32", "c100");
  EXPECT_NO_THROW(phase_costs(Protocol::ServerGarbler, arch, cm));
  EXPECT_THROW(phase_costs(Protocol::ClientGarbler, arch, cm), InsufficientRows);
}

TEST(Calibrate, InconsistentRows) {
  auto rows = load_measured_costs(kConfig + "/measured_costs.tsv");
  rows[0].offline_latency *= 5;  // no linear rate set fits this
  EXPECT_THROW(calibrate(rows, preset_archs(rows)), InconsistentRows);
}

TEST(PhaseCosts, UncalibratedTriple) {
  EXPECT_THROW(phase_costs(Protocol::ClientGarbler, netarch::build_preset("resnet32", "imagenet"), calibrated()), UncalibratedTriple);
  EXPECT_NO_THROW(phase_costs(Protocol::ClientGarbler, netarch::build_preset("resnet32", "imagenet"), scaled()));
}

TEST(PhaseCosts, CgRelocatesStorage) {
  const auto c = phase_costs(Protocol::ClientGarbler, netarch::build_preset("resnet32", "c100"), calibrated());
  EXPECT_LT(rel(c.client_storage_delta, 23.5e6), 0.01);
  EXPECT_LT(rel(c.server_storage_delta, 5.3e9), 0.01);
}

TEST(PhaseCosts, StoragePlacement) {
  for (const auto& m : netarch::preset_models())
    for (const auto& ds : {"c100", "tiny"}) {
      const auto arch = netarch::build_preset(m, ds);
      for (const auto& cm : {calibrated(), scaled()}) {
        const auto sg = phase_costs(Protocol::ServerGarbler, arch, cm);
        const auto cg = phase_costs(Protocol::ClientGarbler, arch, cm);
        const double gc = gc_storage(arch, cm);
        EXPECT_GE(sg.client_storage_delta, 0.99 * gc);
        EXPECT_GT(sg.client_storage_delta, 100 * sg.server_storage_delta);
        EXPECT_LE(cg.client_storage_delta, 0.01 * gc);
        EXPECT_GT(cg.server_storage_delta, 100 * cg.client_storage_delta);
      }
    }
}

TEST(GcStorage, ReportedSizes) {
  const auto& cm = calibrated();
  EXPECT_LT(rel(gc_storage(netarch::build_preset("resnet32", "c100"), cm), 5.3e9), 0.05);
  EXPECT_GT(gc_storage(netarch::build_preset("resnet18", "c100"), cm), 9e9);
  EXPECT_LT(rel(gc_storage(netarch::build_preset("resnet18", "tiny"), cm), 38.9e9), 0.10);
  const double r32_tiny = gc_storage(netarch::build_preset("resnet32", "tiny"), cm);
  EXPECT_GE(r32_tiny, 14.7e9);
  EXPECT_LE(r32_tiny, 21.5e9);
}

TEST(GcStorage, LinearInRelus) {
  Workload w;
  w.relus = 1000;
  const auto& cm = calibrated();
  const double one = gc_storage(w, cm);
  w.relus = 2000;
  EXPECT_DOUBLE_EQ(gc_storage(w, cm), 2 * one);
}

TEST(Bandwidth, TableShiftsOnlyCommunication) {
  const auto arch = netarch::build_preset("resnet32", "c100");
  const auto at100 = phase_costs(Protocol::ServerGarbler, arch, calibrated(), 100e6);
  const auto at50 = phase_costs(Protocol::ServerGarbler, arch, calibrated(), 50e6);
  EXPECT_NEAR(at50.offline_latency - at100.offline_latency, at100.offline_comm() / 50e6 - at100.offline_comm() / 100e6, 1e-9);
  EXPECT_NEAR(at50.online_latency - at100.online_latency, at100.online_comm() / 50e6 - at100.online_comm() / 100e6, 1e-9);
  double prev = HUGE_VAL;
  for (double bw : {10e6, 50e6, 100e6, 1e9}) {
    const auto c = phase_costs(Protocol::ClientGarbler, arch, scaled(), bw);
    EXPECT_LT(c.offline_latency + c.online_latency, prev);
    prev = c.offline_latency + c.online_latency;
  }
}

TEST(Optimization, IdentityIsNoOp) {
  const auto arch = netarch::build_preset("resnet18", "c100");
  const auto counts = netarch::count_layers(arch);
  const auto [c2, cm2] = apply_optimization(counts, scaled(), OptimizationKnobs{});
  EXPECT_EQ(c2, counts);
  const auto a = phase_costs(Protocol::ServerGarbler, arch, scaled());
  const auto b = phase_costs(Protocol::ServerGarbler, arch, cm2);
  EXPECT_EQ(a.offline_latency, b.offline_latency);
  EXPECT_EQ(a.client_storage_delta, b.client_storage_delta);
}

TEST(Optimization, ReluFactorDividesGcStorage) {
  const auto arch = netarch::build_preset("resnet18", "c100");
  const auto w = workload_of(arch);
  OptimizationKnobs k;
  k.relu_factor = 0.2;
  EXPECT_NEAR(gc_storage(apply_optimization(w, k), apply_optimization(scaled(), k)), gc_storage(w, scaled()) / 5, 1);
}

TEST(Optimization, FlopFactorDoublesHe) {
  const auto w = workload_of(netarch::build_preset("resnet32", "c100"));
  OptimizationKnobs k;
  k.flop_factor = 2;
  const auto base = phase_costs(Protocol::ClientGarbler, w, scaled(), 100e6);
  const auto more = phase_costs(Protocol::ClientGarbler, apply_optimization(w, k), apply_optimization(scaled(), k), 100e6);
  EXPECT_NEAR(more.he_seconds, 2 * base.he_seconds, 1e-9 * base.he_seconds);
}

TEST(Optimization, Commutative) {
  const auto counts = netarch::count_layers(netarch::build_preset("vgg16", "c100"));
  OptimizationKnobs a, b;
  a.relu_factor = 0.5;
  a.gc_per_relu_factor = 0.5;
  b.flop_factor = 0.25;
  b.he_per_flop_factor = 0.5;
  const auto [ab_c, ab_m] = apply_optimization(apply_optimization(counts, scaled(), a).first, apply_optimization(scaled(), a), b);
  const auto [ba_c, ba_m] = apply_optimization(apply_optimization(counts, scaled(), b).first, apply_optimization(scaled(), b), a);
  EXPECT_EQ(ab_c, ba_c);
  EXPECT_DOUBLE_EQ(ab_m.gc_bytes_per_relu, ba_m.gc_bytes_per_relu);
  EXPECT_DOUBLE_EQ(ab_m.he_seconds_per_flop, ba_m.he_seconds_per_flop);
}

TEST(MaxSustainableRate, SerialAndConcurrent) {
  const auto arch = netarch::build_preset("resnet18", "tiny");
  const auto cg = phase_costs(Protocol::ClientGarbler, arch, calibrated());
  EXPECT_NEAR(max_sustainable_rate(cg), 1 / (1549.1 + 86.9), 1e-12);
  EXPECT_NEAR(max_sustainable_rate(cg, Pipeline::Concurrent), 1 / 1549.1, 1e-12);
  PhaseCosts c;
  c.online_latency = 10;
  EXPECT_DOUBLE_EQ(max_sustainable_rate(c), 0.1);
  const auto sg = phase_costs(Protocol::ServerGarbler, netarch::build_preset("resnet32", "c100"), calibrated());
  EXPECT_NEAR(max_sustainable_rate(sg), 1 / 124.6, 1e-12);
  EXPECT_THROW(max_sustainable_rate(PhaseCosts{}), InvalidConfig);
}

TEST(Regime, Table3Presets) {
  const auto opts = load_optimizations(kConfig + "/optimizations.tsv");
  const auto arch = netarch::build_preset("resnet18", "c100");
  const auto cost_of = [&](const OptimizationKnobs& k) {
    return phase_costs(Protocol::ClientGarbler, apply_optimization(workload_of(arch), k), apply_optimization(scaled(), k), 100e6);
  };
  const auto base = cost_of({});
  EXPECT_EQ(classify_regime(cost_of(opts.at("delphi")), base, true), Regime::Low);
  EXPECT_EQ(classify_regime(cost_of(opts.at("deepreduce")), base, true), Regime::Moderate);
  EXPECT_EQ(classify_regime(cost_of(opts.at("deepreduce+circa")), base, true), Regime::High);
  EXPECT_EQ(classify_regime(cost_of(opts.at("deepreduce+circa")), base, false), Regime::Low);
  EXPECT_EQ(classify_regime(base, base, true), Regime::Low);
}

TEST(Regime, Thresholds) {
  PhaseCosts base;
  base.gc_bytes = 100;
  base.he_seconds = 100;
  PhaseCosts c = base;
  c.gc_bytes = 100 / 4.0;
  c.he_seconds = 100 / 2.0;
  EXPECT_EQ(classify_regime(c, base, true), Regime::Moderate);
  c.he_seconds = 100 / 1.9;
  EXPECT_EQ(classify_regime(c, base, true), Regime::Low);
  c.he_seconds = 10;
  c.gc_bytes = 100 / 8.0;
  EXPECT_EQ(classify_regime(c, base, true), Regime::High);
  RegimeThresholds strict{4, 16, 2};
  EXPECT_EQ(classify_regime(c, base, true, strict), Regime::Moderate);
}
