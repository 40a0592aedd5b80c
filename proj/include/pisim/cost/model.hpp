#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "pisim/errors.hpp"
#include "pisim/netarch/counts.hpp"
#include "pisim/netarch/network.hpp"
#include "pisim/netarch/segments.hpp"

namespace pisim::cost {

enum class Protocol { ServerGarbler, ClientGarbler };

inline std::string_view to_string(Protocol p) { return p == Protocol::ServerGarbler ? "sg" : "cg"; }
inline std::string_view long_name(Protocol p) {
  return p == Protocol::ServerGarbler ? "server-garbler" : "client-garbler";
}

inline Protocol parse_protocol(std::string_view s) {
  const auto n = netarch::datasets::lower(s);
  if (n == "sg" || n == "server-garbler" || n == "servergarbler" || n == "server_garbler") return Protocol::ServerGarbler;
  if (n == "cg" || n == "client-garbler" || n == "clientgarbler" || n == "client_garbler") return Protocol::ClientGarbler;
  throw InvalidConfig("unknown protocol '" + std::string(s) + "' (valid: sg, cg)");
}

enum class CostMode { TableDirect, ComponentScaled };

inline std::string_view to_string(CostMode m) { return m == CostMode::TableDirect ? "table" : "scaled"; }
inline CostMode parse_cost_mode(std::string_view s) {
  const auto n = netarch::datasets::lower(s);
  if (n == "table" || n == "tabledirect" || n == "table-direct") return CostMode::TableDirect;
  if (n == "scaled" || n == "componentscaled" || n == "component-scaled") return CostMode::ComponentScaled;
  throw InvalidConfig("unknown cost mode '" + std::string(s) + "' (valid: table, scaled)");
}

inline constexpr double kDefaultBandwidth = 100e6;  // bytes/s

// One measured (protocol, model, dataset) row. Storage cells the source does not state are
// filled from the calibrated rule and flagged so calibration ignores them.
struct MeasuredCosts {
  Protocol protocol = Protocol::ServerGarbler;
  std::string model;
  std::string dataset;
  double offline_latency = 0;
  double online_latency = 0;
  std::optional<double> offline_comm;
  std::optional<double> online_comm;
  double client_storage = 0;
  double server_storage = 0;
  bool client_storage_measured = true;
  bool server_storage_measured = true;
  double measured_bandwidth = kDefaultBandwidth;
};

struct OptimizationKnobs {
  double relu_factor = 1;
  double flop_factor = 1;
  double gc_per_relu_factor = 1;
  double he_per_flop_factor = 1;
  std::string label = "baseline";

  bool identity() const { return relu_factor == 1 && flop_factor == 1 && gc_per_relu_factor == 1 && he_per_flop_factor == 1; }
  void check() const {
    for (double f : {relu_factor, flop_factor, gc_per_relu_factor, he_per_flop_factor})
      if (!(f > 0) || !std::isfinite(f)) throw InvalidConfig("optimization factors must be positive and finite");
  }
};

// Architecture quantities the cost rules consume. Element counts are summed over linear
// segments (see netarch::linear_segments).
struct Workload {
  double relus = 0;
  double flops = 0;
  double ct_products = 0;   // packed ciphertext-plaintext products of the HE linear layers
  double input_elems = 0;   // network input
  double output_elems = 0;  // network output
  double seg_in_elems = 0;  // sum of segment inputs (client masks r_i)
  double seg_out_elems = 0; // sum of segment outputs (server masks s_i)
  std::int64_t relu_layers = 0;
};

struct CostModel {
  CostMode mode = CostMode::ComponentScaled;

  // bytes
  double gc_bytes_per_relu = 17408;  // garbled tables plus the evaluator's offline input labels
  double secret_bytes_per_elem = 39; // stored mask / share material per element
  double label_bytes_per_relu_input_bit = 16;
  double label_bits_per_input = 41;  // bit width of each GC input word
  double he_ct_bytes_per_elem = 16;
  double wire_bytes_per_elem = 8;
  double key_bytes = 1 << 20;
  double base_ot_bytes = 8192;       // each direction
  int he_slots = 16384;

  // seconds
  double he_seconds_per_flop = 0;
  double he_seconds_per_ct_product = 0;
  double gc_garble_seconds_per_relu = 0;
  double ot_offline_seconds_per_relu = 0;  // server-garbler only: OT extension for the client's labels
  double gc_eval_seconds_per_relu = 0;
  double ot_online_seconds_per_relu = 0;   // client-garbler only
  double offline_fixed_seconds = 0;
  double online_fixed_seconds = 0;

  std::set<Protocol> calibrated{Protocol::ServerGarbler, Protocol::ClientGarbler};
  std::vector<MeasuredCosts> table;  // rows backing TableDirect

  // offline input labels the evaluator holds per ReLU (both inputs of the client side)
  double offline_label_bytes_per_relu() const { return label_bytes_per_relu_input_bit * 2 * label_bits_per_input; }
  // labels of one online input word per ReLU
  double online_label_bytes_per_relu() const { return label_bytes_per_relu_input_bit * label_bits_per_input; }
  double gc_table_bytes_per_relu() const { return gc_bytes_per_relu - offline_label_bytes_per_relu(); }
};

inline Workload workload_of(const netarch::NetworkArch& arch, int he_slots = 16384) {
  const auto shapes = netarch::infer_shapes(arch);
  const auto counts = netarch::count_layers(arch);
  Workload w;
  w.relus = static_cast<double>(counts.relus);
  w.flops = static_cast<double>(counts.flops);
  const auto in_of = [&](int i) { return i == 0 ? arch.input_shape() : shapes[static_cast<std::size_t>(i - 1)]; };
  const auto slots = std::int64_t{he_slots};
  const auto packed = [&](std::int64_t elems) { return (elems + slots - 1) / slots; };
  std::int64_t ct = 0;
  for (int i = 0; i < static_cast<int>(arch.layers.size()); ++i) {
    const auto& l = arch.layers[static_cast<std::size_t>(i)];
    if (l.kind == netarch::LayerKind::Conv)
      ct += packed(in_of(i).elems()) * l.conv.out_channels * l.conv.kernel_size * l.conv.kernel_size;
    else if (l.kind == netarch::LayerKind::FC)
      ct += packed(l.fc.in_features) * l.fc.out_features;
    else if (l.kind == netarch::LayerKind::ReLU)
      ++w.relu_layers;
  }
  for (const auto& s : arch.skip_connections) {
    if (s.mode != netarch::SkipMode::Conv) continue;
    const auto src = s.source < 0 ? arch.input_shape() : shapes[static_cast<std::size_t>(s.source)];
    ct += packed(src.elems()) * s.projection->out_channels * s.projection->kernel_size * s.projection->kernel_size;
  }
  w.ct_products = static_cast<double>(ct);
  w.input_elems = static_cast<double>(arch.input_shape().elems());
  w.output_elems = static_cast<double>(shapes.back().elems());
  for (const auto& seg : netarch::linear_segments(arch)) {
    w.seg_in_elems += static_cast<double>(seg.input.elems());
    w.seg_out_elems += static_cast<double>(seg.output.elems());
  }
  return w;
}

// Relus scale the ReLU-boundary part of the masked volume; HE work follows FLOPs.
inline Workload apply_optimization(const Workload& w, const OptimizationKnobs& k) {
  k.check();
  Workload out = w;
  out.relus = w.relus * k.relu_factor;
  out.flops = w.flops * k.flop_factor;
  out.ct_products = w.ct_products * k.flop_factor;
  out.seg_in_elems = w.input_elems + (w.seg_in_elems - w.input_elems) * k.relu_factor;
  out.seg_out_elems = w.output_elems + (w.seg_out_elems - w.output_elems) * k.relu_factor;
  return out;
}

inline CostModel apply_optimization(const CostModel& cm, const OptimizationKnobs& k) {
  k.check();
  CostModel out = cm;
  out.gc_bytes_per_relu *= k.gc_per_relu_factor;
  out.label_bits_per_input *= k.gc_per_relu_factor;
  out.gc_garble_seconds_per_relu *= k.gc_per_relu_factor;
  out.gc_eval_seconds_per_relu *= k.gc_per_relu_factor;
  out.he_seconds_per_flop *= k.he_per_flop_factor;
  out.he_seconds_per_ct_product *= k.he_per_flop_factor;
  if (!k.identity()) out.table.clear();  // measured rows no longer describe the workload
  return out;
}

inline std::pair<netarch::LayerCounts, CostModel> apply_optimization(const netarch::LayerCounts& c, const CostModel& cm,
                                                                     const OptimizationKnobs& k) {
  k.check();
  netarch::LayerCounts out = c;
  out.relus = std::llround(static_cast<double>(c.relus) * k.relu_factor);
  out.flops = std::llround(static_cast<double>(c.flops) * k.flop_factor);
  return {out, apply_optimization(cm, k)};
}

inline double gc_storage(const Workload& w, const CostModel& cm) { return w.relus * cm.gc_bytes_per_relu; }
inline double gc_storage(const netarch::NetworkArch& arch, const CostModel& cm) {
  return gc_storage(workload_of(arch, cm.he_slots), cm);
}

struct PhaseCosts {
  double offline_latency = 0;
  double online_latency = 0;
  double offline_comm_c2s = 0;
  double offline_comm_s2c = 0;
  double online_comm_c2s = 0;
  double online_comm_s2c = 0;
  double client_storage_delta = 0;
  double server_storage_delta = 0;

  // breakdown (component model; informational under TableDirect)
  double he_seconds = 0;
  double garble_seconds = 0;
  double offline_ot_seconds = 0;
  double offline_fixed_seconds = 0;
  double offline_comm_seconds = 0;
  double eval_seconds = 0;
  double online_ot_seconds = 0;
  double online_fixed_seconds = 0;
  double online_comm_seconds = 0;
  double gc_bytes = 0;

  double offline_comm() const { return offline_comm_c2s + offline_comm_s2c; }
  double online_comm() const { return online_comm_c2s + online_comm_s2c; }
  double offline_compute() const { return he_seconds + garble_seconds + offline_ot_seconds + offline_fixed_seconds; }
  double he_share_of_offline_compute() const {
    const double c = offline_compute();
    return c > 0 ? he_seconds / c : 0;
  }
};

// Byte totals of one inference's messages; the executors emit the same amounts per segment.
struct CommBytes {
  double offline_c2s = 0, offline_s2c = 0, online_c2s = 0, online_s2c = 0;
  double client_stored = 0, server_stored = 0, gc_bytes = 0;
};

inline CommBytes comm_bytes(Protocol p, const Workload& w, const CostModel& cm) {
  CommBytes b;
  const bool sg = p == Protocol::ServerGarbler;
  const double gc_tables = cm.gc_table_bytes_per_relu() * w.relus;
  const double off_labels = cm.offline_label_bytes_per_relu() * w.relus;
  const double on_labels = cm.online_label_bytes_per_relu() * w.relus;
  const double client_secrets = cm.secret_bytes_per_elem * (w.seg_in_elems + w.seg_out_elems);
  const double server_secrets = cm.secret_bytes_per_elem * w.seg_out_elems;
  b.gc_bytes = gc_tables + off_labels;

  // keys, encrypted masks, returned encrypted shares, base OTs
  b.offline_c2s += cm.key_bytes + cm.he_ct_bytes_per_elem * w.seg_in_elems + cm.base_ot_bytes;
  b.offline_s2c += cm.he_ct_bytes_per_elem * w.seg_out_elems + cm.base_ot_bytes;
  if (sg) {
    b.offline_s2c += gc_tables + off_labels;  // circuits, and the client's labels through OT extension
    b.offline_c2s += off_labels;              // OT-extension receiver messages
    b.client_stored = b.gc_bytes + client_secrets;
    b.server_stored = server_secrets;
    b.online_s2c += on_labels + cm.wire_bytes_per_elem * w.output_elems;
    b.online_c2s += cm.wire_bytes_per_elem * w.input_elems + on_labels;  // output labels back
  } else {
    b.offline_c2s += gc_tables + off_labels;
    b.client_stored = client_secrets;
    b.server_stored = b.gc_bytes + server_secrets;
    b.online_s2c += on_labels + cm.wire_bytes_per_elem * w.output_elems;
    b.online_c2s += cm.wire_bytes_per_elem * w.input_elems + 2 * on_labels;  // both labels per OT
  }
  return b;
}

// Compute-only terms of the component model.
inline PhaseCosts component_compute(Protocol p, const Workload& w, const CostModel& cm) {
  const bool sg = p == Protocol::ServerGarbler;
  PhaseCosts c;
  c.he_seconds = cm.he_seconds_per_flop * w.flops + cm.he_seconds_per_ct_product * w.ct_products;
  c.garble_seconds = cm.gc_garble_seconds_per_relu * w.relus;
  c.offline_ot_seconds = sg ? cm.ot_offline_seconds_per_relu * w.relus : 0;
  c.offline_fixed_seconds = cm.offline_fixed_seconds;
  c.eval_seconds = cm.gc_eval_seconds_per_relu * w.relus;
  c.online_ot_seconds = sg ? 0 : cm.ot_online_seconds_per_relu * w.relus;
  c.online_fixed_seconds = cm.online_fixed_seconds;
  return c;
}

namespace detail {
inline std::string dataset_id(std::string_view name) {
  try {
    return netarch::datasets::canonical_name(name);
  } catch (const UnknownDataset&) {
    return netarch::datasets::lower(name);
  }
}
}  // namespace detail

inline const MeasuredCosts* find_row(const CostModel& cm, Protocol p, std::string_view model, std::string_view dataset) {
  for (const auto& r : cm.table)
    if (r.protocol == p && netarch::datasets::lower(r.model) == netarch::datasets::lower(model) &&
        detail::dataset_id(r.dataset) == detail::dataset_id(dataset))
      return &r;
  return nullptr;
}

inline PhaseCosts phase_costs(Protocol p, const Workload& w, const CostModel& cm, double bandwidth,
                              const MeasuredCosts* measured = nullptr) {
  if (!(bandwidth > 0)) throw InvalidConfig("bandwidth must be positive");
  if (cm.mode == CostMode::ComponentScaled && !cm.calibrated.count(p))
    throw InsufficientRows("cost model has no calibration rows for " + std::string(long_name(p)));

  PhaseCosts c = component_compute(p, w, cm);
  const auto bytes = comm_bytes(p, w, cm);
  c.offline_comm_c2s = bytes.offline_c2s;
  c.offline_comm_s2c = bytes.offline_s2c;
  c.online_comm_c2s = bytes.online_c2s;
  c.online_comm_s2c = bytes.online_s2c;
  c.gc_bytes = bytes.gc_bytes;
  c.offline_comm_seconds = c.offline_comm() / bandwidth;
  c.online_comm_seconds = c.online_comm() / bandwidth;

  if (cm.mode == CostMode::TableDirect) {
    if (!measured) throw UncalibratedTriple("TableDirect needs a measured row for this triple");
    // measured latencies include communication at the measurement bandwidth
    const double off_comm = measured->offline_comm.value_or(c.offline_comm());
    const double on_comm = measured->online_comm.value_or(c.online_comm());
    c.offline_latency = measured->offline_latency;
    c.online_latency = measured->online_latency;
    if (bandwidth != measured->measured_bandwidth) {
      c.offline_latency += off_comm / bandwidth - off_comm / measured->measured_bandwidth;
      c.online_latency += on_comm / bandwidth - on_comm / measured->measured_bandwidth;
    }
    c.client_storage_delta = measured->client_storage;
    c.server_storage_delta = measured->server_storage;
  } else {
    c.offline_latency = c.offline_compute() + c.offline_comm_seconds;
    c.online_latency = c.eval_seconds + c.online_ot_seconds + c.online_fixed_seconds + c.online_comm_seconds;
    c.client_storage_delta = bytes.client_stored;
    c.server_storage_delta = bytes.server_stored;
  }
  if (c.offline_latency < 0 || c.online_latency < 0)
    throw Error("negative phase latency; bandwidth shift exceeds the measured time");
  return c;
}

inline PhaseCosts phase_costs(Protocol p, const netarch::NetworkArch& arch, const CostModel& cm,
                              double bandwidth = kDefaultBandwidth) {
  const auto w = workload_of(arch, cm.he_slots);
  if (cm.mode == CostMode::TableDirect) {
    const auto* row = find_row(cm, p, arch.name, arch.input.name);
    if (!row)
      throw UncalibratedTriple("no measured row for (" + std::string(to_string(p)) + ", " + arch.name + ", " +
                               arch.input.name + ")");
    return phase_costs(p, w, cm, bandwidth, row);
  }
  return phase_costs(p, w, cm, bandwidth);
}

// Serial: one phase at a time on the shared endpoints. Concurrent: the offline producer and the
// online server run side by side, so the slower of the two limits throughput.
enum class Pipeline { Serial, Concurrent };

inline std::string_view to_string(Pipeline p) { return p == Pipeline::Serial ? "serial" : "concurrent"; }
inline Pipeline parse_pipeline(std::string_view s) {
  const auto n = netarch::datasets::lower(s);
  if (n == "serial") return Pipeline::Serial;
  if (n == "concurrent") return Pipeline::Concurrent;
  throw InvalidConfig("unknown pipeline '" + std::string(s) + "' (valid: serial, concurrent)");
}

inline double max_sustainable_rate(const PhaseCosts& c, Pipeline pipeline = Pipeline::Serial) {
  const double per_request =
      pipeline == Pipeline::Serial ? c.offline_latency + c.online_latency : std::max(c.offline_latency, c.online_latency);
  if (!(per_request > 0)) throw InvalidConfig("phase latencies must be positive");
  return 1.0 / per_request;
}

enum class Regime { Low, Moderate, High };

inline std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::Low: return "low";
    case Regime::Moderate: return "moderate";
    case Regime::High: return "high";
  }
  return "?";
}

// Reduction factors relative to the unoptimized network. GC cost is per-inference GC bytes,
// HE cost is offline HE seconds.
struct RegimeThresholds {
  double moderate_gc_reduction = 4;
  double high_gc_reduction = 8;
  double he_reduction = 2;
};

inline Regime classify_regime(const PhaseCosts& costs, const PhaseCosts& baseline, bool storage_ok,
                              const RegimeThresholds& t = {}) {
  if (!storage_ok) return Regime::Low;
  const auto ratio = [](double base, double now) { return now > 0 ? base / now : HUGE_VAL; };
  const double gc = ratio(baseline.gc_bytes, costs.gc_bytes);
  const double he = ratio(baseline.he_seconds, costs.he_seconds);
  if (he >= t.he_reduction && gc >= t.high_gc_reduction) return Regime::High;
  if (he >= t.he_reduction && gc >= t.moderate_gc_reduction) return Regime::Moderate;
  return Regime::Low;
}

}  // namespace pisim::cost
