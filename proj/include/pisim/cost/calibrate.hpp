#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "pisim/cost/model.hpp"
#include "pisim/cost/nnls.hpp"
#include "pisim/netarch/presets.hpp"

namespace pisim::cost {

inline std::string arch_key(std::string_view model, std::string_view dataset) {
  return netarch::datasets::lower(model) + "/" + netarch::datasets::canonical_name(dataset);
}

struct CalibrationOptions {
  double latency_tolerance = 0.10;  // max relative error of any calibration row
  bool offline_intercept = false;
  bool online_intercept = true;
  CostModel base;  // byte constants and slot count carried into the fit
};

// Per-row relative error of the fitted component model.
struct CalibrationResidual {
  Protocol protocol;
  std::string model, dataset;
  double offline_rel = 0, online_rel = 0;
  double client_storage_rel = 0, server_storage_rel = 0;
};

namespace detail {

struct Fit {
  std::vector<double> coef;
  bool fitted_any = false;
};

inline Fit weighted_nnls(const std::vector<std::vector<double>>& rows, const std::vector<double>& y,
                         const std::vector<double>& weights) {
  const auto m = static_cast<Eigen::Index>(rows.size());
  const auto n = static_cast<Eigen::Index>(rows.empty() ? 0 : rows.front().size());
  Fit f;
  f.coef.assign(static_cast<std::size_t>(n), 0.0);
  if (m == 0) return f;
  Eigen::MatrixXd a(m, n);
  Eigen::VectorXd b(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double w = weights[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < n; ++j) a(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] * w;
    b(i) = y[static_cast<std::size_t>(i)] * w;
  }
  const auto r = nnls(a, b);
  for (Eigen::Index j = 0; j < n; ++j) f.coef[static_cast<std::size_t>(j)] = r.x(j);
  f.fitted_any = true;
  return f;
}

}  // namespace detail

inline std::vector<CalibrationResidual> calibration_residuals(const CostModel& cm, const std::vector<MeasuredCosts>& rows,
                                                              const std::map<std::string, netarch::NetworkArch>& archs) {
  CostModel scaled = cm;
  scaled.mode = CostMode::ComponentScaled;
  std::vector<CalibrationResidual> out;
  for (const auto& r : rows) {
    const auto it = archs.find(arch_key(r.model, r.dataset));
    if (it == archs.end()) throw InvalidConfig("no architecture for " + arch_key(r.model, r.dataset));
    const auto pc = phase_costs(r.protocol, it->second, scaled, r.measured_bandwidth);
    const auto rel = [](double p, double a) { return a != 0 ? (p - a) / a : 0.0; };
    out.push_back({r.protocol, r.model, r.dataset, rel(pc.offline_latency, r.offline_latency),
                   rel(pc.online_latency, r.online_latency), rel(pc.client_storage_delta, r.client_storage),
                   rel(pc.server_storage_delta, r.server_storage)});
  }
  return out;
}

// Fits the component model to measured rows. Storage constants come from the measured storage
// cells; latency rates come from non-negative least squares on each row's compute time
// (measured latency minus its communication at the measurement bandwidth), weighted by
// relative error. The returned model runs in TableDirect mode with the rows attached.
inline CostModel calibrate(const std::vector<MeasuredCosts>& rows, const std::map<std::string, netarch::NetworkArch>& archs,
                           const CalibrationOptions& opt = {}) {
  if (rows.empty()) throw InsufficientRows("calibration needs at least one measured row");
  CostModel cm = opt.base;
  cm.calibrated.clear();

  std::vector<Workload> ws;
  for (const auto& r : rows) {
    if (!(r.offline_latency > 0) || !(r.online_latency > 0) || !(r.measured_bandwidth > 0))
      throw InvalidConfig("measured row for " + arch_key(r.model, r.dataset) + " has non-positive latency or bandwidth");
    const auto it = archs.find(arch_key(r.model, r.dataset));
    if (it == archs.end()) throw InvalidConfig("no architecture for " + arch_key(r.model, r.dataset));
    ws.push_back(workload_of(it->second, cm.he_slots));
    cm.calibrated.insert(r.protocol);
  }

  // storage: columns [gc_bytes_per_relu, secret_bytes_per_elem]
  {
    std::vector<std::vector<double>> a;
    std::vector<double> y, w;
    bool any_measured = false;
    for (const auto& r : rows) any_measured = any_measured || r.client_storage_measured || r.server_storage_measured;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& r = rows[i];
      const auto& wl = ws[i];
      const bool sg = r.protocol == Protocol::ServerGarbler;
      const double client_elems = wl.seg_in_elems + wl.seg_out_elems;
      const double server_elems = wl.seg_out_elems;
      if (r.client_storage > 0 && (r.client_storage_measured || !any_measured)) {
        a.push_back({sg ? wl.relus : 0.0, client_elems});
        y.push_back(r.client_storage);
        w.push_back(1.0 / r.client_storage);
      }
      if (r.server_storage > 0 && (r.server_storage_measured || !any_measured)) {
        a.push_back({sg ? 0.0 : wl.relus, server_elems});
        y.push_back(r.server_storage);
        w.push_back(1.0 / r.server_storage);
      }
    }
    const auto f = detail::weighted_nnls(a, y, w);
    if (f.fitted_any) {
      bool gc_col = false, secret_col = false;
      for (const auto& row : a) {
        gc_col = gc_col || row[0] != 0;
        secret_col = secret_col || row[1] != 0;
      }
      // stored artifacts are whole bytes, so transcripts and the rule agree exactly
      if (gc_col) cm.gc_bytes_per_relu = std::round(f.coef[0]);
      if (secret_col) cm.secret_bytes_per_elem = std::round(f.coef[1]);
    }
    if (cm.gc_bytes_per_relu < cm.offline_label_bytes_per_relu())
      throw InconsistentRows("fitted GC size per ReLU is smaller than the evaluator's input labels");
  }

  const auto comm_of = [&](std::size_t i, bool offline) {
    const auto& r = rows[i];
    const auto b = comm_bytes(r.protocol, ws[i], cm);
    if (offline) return r.offline_comm.value_or(b.offline_c2s + b.offline_s2c);
    return r.online_comm.value_or(b.online_c2s + b.online_s2c);
  };

  // offline: [flops, ct_products, relus, relus*sg, 1]
  {
    std::vector<std::vector<double>> a;
    std::vector<double> y, w;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& r = rows[i];
      const auto& wl = ws[i];
      const double sg = r.protocol == Protocol::ServerGarbler ? 1.0 : 0.0;
      std::vector<double> f{wl.flops, wl.ct_products, wl.relus, wl.relus * sg};
      if (opt.offline_intercept) f.push_back(1.0);
      a.push_back(f);
      y.push_back(r.offline_latency - comm_of(i, true) / r.measured_bandwidth);
      w.push_back(1.0 / r.offline_latency);
    }
    const auto f = detail::weighted_nnls(a, y, w);
    cm.he_seconds_per_flop = f.coef[0];
    cm.he_seconds_per_ct_product = f.coef[1];
    cm.gc_garble_seconds_per_relu = f.coef[2];
    cm.ot_offline_seconds_per_relu = f.coef[3];
    cm.offline_fixed_seconds = opt.offline_intercept ? f.coef[4] : 0.0;
  }

  // online: [relus, relus*cg, 1]
  {
    std::vector<std::vector<double>> a;
    std::vector<double> y, w;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& r = rows[i];
      const double cg = r.protocol == Protocol::ClientGarbler ? 1.0 : 0.0;
      std::vector<double> f{ws[i].relus, ws[i].relus * cg};
      if (opt.online_intercept) f.push_back(1.0);
      a.push_back(f);
      y.push_back(r.online_latency - comm_of(i, false) / r.measured_bandwidth);
      w.push_back(1.0 / r.online_latency);
    }
    const auto f = detail::weighted_nnls(a, y, w);
    cm.gc_eval_seconds_per_relu = f.coef[0];
    cm.ot_online_seconds_per_relu = f.coef[1];
    cm.online_fixed_seconds = opt.online_intercept ? f.coef[2] : 0.0;
  }

  cm.table = rows;
  cm.mode = CostMode::ComponentScaled;
  double worst = 0;
  std::string where;
  for (const auto& res : calibration_residuals(cm, rows, archs)) {
    for (double e : {res.offline_rel, res.online_rel}) {
      if (std::abs(e) > worst) {
        worst = std::abs(e);
        where = std::string(to_string(res.protocol)) + " " + arch_key(res.model, res.dataset);
      }
    }
  }
  if (worst > opt.latency_tolerance) {
    std::ostringstream os;
    os << "calibration residual " << worst * 100 << "% at " << where << " exceeds " << opt.latency_tolerance * 100 << "%";
    throw InconsistentRows(os.str());
  }
  cm.mode = CostMode::TableDirect;
  return cm;
}

// Preset architectures for every (model, dataset) the rows mention.
inline std::map<std::string, netarch::NetworkArch> preset_archs(const std::vector<MeasuredCosts>& rows) {
  std::map<std::string, netarch::NetworkArch> out;
  for (const auto& r : rows) {
    const auto key = arch_key(r.model, r.dataset);
    if (!out.count(key)) out.emplace(key, netarch::build_preset(r.model, r.dataset));
  }
  return out;
}

}  // namespace pisim::cost
