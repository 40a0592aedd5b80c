#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "pisim/cost/model.hpp"
#include "pisim/errors.hpp"

namespace pisim::sim {

struct SimConfig {
  cost::Protocol protocol = cost::Protocol::ClientGarbler;
  std::string model = "resnet32";
  std::string dataset = "cifar100";
  std::string arch_path;  // optional .arch file instead of a preset
  double arrival_rate = 0;        // requests/s
  double horizon = 86400;         // s
  int n_runs = 100;
  std::uint64_t seed = 1;
  double client_capacity = 8e9;   // bytes
  double server_capacity = 10e12; // bytes
  double bandwidth = cost::kDefaultBandwidth;
  cost::CostMode cost_mode = cost::CostMode::TableDirect;
  cost::OptimizationKnobs knobs;
  cost::Pipeline pipeline = cost::Pipeline::Concurrent;
  bool trace = false;  // keep the event trace in RunMetrics

  void check() const {
    if (!(arrival_rate >= 0) || !std::isfinite(arrival_rate)) throw InvalidConfig("arrival_rate must be >= 0");
    if (!(horizon > 0) || !std::isfinite(horizon)) throw InvalidConfig("horizon must be > 0");
    if (n_runs < 1) throw InvalidConfig("n_runs must be >= 1");
    if (!(client_capacity > 0) || !(server_capacity > 0)) throw InvalidConfig("storage capacities must be > 0");
    if (!(bandwidth > 0)) throw InvalidConfig("bandwidth must be > 0");
    knobs.check();
  }
};

}  // namespace pisim::sim
