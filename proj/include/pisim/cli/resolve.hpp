#pragma once

// Shared lookups for the command-line front end: config directory, architectures and the
// calibrated cost model.

#include <cstdlib>
#include <filesystem>
#include <map>
#include <string>

#include "pisim/cost/calibrate.hpp"
#include "pisim/cost/tables.hpp"
#include "pisim/errors.hpp"
#include "pisim/netarch/arch_format.hpp"
#include "pisim/netarch/presets.hpp"
#include "pisim/sim/config.hpp"

#ifndef PISIM_DEFAULT_CONFIG_DIR
#define PISIM_DEFAULT_CONFIG_DIR "configs"
#endif

namespace pisim::cli {

namespace fs = std::filesystem;

// Explicit override, then $PISIM_CONFIG_DIR, then the build-time default.
inline fs::path config_dir(const std::string& override_dir = {}) {
  if (!override_dir.empty()) return override_dir;
  if (const char* env = std::getenv("PISIM_CONFIG_DIR"); env && *env) return env;
  return PISIM_DEFAULT_CONFIG_DIR;
}

// `name` as given if it exists, else looked up under <config>/<sub>/ (with `ext` appended if missing).
inline fs::path resolve_file(const std::string& name, const fs::path& config, const std::string& sub, const std::string& ext) {
  std::string n = name;
  if (!n.empty() && n.front() == '@') n.erase(0, 1);
  if (fs::exists(n)) return n;
  fs::path p = config / sub / n;
  if (fs::exists(p)) return p;
  if (p.extension() != ext) {
    p += ext;
    if (fs::exists(p)) return p;
  }
  throw InvalidConfig("cannot find '" + name + "' (looked in . and " + (config / sub).string() + ")");
}

// A preset (model, dataset), or a shipped/given .arch file when `arch_path` is set or the model
// is not a preset.
inline netarch::NetworkArch resolve_arch(const std::string& model, const std::string& dataset, const std::string& arch_path,
                                         const fs::path& config) {
  if (!arch_path.empty()) return netarch::load_arch(resolve_file(arch_path, config, "archs", ".arch").string());
  const auto m = netarch::datasets::lower(model);
  for (const auto& p : netarch::preset_models())
    if (p == m) return netarch::build_preset(m, dataset);
  const auto file = config / "archs" / (m + ".arch");
  if (fs::exists(file)) return netarch::load_arch(file.string());
  return netarch::build_preset(model, dataset);  // throws UnknownModel with the valid names
}

inline netarch::NetworkArch resolve_arch(const sim::SimConfig& c, const fs::path& config) {
  return resolve_arch(c.model, c.dataset, c.arch_path, config);
}

// Calibrated model from <config>/measured_costs.tsv.
inline cost::CostModel load_cost_model(const fs::path& config) {
  const auto rows = cost::load_measured_costs((config / "measured_costs.tsv").string());
  return cost::calibrate(rows, cost::preset_archs(rows));
}

inline cost::OptimizationKnobs resolve_optimization(const std::string& label, const fs::path& config) {
  const auto table = cost::load_optimizations((config / "optimizations.tsv").string());
  const auto it = table.find(netarch::datasets::lower(label));
  if (it == table.end()) {
    std::string valid;
    for (const auto& [k, v] : table) valid += (valid.empty() ? "" : ", ") + k;
    throw InvalidConfig("unknown optimization '" + label + "' (valid: " + valid + ")");
  }
  return it->second;
}

}  // namespace pisim::cli
