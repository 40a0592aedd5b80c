// Calibrates the cost model from the shipped table and prints both protocols for the presets.

#include <iomanip>
#include <iostream>

#include "pisim/pisim.hpp"

using namespace pisim;

int main(int argc, char** argv) {
  const auto config = cli::config_dir(argc > 1 ? argv[1] : "");
  const auto cm = cli::load_cost_model(config);
  std::cout << "GC bytes per ReLU: " << cm.gc_bytes_per_relu << "\n\n";
  std::cout << std::left << std::setw(10) << "model" << std::setw(15) << "dataset" << std::setw(5) << "p" << std::right
            << std::setw(10) << "offline" << std::setw(10) << "online" << std::setw(12) << "client" << std::setw(12) << "server"
            << "\n";
  for (const auto& model : netarch::preset_models())
    for (const char* ds : {"cifar100", "tiny_imagenet"}) {
      const auto arch = netarch::build_preset(model, ds);
      for (auto p : {cost::Protocol::ServerGarbler, cost::Protocol::ClientGarbler}) {
        const auto c = cost::phase_costs(p, arch, cm);
        std::cout << std::left << std::setw(10) << model << std::setw(15) << ds << std::setw(5) << cost::to_string(p) << std::right
                  << std::fixed << std::setprecision(1) << std::setw(10) << c.offline_latency << std::setw(10) << c.online_latency
                  << std::setw(12) << sim::format_bytes(c.client_storage_delta) << std::setw(12)
                  << sim::format_bytes(c.server_storage_delta) << "\n";
      }
    }
}
