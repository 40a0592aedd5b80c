// One simulated day of ResNet-32/CIFAR-100 requests at a fixed rate, SG vs CG with 8 GB on the client.

#include <cstdlib>
#include <iostream>

#include "pisim/pisim.hpp"

using namespace pisim;

int main(int argc, char** argv) {
  const double rate = argc > 1 ? std::atof(argv[1]) : 2e-3;
  const auto cm = cli::load_cost_model(cli::config_dir());
  const auto arch = netarch::build_preset("resnet32", "cifar100");

  for (auto p : {cost::Protocol::ServerGarbler, cost::Protocol::ClientGarbler}) {
    sim::SimConfig cfg;
    cfg.protocol = p;
    cfg.arrival_rate = rate;
    cfg.n_runs = 20;
    const auto costs = sim::resolve_costs(cfg, arch, cm);
    const auto m = sim::run_many(cfg, costs, 4);
    std::cout << cost::long_name(p) << ": mean latency " << m.mean_latency << " s +- " << m.ci95_half_width << "  (queue "
              << m.decomposition.queue_wait << ", precompute wait " << m.decomposition.precompute_wait << ", online "
              << m.decomposition.online << ")\n";
  }
}
