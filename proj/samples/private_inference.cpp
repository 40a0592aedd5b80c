// One private inference on a small CNN under both protocols, checked against plaintext.

#include <iostream>

#include "pisim/pisim.hpp"

using namespace pisim;

int main() {
  const auto arch = netarch::parse_arch(R"(network name=toy_cnn
input name=toy channels=1 height=8 width=8 classes=10
conv in=1 out=2 kernel=3 padding=1
relu
flatten
fc in=128 out=10
)");
  const auto weights = proto::random_weights(arch, 42);
  const auto input = proto::random_input(arch, 7);
  const auto plain = proto::reference_forward(arch, weights, input).back();

  for (auto p : {cost::Protocol::ServerGarbler, cost::Protocol::ClientGarbler}) {
    auto off = proto::offline_phase(p, arch, weights, 1);
    auto res = proto::online_phase(p, off.bundle, input);
    const auto logits = res.signed_logits();

    std::cout << cost::long_name(p) << "\n  logits:";
    for (auto v : logits) std::cout << ' ' << v;
    std::cout << "\n  matches plaintext: " << (logits == plain ? "yes" : "no") << "\n";
    std::cout << "  offline bytes " << proto::phase_total(off.transcript, proto::Phase::Offline) << ", online bytes "
              << proto::phase_total(res.transcript, proto::Phase::Online) << "\n";
    std::cout << "  stored: client " << proto::stored_bytes(off.transcript, proto::Party::Client) << " B, server "
              << proto::stored_bytes(off.transcript, proto::Party::Server) << " B\n";
  }
}
