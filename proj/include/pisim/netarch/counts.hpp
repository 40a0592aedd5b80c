#pragma once

#include <cstdint>

#include "pisim/netarch/network.hpp"

namespace pisim::netarch {

// FLOPs follow the multiply-accumulate convention: one MAC counts as one FLOP.
// Pooling, flatten and residual additions are free.
struct LayerCounts {
  std::int64_t params = 0;
  std::int64_t flops = 0;
  std::int64_t relus = 0;
  friend bool operator==(const LayerCounts&, const LayerCounts&) = default;
};

// Layer-kind tally in the (#Conv, #ReLU, #AvgPool, #FC) order used by the published table.
// Skip-connection projections are reported separately.
struct LayerTally {
  int conv = 0;
  int relu = 0;
  int avgpool = 0;
  int fc = 0;
  int skip_conv = 0;
  friend bool operator==(const LayerTally&, const LayerTally&) = default;
};

inline std::int64_t conv_params(const ConvSpec& c) {
  return std::int64_t{c.in_channels} * c.out_channels * c.kernel_size * c.kernel_size + (c.bias ? c.out_channels : 0);
}

inline std::int64_t conv_macs(const ConvSpec& c, const Shape& out) {
  return out.elems() * c.kernel_size * c.kernel_size * c.in_channels;
}

inline LayerCounts count_layers(const NetworkArch& arch) {
  const auto shapes = infer_shapes(arch);
  LayerCounts n;
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    const auto& l = arch.layers[i];
    switch (l.kind) {
      case LayerKind::Conv:
        n.params += conv_params(l.conv);
        n.flops += conv_macs(l.conv, shapes[i]);
        break;
      case LayerKind::FC:
        n.params += std::int64_t{l.fc.in_features} * l.fc.out_features + (l.fc.bias ? l.fc.out_features : 0);
        n.flops += std::int64_t{l.fc.in_features} * l.fc.out_features;
        break;
      case LayerKind::ReLU:
        n.relus += shapes[i].elems();
        break;
      default:
        break;
    }
  }
  for (const auto& s : arch.skip_connections) {
    if (s.mode != SkipMode::Conv) continue;
    n.params += conv_params(*s.projection);
    n.flops += conv_macs(*s.projection, shapes[static_cast<std::size_t>(s.merge)]);
  }
  return n;
}

inline LayerTally tally_layers(const NetworkArch& arch) {
  LayerTally t;
  for (const auto& l : arch.layers) {
    switch (l.kind) {
      case LayerKind::Conv: ++t.conv; break;
      case LayerKind::FC: ++t.fc; break;
      case LayerKind::ReLU: ++t.relu; break;
      case LayerKind::AvgPool: ++t.avgpool; break;
      case LayerKind::Flatten: break;
    }
  }
  for (const auto& s : arch.skip_connections)
    if (s.mode == SkipMode::Conv) ++t.skip_conv;
  return t;
}

}  // namespace pisim::netarch
