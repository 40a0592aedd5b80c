#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "pisim/netarch/network.hpp"

namespace pisim::proto {

// Conv weights are [out][in][k][k], FC weights [out][in]; one bias per output channel/feature.
struct LayerWeights {
  std::vector<std::int64_t> w;
  std::vector<std::int64_t> b;
  friend bool operator==(const LayerWeights&, const LayerWeights&) = default;
};

// Indexed like arch.layers and arch.skip_connections; entries without weights stay empty.
struct NetworkWeights {
  std::vector<LayerWeights> layers;
  std::vector<LayerWeights> skips;
  friend bool operator==(const NetworkWeights&, const NetworkWeights&) = default;
};

struct WeightOptions {
  std::int64_t lo = -3;
  std::int64_t hi = 3;
  int nonzeros_per_row = 0;  // 0 = dense; otherwise that many non-zero taps per output
};

namespace detail {

inline std::int64_t conv_row(const netarch::ConvSpec& c) {
  return std::int64_t{c.in_channels} * c.kernel_size * c.kernel_size;
}

template <class Rng>
LayerWeights random_layer(std::int64_t rows, std::int64_t row_len, bool bias, const WeightOptions& o, Rng& rng) {
  std::uniform_int_distribution<std::int64_t> val(o.lo, o.hi);
  LayerWeights lw;
  lw.w.assign(static_cast<std::size_t>(rows * row_len), 0);
  if (o.nonzeros_per_row <= 0) {
    for (auto& x : lw.w) x = val(rng);
  } else {
    std::vector<std::int64_t> idx(static_cast<std::size_t>(row_len));
    std::iota(idx.begin(), idx.end(), 0);
    const auto nz = std::min<std::int64_t>(o.nonzeros_per_row, row_len);
    for (std::int64_t r = 0; r < rows; ++r) {
      for (std::int64_t k = 0; k < nz; ++k) {
        std::uniform_int_distribution<std::int64_t> pick(k, row_len - 1);
        std::swap(idx[static_cast<std::size_t>(k)], idx[static_cast<std::size_t>(pick(rng))]);
        std::int64_t v = 0;
        while (v == 0 && (o.lo != 0 || o.hi != 0)) v = val(rng);
        lw.w[static_cast<std::size_t>(r * row_len + idx[static_cast<std::size_t>(k)])] = v;
      }
    }
  }
  if (bias) {
    lw.b.resize(static_cast<std::size_t>(rows));
    for (auto& x : lw.b) x = val(rng);
  }
  return lw;
}

}  // namespace detail

inline NetworkWeights random_weights(const netarch::NetworkArch& arch, std::uint64_t seed, const WeightOptions& o = {}) {
  std::mt19937_64 rng(seed);
  NetworkWeights nw;
  nw.layers.resize(arch.layers.size());
  nw.skips.resize(arch.skip_connections.size());
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    const auto& l = arch.layers[i];
    if (l.kind == netarch::LayerKind::Conv)
      nw.layers[i] = detail::random_layer(l.conv.out_channels, detail::conv_row(l.conv), l.conv.bias, o, rng);
    else if (l.kind == netarch::LayerKind::FC)
      nw.layers[i] = detail::random_layer(l.fc.out_features, l.fc.in_features, l.fc.bias, o, rng);
  }
  for (std::size_t j = 0; j < arch.skip_connections.size(); ++j) {
    const auto& s = arch.skip_connections[j];
    if (s.mode == netarch::SkipMode::Conv)
      nw.skips[j] = detail::random_layer(s.projection->out_channels, detail::conv_row(*s.projection), s.projection->bias, o, rng);
  }
  return nw;
}

inline void check_weights(const netarch::NetworkArch& arch, const NetworkWeights& nw) {
  if (nw.layers.size() != arch.layers.size() || nw.skips.size() != arch.skip_connections.size())
    throw ShapeMismatch("weights do not cover the architecture's layers");
  const auto expect = [](const LayerWeights& lw, std::int64_t rows, std::int64_t row_len, bool bias, const std::string& where) {
    if (static_cast<std::int64_t>(lw.w.size()) != rows * row_len || static_cast<std::int64_t>(lw.b.size()) != (bias ? rows : 0))
      throw ShapeMismatch(where + ": weight tensor has the wrong size");
  };
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    const auto& l = arch.layers[i];
    const auto where = "layer " + std::to_string(i);
    if (l.kind == netarch::LayerKind::Conv)
      expect(nw.layers[i], l.conv.out_channels, detail::conv_row(l.conv), l.conv.bias, where);
    else if (l.kind == netarch::LayerKind::FC)
      expect(nw.layers[i], l.fc.out_features, l.fc.in_features, l.fc.bias, where);
    else if (!nw.layers[i].w.empty() || !nw.layers[i].b.empty())
      throw ShapeMismatch(where + ": weights given for a parameter-free layer");
  }
  for (std::size_t j = 0; j < arch.skip_connections.size(); ++j) {
    const auto& s = arch.skip_connections[j];
    if (s.mode == netarch::SkipMode::Conv)
      expect(nw.skips[j], s.projection->out_channels, detail::conv_row(*s.projection), s.projection->bias,
             "skip " + std::to_string(j));
  }
}

inline std::vector<std::int64_t> random_input(const netarch::NetworkArch& arch, std::uint64_t seed, std::int64_t lo = 0,
                                              std::int64_t hi = 255) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::int64_t> d(lo, hi);
  std::vector<std::int64_t> x(static_cast<std::size_t>(arch.input_shape().elems()));
  for (auto& v : x) v = d(rng);
  return x;
}

}  // namespace pisim::proto
