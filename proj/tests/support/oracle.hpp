#pragma once

// Plaintext oracles written independently of the library's evaluators: convolutions go through
// an im2col matrix product, everything else is spelled out directly.

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "pisim/netarch/network.hpp"
#include "pisim/proto/weights.hpp"

namespace oracle {

using Vec = std::vector<std::int64_t>;
using Mat = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Dims {
  int c, h, w;
};

// y[o, p] = sum_k W[o, k] * cols[k, p] (+ b[o]); cols holds one receptive field per column.
inline Vec conv(const Vec& x, Dims in, const pisim::netarch::ConvSpec& s, const pisim::proto::LayerWeights& lw, Dims& out) {
  const int k = s.kernel_size;
  out = {s.out_channels, (in.h + 2 * s.padding - k) / s.stride + 1, (in.w + 2 * s.padding - k) / s.stride + 1};
  Mat cols = Mat::Zero(in.c * k * k, out.h * out.w);
  for (int c = 0; c < in.c; ++c)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx)
        for (int oy = 0; oy < out.h; ++oy)
          for (int ox = 0; ox < out.w; ++ox) {
            const int y = oy * s.stride + ky - s.padding, xx = ox * s.stride + kx - s.padding;
            if (y >= 0 && y < in.h && xx >= 0 && xx < in.w)
              cols((c * k + ky) * k + kx, oy * out.w + ox) = x[static_cast<std::size_t>((c * in.h + y) * in.w + xx)];
          }
  Mat wm(out.c, in.c * k * k);
  for (int i = 0; i < wm.size(); ++i) wm.data()[i] = lw.w[static_cast<std::size_t>(i)];
  Mat y = wm * cols;
  if (!lw.b.empty())
    for (int o = 0; o < out.c; ++o) y.row(o).array() += lw.b[static_cast<std::size_t>(o)];
  return Vec(y.data(), y.data() + y.size());
}

inline Vec fc(const Vec& x, const pisim::netarch::FcSpec& f, const pisim::proto::LayerWeights& lw) {
  Vec y(static_cast<std::size_t>(f.out_features));
  for (int o = 0; o < f.out_features; ++o) {
    std::int64_t acc = lw.b.empty() ? 0 : lw.b[static_cast<std::size_t>(o)];
    for (int i = 0; i < f.in_features; ++i) acc += lw.w[static_cast<std::size_t>(o * f.in_features + i)] * x[static_cast<std::size_t>(i)];
    y[static_cast<std::size_t>(o)] = acc;
  }
  return y;
}

// Average pooling without the final division (the exact-integer convention).
inline Vec pool(const Vec& x, Dims in, const pisim::netarch::PoolSpec& p, Dims& out) {
  const int win = p.window == 0 ? in.h : p.window, st = p.window == 0 ? in.h : p.stride;
  const int win_w = p.window == 0 ? in.w : p.window, st_w = p.window == 0 ? in.w : p.stride;
  out = {in.c, (in.h - win) / st + 1, (in.w - win_w) / st_w + 1};
  Vec y;
  for (int c = 0; c < in.c; ++c)
    for (int oy = 0; oy < out.h; ++oy)
      for (int ox = 0; ox < out.w; ++ox) {
        std::int64_t s = 0;
        for (int a = 0; a < win; ++a)
          for (int b = 0; b < win_w; ++b) s += x[static_cast<std::size_t>((c * in.h + oy * st + a) * in.w + ox * st_w + b)];
        y.push_back(s);
      }
  return y;
}

// Output of every layer.
inline std::vector<Vec> forward(const pisim::netarch::NetworkArch& a, const pisim::proto::NetworkWeights& nw, const Vec& input) {
  using K = pisim::netarch::LayerKind;
  std::vector<Vec> outs;
  std::vector<Dims> dims;
  Vec cur = input;
  Dims d{a.input.channels, a.input.height, a.input.width};
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    const auto& l = a.layers[i];
    Dims nd = d;
    switch (l.kind) {
      case K::Conv: cur = conv(cur, d, l.conv, nw.layers[i], nd); break;
      case K::FC: cur = fc(cur, l.fc, nw.layers[i]); nd = {l.fc.out_features, 1, 1}; break;
      case K::ReLU:
        for (auto& v : cur) v = v > 0 ? v : 0;
        break;
      case K::AvgPool: cur = pool(cur, d, l.pool, nd); break;
      case K::Flatten: nd = {d.c * d.h * d.w, 1, 1}; break;
    }
    for (std::size_t j = 0; j < a.skip_connections.size(); ++j) {
      const auto& s = a.skip_connections[j];
      if (s.merge != static_cast<int>(i)) continue;
      const Vec& src = s.source < 0 ? input : outs[static_cast<std::size_t>(s.source)];
      const Dims sd = s.source < 0 ? Dims{a.input.channels, a.input.height, a.input.width} : dims[static_cast<std::size_t>(s.source)];
      Vec add;
      if (s.mode == pisim::netarch::SkipMode::Identity) {
        add = src;
      } else if (s.mode == pisim::netarch::SkipMode::Conv) {
        Dims pd{};
        add = conv(src, sd, *s.projection, nw.skips[j], pd);
      } else {
        const int st = sd.h / nd.h;
        add.assign(cur.size(), 0);
        for (int c = 0; c < sd.c; ++c)
          for (int y = 0; y < nd.h; ++y)
            for (int x = 0; x < nd.w; ++x)
              add[static_cast<std::size_t>((c * nd.h + y) * nd.w + x)] = src[static_cast<std::size_t>((c * sd.h + y * st) * sd.w + x * st)];
      }
      for (std::size_t e = 0; e < cur.size(); ++e) cur[e] += add[e];
    }
    d = nd;
    outs.push_back(cur);
    dims.push_back(d);
  }
  return outs;
}

// Reference numbers for the preset networks, derived from their layer recipes rather than
// from the library's counting code. MAC convention, biases included.
struct Counts {
  std::int64_t params = 0, flops = 0, relus = 0;
};

inline void add_conv(Counts& c, int in, int out, int k, int hw_out, bool bias = true) {
  c.params += std::int64_t{in} * out * k * k + (bias ? out : 0);
  c.flops += std::int64_t{in} * out * k * k * hw_out * hw_out;
}

// CIFAR ResNet-32: 3 stages x 5 basic blocks, widths 16/32/64, parameter-free shortcuts.
inline Counts resnet32(int res, int classes) {
  Counts c;
  add_conv(c, 3, 16, 3, res);
  c.relus += 16LL * res * res;
  int in = 16, hw = res;
  for (int stage = 0; stage < 3; ++stage) {
    const int w = 16 << stage;
    for (int b = 0; b < 5; ++b) {
      const int out_hw = (stage > 0 && b == 0) ? hw / 2 : hw;
      add_conv(c, in, w, 3, out_hw);
      add_conv(c, w, w, 3, out_hw);
      c.relus += 2LL * w * out_hw * out_hw;
      in = w;
      hw = out_hw;
    }
  }
  c.params += 64LL * classes + classes;
  c.flops += 64LL * classes;
  return c;
}

// ResNet-18 without the stem downsampling: 3x3 stem, 4 stages x 2 blocks, 1x1 projections.
inline Counts resnet18(int res, int classes) {
  Counts c;
  add_conv(c, 3, 64, 3, res);
  c.relus += 64LL * res * res;
  int in = 64, hw = res;
  for (int stage = 0; stage < 4; ++stage) {
    const int w = 64 << stage;
    for (int b = 0; b < 2; ++b) {
      const bool down = stage > 0 && b == 0;
      const int out_hw = down ? hw / 2 : hw;
      add_conv(c, in, w, 3, out_hw);
      add_conv(c, w, w, 3, out_hw);
      if (down) add_conv(c, in, w, 1, out_hw);
      c.relus += 2LL * w * out_hw * out_hw;
      in = w;
      hw = out_hw;
    }
  }
  c.params += 512LL * classes + classes;
  c.flops += 512LL * classes;
  return c;
}

}  // namespace oracle
