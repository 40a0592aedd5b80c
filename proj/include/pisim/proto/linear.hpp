#pragma once

// Exact evaluation of linear layers and segments over any ring-like element type: int64 for
// the plaintext reference, field elements for shares and the HE stand-in.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <type_traits>
#include <vector>

#include "pisim/netarch/network.hpp"
#include "pisim/netarch/segments.hpp"
#include "pisim/proto/field.hpp"
#include "pisim/proto/weights.hpp"

namespace pisim::proto {

template <class T>
inline T lift(std::int64_t x) {
  if constexpr (std::is_integral_v<T>)
    return static_cast<T>(x);
  else
    return T::from_signed(x);
}

using Tensor64 = std::vector<std::int64_t>;

template <class T>
std::vector<T> conv2d(const std::vector<T>& x, const netarch::Shape& in, const netarch::ConvSpec& c,
                      const LayerWeights& lw, bool with_bias) {
  const auto out = netarch::detail::conv_out(c, in);
  std::vector<T> y(static_cast<std::size_t>(out.elems()), T{});
  const int k = c.kernel_size;
  std::vector<T> wt(lw.w.size());
  for (std::size_t i = 0; i < wt.size(); ++i) wt[i] = lift<T>(lw.w[i]);
  for (int o = 0; o < out.c; ++o) {
    const T b = (with_bias && !lw.b.empty()) ? lift<T>(lw.b[static_cast<std::size_t>(o)]) : T{};
    for (int oy = 0; oy < out.h; ++oy) {
      for (int ox = 0; ox < out.w; ++ox) {
        T acc = b;
        for (int ci = 0; ci < in.c; ++ci) {
          for (int ky = 0; ky < k; ++ky) {
            const int iy = oy * c.stride - c.padding + ky;
            if (iy < 0 || iy >= in.h) continue;
            for (int kx = 0; kx < k; ++kx) {
              const int ix = ox * c.stride - c.padding + kx;
              if (ix < 0 || ix >= in.w) continue;
              const auto wi = ((static_cast<std::size_t>(o) * in.c + ci) * k + ky) * k + kx;
              const auto xi = (static_cast<std::size_t>(ci) * in.h + iy) * in.w + ix;
              if (lw.w[wi] != 0) acc = acc + wt[wi] * x[xi];
            }
          }
        }
        y[(static_cast<std::size_t>(o) * out.h + oy) * out.w + ox] = acc;
      }
    }
  }
  return y;
}

template <class T>
std::vector<T> dense(const std::vector<T>& x, const netarch::FcSpec& f, const LayerWeights& lw, bool with_bias) {
  std::vector<T> y(static_cast<std::size_t>(f.out_features), T{});
  for (int o = 0; o < f.out_features; ++o) {
    T acc = (with_bias && !lw.b.empty()) ? lift<T>(lw.b[static_cast<std::size_t>(o)]) : T{};
    for (int i = 0; i < f.in_features; ++i) {
      const auto w = lw.w[static_cast<std::size_t>(o) * f.in_features + i];
      if (w != 0) acc = acc + lift<T>(w) * x[static_cast<std::size_t>(i)];
    }
    y[static_cast<std::size_t>(o)] = acc;
  }
  return y;
}

// Sum pooling: average pooling without the division, which has no exact field analogue.
template <class T>
std::vector<T> sum_pool(const std::vector<T>& x, const netarch::Shape& in, const netarch::PoolSpec& p) {
  const int win_h = p.global() ? in.h : p.window;
  const int win_w = p.global() ? in.w : p.window;
  const int sh = p.global() ? in.h : p.stride;
  const int sw = p.global() ? in.w : p.stride;
  const int oh = (in.h - win_h) / sh + 1;
  const int ow = (in.w - win_w) / sw + 1;
  std::vector<T> y(static_cast<std::size_t>(in.c) * oh * ow, T{});
  for (int c = 0; c < in.c; ++c)
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox) {
        T acc{};
        for (int dy = 0; dy < win_h; ++dy)
          for (int dx = 0; dx < win_w; ++dx)
            acc = acc + x[(static_cast<std::size_t>(c) * in.h + oy * sh + dy) * in.w + ox * sw + dx];
        y[(static_cast<std::size_t>(c) * oh + oy) * ow + ox] = acc;
      }
  return y;
}

// Parameter-free shortcut: spatial subsample, then zero-fill the extra channels.
template <class T>
std::vector<T> pad_shortcut(const std::vector<T>& x, const netarch::Shape& src, const netarch::Shape& dst) {
  const int st = src.h / dst.h;
  std::vector<T> y(static_cast<std::size_t>(dst.elems()), T{});
  for (int c = 0; c < src.c; ++c)
    for (int oy = 0; oy < dst.h; ++oy)
      for (int ox = 0; ox < dst.w; ++ox)
        y[(static_cast<std::size_t>(c) * dst.h + oy) * dst.w + ox] =
            x[(static_cast<std::size_t>(c) * src.h + oy * st) * src.w + ox * st];
  return y;
}

template <class T>
std::vector<T> apply_linear_layer(const netarch::LayerSpec& l, const LayerWeights& lw, const std::vector<T>& x,
                                  const netarch::Shape& in, bool with_bias) {
  switch (l.kind) {
    case netarch::LayerKind::Conv: return conv2d(x, in, l.conv, lw, with_bias);
    case netarch::LayerKind::FC: return dense(x, l.fc, lw, with_bias);
    case netarch::LayerKind::AvgPool: return sum_pool(x, in, l.pool);
    case netarch::LayerKind::Flatten: return x;
    case netarch::LayerKind::ReLU: break;
  }
  throw ProtocolViolation("ReLU is not a linear layer");
}

template <class T>
std::vector<T> apply_skip(const netarch::SkipConnection& s, const LayerWeights& lw, const std::vector<T>& x,
                          const netarch::Shape& src, const netarch::Shape& dst, bool with_bias) {
  switch (s.mode) {
    case netarch::SkipMode::Identity: return x;
    case netarch::SkipMode::Pad: return pad_shortcut(x, src, dst);
    case netarch::SkipMode::Conv: return conv2d(x, src, *s.projection, lw, with_bias);
  }
  return x;
}

// Evaluates one linear segment. `sources` maps a layer index (-1 = network input) to the tensor
// it produced, and must hold the segment input plus any earlier tensor a skip reads. With
// `affine` false biases are dropped, giving the purely linear part used on masks.
template <class T>
std::vector<T> eval_segment(const netarch::NetworkArch& arch, const NetworkWeights& nw,
                            const std::vector<netarch::Shape>& shapes, const netarch::Segment& seg,
                            const std::map<int, std::vector<T>>& sources, bool affine) {
  const auto shape_of = [&](int layer) { return layer < 0 ? arch.input_shape() : shapes[static_cast<std::size_t>(layer)]; };
  const auto fetch = [&](int layer, const std::map<int, std::vector<T>>& local) -> const std::vector<T>& {
    if (auto it = local.find(layer); it != local.end()) return it->second;
    if (auto it = sources.find(layer); it != sources.end()) return it->second;
    throw ProtocolViolation("segment needs tensor of layer " + std::to_string(layer) + " which is not available");
  };
  std::map<int, std::vector<T>> local;
  if (seg.empty()) return fetch(seg.input_layer, local);
  for (int i = seg.first; i <= seg.last; ++i) {
    const auto& l = arch.layers[static_cast<std::size_t>(i)];
    const int prev = i == seg.first ? seg.input_layer : i - 1;
    auto y = apply_linear_layer(l, nw.layers[static_cast<std::size_t>(i)], fetch(prev, local), shape_of(prev), affine);
    for (std::size_t j = 0; j < arch.skip_connections.size(); ++j) {
      const auto& s = arch.skip_connections[j];
      if (s.merge != i) continue;
      const auto add = apply_skip(s, nw.skips[j], fetch(s.source, local), shape_of(s.source), shape_of(i), affine);
      for (std::size_t e = 0; e < y.size(); ++e) y[e] = y[e] + add[e];
    }
    local[i] = std::move(y);
  }
  return local[seg.last];
}

// Layer tensors a segment reads from outside itself (its input and skip sources).
inline std::vector<int> segment_sources(const netarch::NetworkArch& arch, const netarch::Segment& seg) {
  std::vector<int> out{seg.input_layer};
  for (const auto& s : arch.skip_connections)
    if (seg.contains(s.merge) && !seg.contains(s.source) &&
        std::find(out.begin(), out.end(), s.source) == out.end())
      out.push_back(s.source);
  return out;
}

// Plaintext integer inference; returns every layer's output tensor.
inline std::vector<Tensor64> reference_forward(const netarch::NetworkArch& arch, const NetworkWeights& nw,
                                               const Tensor64& input) {
  const auto shapes = netarch::infer_shapes(arch);
  check_weights(arch, nw);
  if (static_cast<std::int64_t>(input.size()) != arch.input_shape().elems())
    throw ShapeMismatch("input has " + std::to_string(input.size()) + " elements, network expects " +
                        std::to_string(arch.input_shape().elems()));
  std::vector<Tensor64> out(arch.layers.size());
  const auto tensor = [&](int layer) -> const Tensor64& { return layer < 0 ? input : out[static_cast<std::size_t>(layer)]; };
  const auto shape_of = [&](int layer) { return layer < 0 ? arch.input_shape() : shapes[static_cast<std::size_t>(layer)]; };
  for (int i = 0; i < static_cast<int>(arch.layers.size()); ++i) {
    const auto& l = arch.layers[static_cast<std::size_t>(i)];
    Tensor64 y;
    if (l.kind == netarch::LayerKind::ReLU) {
      y = tensor(i - 1);
      for (auto& v : y) v = std::max<std::int64_t>(v, 0);
    } else {
      y = apply_linear_layer(l, nw.layers[static_cast<std::size_t>(i)], tensor(i - 1), shape_of(i - 1), true);
    }
    for (std::size_t j = 0; j < arch.skip_connections.size(); ++j) {
      const auto& s = arch.skip_connections[j];
      if (s.merge != i) continue;
      const auto add = apply_skip(s, nw.skips[j], tensor(s.source), shape_of(s.source), shape_of(i), true);
      for (std::size_t e = 0; e < y.size(); ++e) y[e] += add[e];
    }
    out[static_cast<std::size_t>(i)] = std::move(y);
  }
  return out;
}

// Worst-case magnitude of every layer output for inputs bounded by `input_bound`.
inline std::vector<long double> magnitude_bounds(const netarch::NetworkArch& arch, const NetworkWeights& nw,
                                                 long double input_bound) {
  const auto shapes = netarch::infer_shapes(arch);
  check_weights(arch, nw);
  std::vector<long double> b(arch.layers.size());
  const auto bound = [&](int layer) { return layer < 0 ? input_bound : b[static_cast<std::size_t>(layer)]; };
  const auto shape_of = [&](int layer) { return layer < 0 ? arch.input_shape() : shapes[static_cast<std::size_t>(layer)]; };
  const auto rows = [](const LayerWeights& lw, std::int64_t n_rows, std::int64_t row_len, long double in) {
    long double worst = 0;
    for (std::int64_t r = 0; r < n_rows; ++r) {
      long double s = 0;
      for (std::int64_t k = 0; k < row_len; ++k) s += std::fabs(static_cast<long double>(lw.w[static_cast<std::size_t>(r * row_len + k)]));
      s *= in;
      if (!lw.b.empty()) s += std::fabs(static_cast<long double>(lw.b[static_cast<std::size_t>(r)]));
      worst = std::max(worst, s);
    }
    return worst;
  };
  const auto conv_bound = [&](const netarch::ConvSpec& c, const LayerWeights& lw, long double in) {
    return rows(lw, c.out_channels, std::int64_t{c.in_channels} * c.kernel_size * c.kernel_size, in);
  };
  for (int i = 0; i < static_cast<int>(arch.layers.size()); ++i) {
    const auto& l = arch.layers[static_cast<std::size_t>(i)];
    const long double in = bound(i - 1);
    long double y = in;
    switch (l.kind) {
      case netarch::LayerKind::Conv: y = conv_bound(l.conv, nw.layers[static_cast<std::size_t>(i)], in); break;
      case netarch::LayerKind::FC: y = rows(nw.layers[static_cast<std::size_t>(i)], l.fc.out_features, l.fc.in_features, in); break;
      case netarch::LayerKind::AvgPool: {
        const auto s = shape_of(i - 1);
        y = in * (l.pool.global() ? static_cast<long double>(s.h) * s.w : static_cast<long double>(l.pool.window) * l.pool.window);
        break;
      }
      default: break;
    }
    for (std::size_t j = 0; j < arch.skip_connections.size(); ++j) {
      const auto& s = arch.skip_connections[j];
      if (s.merge != i) continue;
      y += s.mode == netarch::SkipMode::Conv ? conv_bound(*s.projection, nw.skips[j], bound(s.source)) : bound(s.source);
    }
    b[static_cast<std::size_t>(i)] = y;
  }
  return b;
}

// Largest magnitude the ReLU gadget and share arithmetic accept for modulus P.
template <class F>
constexpr std::int64_t safe_magnitude() {
  return static_cast<std::int64_t>(F::modulus / 4);
}

template <class F>
void check_field_capacity(const netarch::NetworkArch& arch, const NetworkWeights& nw, long double input_bound) {
  const auto b = magnitude_bounds(arch, nw, input_bound);
  const long double limit = static_cast<long double>(safe_magnitude<F>());
  if (input_bound > limit) throw FieldOverflowRisk("input bound exceeds the field's safe magnitude");
  for (std::size_t i = 0; i < b.size(); ++i)
    if (b[i] > limit)
      throw FieldOverflowRisk("layer " + std::to_string(i) + " may reach magnitude " +
                              std::to_string(static_cast<double>(b[i])) + ", above the safe bound " +
                              std::to_string(static_cast<double>(limit)) + " for modulus " + std::to_string(F::modulus));
}

}  // namespace pisim::proto
