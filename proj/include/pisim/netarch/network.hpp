#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pisim/errors.hpp"

namespace pisim::netarch {

struct DatasetSpec {
  std::string name;
  int channels = 0;
  int height = 0;
  int width = 0;
  int classes = 0;

  std::int64_t input_elems() const { return std::int64_t{channels} * height * width; }
  friend bool operator==(const DatasetSpec&, const DatasetSpec&) = default;
};

namespace datasets {

inline DatasetSpec cifar100() { return {"cifar100", 3, 32, 32, 100}; }
inline DatasetSpec tiny_imagenet() { return {"tiny_imagenet", 3, 64, 64, 200}; }
inline DatasetSpec imagenet() { return {"imagenet", 3, 224, 224, 1000}; }

inline std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

// Accepts the canonical names plus the short forms used in tables (c100, tiny).
inline DatasetSpec find(std::string_view name) {
  const auto n = lower(name);
  if (n == "cifar100" || n == "cifar-100" || n == "c100") return cifar100();
  if (n == "tiny_imagenet" || n == "tinyimagenet" || n == "tiny") return tiny_imagenet();
  if (n == "imagenet" || n == "in1k") return imagenet();
  throw UnknownDataset("unknown dataset '" + std::string(name) + "' (valid: cifar100|c100, tiny_imagenet|tiny, imagenet)");
}

inline std::string canonical_name(std::string_view name) { return find(name).name; }

}  // namespace datasets

enum class LayerKind { Conv, FC, ReLU, AvgPool, Flatten };

inline std::string_view to_string(LayerKind k) {
  switch (k) {
    case LayerKind::Conv: return "conv";
    case LayerKind::FC: return "fc";
    case LayerKind::ReLU: return "relu";
    case LayerKind::AvgPool: return "avgpool";
    case LayerKind::Flatten: return "flatten";
  }
  return "?";
}

struct ConvSpec {
  int in_channels = 0;
  int out_channels = 0;
  int kernel_size = 0;
  int stride = 1;
  int padding = 0;
  bool bias = true;
  friend bool operator==(const ConvSpec&, const ConvSpec&) = default;
};

struct FcSpec {
  int in_features = 0;
  int out_features = 0;
  bool bias = true;
  friend bool operator==(const FcSpec&, const FcSpec&) = default;
};

// window == 0 means global average pooling.
struct PoolSpec {
  int window = 0;
  int stride = 0;
  bool global() const { return window == 0; }
  friend bool operator==(const PoolSpec&, const PoolSpec&) = default;
};

struct LayerSpec {
  LayerKind kind = LayerKind::ReLU;
  ConvSpec conv;
  FcSpec fc;
  PoolSpec pool;

  static LayerSpec make_conv(int in, int out, int k, int stride = 1, int padding = -1, bool bias = true) {
    LayerSpec l;
    l.kind = LayerKind::Conv;
    l.conv = {in, out, k, stride, padding < 0 ? k / 2 : padding, bias};
    return l;
  }
  static LayerSpec make_fc(int in, int out, bool bias = true) {
    LayerSpec l;
    l.kind = LayerKind::FC;
    l.fc = {in, out, bias};
    return l;
  }
  static LayerSpec make_relu() { return LayerSpec{}; }
  static LayerSpec make_avgpool(int window, int stride) {
    LayerSpec l;
    l.kind = LayerKind::AvgPool;
    l.pool = {window, stride};
    return l;
  }
  static LayerSpec make_global_avgpool() { return make_avgpool(0, 0); }
  static LayerSpec make_flatten() {
    LayerSpec l;
    l.kind = LayerKind::Flatten;
    return l;
  }

  bool is_linear() const { return kind != LayerKind::ReLU; }
  bool has_weights() const { return kind == LayerKind::Conv || kind == LayerKind::FC; }

  // Only the fields relevant to `kind` take part in equality.
  friend bool operator==(const LayerSpec& a, const LayerSpec& b) {
    if (a.kind != b.kind) return false;
    switch (a.kind) {
      case LayerKind::Conv: return a.conv == b.conv;
      case LayerKind::FC: return a.fc == b.fc;
      case LayerKind::AvgPool: return a.pool == b.pool;
      default: return true;
    }
  }
};

// How a skip tensor is brought to the merge shape.
//   identity: shapes must already agree
//   pad:      parameter-free stride subsample + zero channel padding
//   conv:     1x1 projection conv (counted in params/FLOPs)
enum class SkipMode { Identity, Pad, Conv };

inline std::string_view to_string(SkipMode m) {
  switch (m) {
    case SkipMode::Identity: return "identity";
    case SkipMode::Pad: return "pad";
    case SkipMode::Conv: return "conv";
  }
  return "?";
}

// Adds the output of layer `source` (-1 = network input) to the output of layer `merge`.
struct SkipConnection {
  int source = -1;
  int merge = 0;
  SkipMode mode = SkipMode::Identity;
  std::optional<ConvSpec> projection;
  friend bool operator==(const SkipConnection&, const SkipConnection&) = default;
};

struct Shape {
  int c = 0;
  int h = 0;
  int w = 0;
  std::int64_t elems() const { return std::int64_t{c} * h * w; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

inline std::string to_string(const Shape& s) {
  return std::to_string(s.c) + "x" + std::to_string(s.h) + "x" + std::to_string(s.w);
}

struct NetworkArch {
  std::string name;
  DatasetSpec input;
  std::vector<LayerSpec> layers;
  std::vector<SkipConnection> skip_connections;

  Shape input_shape() const { return {input.channels, input.height, input.width}; }
  friend bool operator==(const NetworkArch&, const NetworkArch&) = default;
};

namespace detail {

inline Shape conv_out(const ConvSpec& c, const Shape& in) {
  const int h = (in.h + 2 * c.padding - c.kernel_size) / c.stride + 1;
  const int w = (in.w + 2 * c.padding - c.kernel_size) / c.stride + 1;
  return {c.out_channels, h, w};
}

inline void check_conv(const ConvSpec& c, const Shape& in, const std::string& where) {
  if (c.in_channels <= 0 || c.out_channels <= 0 || c.kernel_size <= 0)
    throw ShapeMismatch(where + ": conv dimensions must be positive");
  if (c.stride < 1) throw ShapeMismatch(where + ": stride must be >= 1");
  if (c.padding < 0) throw ShapeMismatch(where + ": padding must be >= 0");
  if (in.c != c.in_channels)
    throw ShapeMismatch(where + ": expects " + std::to_string(c.in_channels) + " input channels, got " + to_string(in));
  if (in.h + 2 * c.padding < c.kernel_size || in.w + 2 * c.padding < c.kernel_size)
    throw ShapeMismatch(where + ": kernel larger than padded input " + to_string(in));
}

inline Shape skip_shape(const SkipConnection& s, const Shape& src, const Shape& target, const std::string& where) {
  switch (s.mode) {
    case SkipMode::Identity:
      if (!(src == target))
        throw ShapeMismatch(where + ": identity skip joins " + to_string(src) + " into " + to_string(target));
      return src;
    case SkipMode::Pad: {
      if (target.c < src.c || target.h <= 0 || src.h % target.h != 0 || src.w % target.w != 0 ||
          src.h / target.h != src.w / target.w)
        throw ShapeMismatch(where + ": pad skip cannot map " + to_string(src) + " onto " + to_string(target));
      return target;
    }
    case SkipMode::Conv: {
      if (!s.projection) throw ShapeMismatch(where + ": conv skip without projection spec");
      check_conv(*s.projection, src, where);
      const Shape out = conv_out(*s.projection, src);
      if (!(out == target))
        throw ShapeMismatch(where + ": projection yields " + to_string(out) + ", merge expects " + to_string(target));
      return out;
    }
  }
  return src;
}

}  // namespace detail

// Output shape of every layer, in order. Throws ShapeMismatch on any inconsistency.
inline std::vector<Shape> infer_shapes(const NetworkArch& arch) {
  const auto& ds = arch.input;
  if (ds.channels < 1 || ds.height < 1 || ds.width < 1 || ds.classes < 1)
    throw ShapeMismatch("dataset '" + ds.name + "' has non-positive dimensions");
  if (arch.layers.empty()) throw ShapeMismatch("network '" + arch.name + "' has no layers");

  std::vector<Shape> out;
  out.reserve(arch.layers.size());
  Shape cur = arch.input_shape();
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    const auto& l = arch.layers[i];
    const std::string where = "layer " + std::to_string(i) + " (" + std::string(to_string(l.kind)) + ")";
    switch (l.kind) {
      case LayerKind::Conv:
        detail::check_conv(l.conv, cur, where);
        cur = detail::conv_out(l.conv, cur);
        break;
      case LayerKind::FC:
        if (l.fc.in_features <= 0 || l.fc.out_features <= 0)
          throw ShapeMismatch(where + ": fc dimensions must be positive");
        if (cur.h != 1 || cur.w != 1 || cur.c != l.fc.in_features)
          throw ShapeMismatch(where + ": expects " + std::to_string(l.fc.in_features) + " features, got " +
                              to_string(cur));
        cur = {l.fc.out_features, 1, 1};
        break;
      case LayerKind::ReLU:
        break;
      case LayerKind::AvgPool:
        if (l.pool.global()) {
          cur = {cur.c, 1, 1};
        } else {
          if (l.pool.window < 1 || l.pool.stride < 1) throw ShapeMismatch(where + ": window/stride must be >= 1");
          if (cur.h < l.pool.window || cur.w < l.pool.window || (cur.h - l.pool.window) % l.pool.stride != 0 ||
              (cur.w - l.pool.window) % l.pool.stride != 0)
            throw ShapeMismatch(where + ": window " + std::to_string(l.pool.window) + " does not tile " +
                                to_string(cur));
          cur = {cur.c, (cur.h - l.pool.window) / l.pool.stride + 1, (cur.w - l.pool.window) / l.pool.stride + 1};
        }
        break;
      case LayerKind::Flatten:
        cur = {static_cast<int>(cur.elems()), 1, 1};
        break;
    }
    for (const auto& s : arch.skip_connections) {
      if (s.merge != static_cast<int>(i)) continue;
      const std::string sw = "skip " + std::to_string(s.source) + "->" + std::to_string(s.merge);
      if (s.source >= s.merge || s.source < -1) throw ShapeMismatch(sw + ": source must precede merge");
      if (!l.is_linear()) throw ShapeMismatch(sw + ": cannot merge onto a ReLU layer");
      const Shape src = s.source < 0 ? arch.input_shape() : out[static_cast<std::size_t>(s.source)];
      detail::skip_shape(s, src, cur, sw);
    }
    out.push_back(cur);
  }
  for (const auto& s : arch.skip_connections)
    if (s.merge < 0 || s.merge >= static_cast<int>(arch.layers.size()))
      throw ShapeMismatch("skip merge index " + std::to_string(s.merge) + " out of range");
  return out;
}

inline void validate(const NetworkArch& arch) { (void)infer_shapes(arch); }

inline Shape output_shape(const NetworkArch& arch) { return infer_shapes(arch).back(); }

}  // namespace pisim::netarch
