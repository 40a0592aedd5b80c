#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "pisim/netarch/counts.hpp"
#include "pisim/netarch/network.hpp"

namespace pisim::netarch {

inline const std::vector<std::string>& preset_models() {
  static const std::vector<std::string> names{"resnet32", "vgg16", "resnet18"};
  return names;
}

namespace detail {

// Basic residual block: conv-relu-conv(+skip)-relu. `block_input` is the index of the layer whose
// output feeds the block (-1 for the network input).
inline void basic_block(NetworkArch& a, int block_input, int in_c, int out_c, int stride, SkipMode downsample) {
  const int first = static_cast<int>(a.layers.size());
  a.layers.push_back(LayerSpec::make_conv(in_c, out_c, 3, stride));
  a.layers.push_back(LayerSpec::make_relu());
  a.layers.push_back(LayerSpec::make_conv(out_c, out_c, 3, 1));
  a.layers.push_back(LayerSpec::make_relu());

  SkipConnection s{block_input, first + 2, SkipMode::Identity, std::nullopt};
  if (stride != 1 || in_c != out_c) {
    s.mode = downsample;
    if (downsample == SkipMode::Conv) s.projection = ConvSpec{in_c, out_c, 1, stride, 0, true};
  }
  a.skip_connections.push_back(s);
}

inline NetworkArch resnet(const std::string& name, const DatasetSpec& ds, int stem, const std::vector<int>& widths,
                          int blocks_per_stage, SkipMode downsample) {
  NetworkArch a{name, ds, {}, {}};
  // Stride-1 3x3 stem: the early downsampling of the ImageNet design is removed.
  a.layers.push_back(LayerSpec::make_conv(ds.channels, stem, 3, 1));
  a.layers.push_back(LayerSpec::make_relu());
  int in_c = stem;
  for (std::size_t st = 0; st < widths.size(); ++st) {
    for (int b = 0; b < blocks_per_stage; ++b) {
      const int stride = (st > 0 && b == 0) ? 2 : 1;
      basic_block(a, static_cast<int>(a.layers.size()) - 1, in_c, widths[st], stride, downsample);
      in_c = widths[st];
    }
  }
  a.layers.push_back(LayerSpec::make_global_avgpool());
  a.layers.push_back(LayerSpec::make_flatten());
  a.layers.push_back(LayerSpec::make_fc(in_c, ds.classes));
  return a;
}

inline NetworkArch vgg16(const DatasetSpec& ds) {
  NetworkArch a{"vgg16", ds, {}, {}};
  const std::vector<std::vector<int>> stages{{64, 64}, {128, 128}, {256, 256, 256}, {512, 512, 512}, {512, 512, 512}};
  int in_c = ds.channels;
  int h = ds.height;
  int w = ds.width;
  for (const auto& stage : stages) {
    for (int c : stage) {
      a.layers.push_back(LayerSpec::make_conv(in_c, c, 3, 1));
      a.layers.push_back(LayerSpec::make_relu());
      in_c = c;
    }
    // max-pooling replaced by average pooling
    a.layers.push_back(LayerSpec::make_avgpool(2, 2));
    h /= 2;
    w /= 2;
  }
  a.layers.push_back(LayerSpec::make_flatten());
  a.layers.push_back(LayerSpec::make_fc(in_c * h * w, 4096));
  a.layers.push_back(LayerSpec::make_relu());
  a.layers.push_back(LayerSpec::make_fc(4096, 4096));
  a.layers.push_back(LayerSpec::make_relu());
  a.layers.push_back(LayerSpec::make_fc(4096, ds.classes));
  return a;
}

inline bool is_known_dataset(const DatasetSpec& ds) {
  for (const auto& known : {datasets::cifar100(), datasets::tiny_imagenet(), datasets::imagenet()})
    if (known == ds) return true;
  return false;
}

}  // namespace detail

inline NetworkArch build_preset(std::string_view model, const DatasetSpec& dataset) {
  if (!detail::is_known_dataset(dataset)) throw UnknownDataset("dataset '" + dataset.name + "' is not a known preset");
  const auto m = datasets::lower(model);
  NetworkArch a;
  if (m == "resnet32") {
    a = detail::resnet("resnet32", dataset, 16, {16, 32, 64}, 5, SkipMode::Pad);
  } else if (m == "resnet18") {
    a = detail::resnet("resnet18", dataset, 64, {64, 128, 256, 512}, 2, SkipMode::Conv);
  } else if (m == "vgg16") {
    a = detail::vgg16(dataset);
  } else {
    throw UnknownModel("unknown model '" + std::string(model) + "' (valid: resnet32, vgg16, resnet18)");
  }
  validate(a);
  return a;
}

inline NetworkArch build_preset(std::string_view model, std::string_view dataset) {
  return build_preset(model, datasets::find(dataset));
}

// Re-infers every shape at the new resolution. FC input widths follow the new flattened size and
// the final classifier is resized to the dataset's class count.
inline NetworkArch scale_to_input(const NetworkArch& arch, const DatasetSpec& dataset) {
  NetworkArch out = arch;
  out.input = dataset;
  int last_fc = -1;
  for (std::size_t i = 0; i < out.layers.size(); ++i)
    if (out.layers[i].kind == LayerKind::FC) last_fc = static_cast<int>(i);

  try {
    for (std::size_t i = 0; i < out.layers.size(); ++i) {
      if (out.layers[i].kind != LayerKind::FC) continue;
      NetworkArch prefix{out.name, out.input, {out.layers.begin(), out.layers.begin() + static_cast<long>(i)}, {}};
      for (const auto& s : out.skip_connections)
        if (s.merge < static_cast<int>(i)) prefix.skip_connections.push_back(s);
      const Shape in = prefix.layers.empty() ? out.input_shape() : infer_shapes(prefix).back();
      if (in.h != 1 || in.w != 1)
        throw ShapeMismatch("fc layer " + std::to_string(i) + " fed a spatial tensor " + to_string(in));
      out.layers[i].fc.in_features = in.c;
      if (static_cast<int>(i) == last_fc) out.layers[i].fc.out_features = dataset.classes;
    }
    validate(out);
  } catch (const ShapeMismatch& e) {
    throw IncompatibleResolution("'" + arch.name + "' cannot run at " + std::to_string(dataset.height) + "x" +
                                 std::to_string(dataset.width) + ": " + e.what());
  }
  return out;
}

}  // namespace pisim::netarch
