#pragma once

#include <vector>

#include "pisim/netarch/network.hpp"

namespace pisim::netarch {

// A maximal run of linear layers between two ReLUs. The two-party protocols mask one tensor per
// segment: the segment input (a ReLU output or the network input) carries the client mask r_i,
// the segment output carries the server mask s_i.
struct Segment {
  int first = 0;         // first layer index
  int last = -1;         // last layer index; last < first for an empty (identity) segment
  int input_layer = -1;  // layer producing the segment input, -1 = network input
  int relu = -1;         // ReLU consuming the segment output, -1 for the final segment
  Shape input;
  Shape output;

  bool empty() const { return last < first; }
  bool contains(int layer) const { return layer >= first && layer <= last; }
};

inline std::vector<Segment> linear_segments(const NetworkArch& arch) {
  const auto shapes = infer_shapes(arch);
  std::vector<Segment> segs;
  Segment cur;
  cur.first = 0;
  cur.input_layer = -1;
  cur.input = arch.input_shape();
  for (int i = 0; i < static_cast<int>(arch.layers.size()); ++i) {
    if (arch.layers[static_cast<std::size_t>(i)].kind != LayerKind::ReLU) continue;
    cur.last = i - 1;
    cur.relu = i;
    cur.output = i == 0 ? arch.input_shape() : shapes[static_cast<std::size_t>(i - 1)];
    segs.push_back(cur);
    cur = Segment{};
    cur.first = i + 1;
    cur.input_layer = i;
    cur.input = shapes[static_cast<std::size_t>(i)];
  }
  cur.last = static_cast<int>(arch.layers.size()) - 1;
  cur.relu = -1;
  cur.output = shapes.back();
  segs.push_back(cur);
  return segs;
}

// Index of the segment holding `layer`; ReLU layers belong to no segment (-1).
inline int segment_of(const std::vector<Segment>& segs, int layer) {
  for (std::size_t k = 0; k < segs.size(); ++k)
    if (segs[k].contains(layer)) return static_cast<int>(k);
  return -1;
}

// Index of the segment whose input is the output of `layer` (-1 = network input), or -1.
inline int segment_fed_by(const std::vector<Segment>& segs, int layer) {
  for (std::size_t k = 0; k < segs.size(); ++k)
    if (segs[k].input_layer == layer) return static_cast<int>(k);
  return -1;
}

// Skip connections are evaluable on shares only when the source tensor is already masked
// (a segment input) or lives in the same segment as the merge point.
inline void check_share_topology(const NetworkArch& arch) {
  const auto segs = linear_segments(arch);
  for (const auto& s : arch.skip_connections) {
    const int merge_seg = segment_of(segs, s.merge);
    const int fed = segment_fed_by(segs, s.source);
    if (fed >= 0 && fed <= merge_seg) continue;
    if (s.source >= 0 && segment_of(segs, s.source) == merge_seg) continue;
    throw UnsupportedTopology("skip " + std::to_string(s.source) + "->" + std::to_string(s.merge) +
                              ": source is neither a segment input nor in the merge segment");
  }
}

}  // namespace pisim::netarch
