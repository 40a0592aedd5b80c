#pragma once

#include <string_view>
#include <utility>
#include <vector>

#include "pisim/errors.hpp"
#include "pisim/proto/field.hpp"

namespace pisim::proto {

enum class Party { Client, Server };

inline std::string_view to_string(Party p) { return p == Party::Client ? "client" : "server"; }
inline Party other(Party p) { return p == Party::Client ? Party::Server : Party::Client; }

template <class F>
struct Share {
  Party party = Party::Client;
  std::vector<F> values;
  int layer_index = 0;
};

// Client share is the mask r, server share x - r.
template <class F>
std::pair<Share<F>, Share<F>> share_with(const std::vector<F>& x, const std::vector<F>& r, int layer_index = 0) {
  if (r.size() != x.size()) throw LengthMismatch("mask length differs from the shared vector");
  Share<F> c{Party::Client, r, layer_index};
  Share<F> s{Party::Server, std::vector<F>(x.size()), layer_index};
  for (std::size_t i = 0; i < x.size(); ++i) s.values[i] = x[i] - r[i];
  return {c, s};
}

template <class F, class Rng>
std::pair<Share<F>, Share<F>> share(const std::vector<F>& x, Rng& rng, int layer_index = 0) {
  return share_with(x, uniform_vector<F>(x.size(), rng), layer_index);
}

template <class F>
std::vector<F> reconstruct(const Share<F>& a, const Share<F>& b) {
  if (a.party == b.party) throw PartyMismatch("both shares belong to the " + std::string(to_string(a.party)));
  if (a.layer_index != b.layer_index) throw PartyMismatch("shares come from different layers");
  if (a.values.size() != b.values.size()) throw LengthMismatch("share lengths differ");
  std::vector<F> out(a.values.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values[i] + b.values[i];
  return out;
}

template <class F>
Share<F> add(const Share<F>& a, const Share<F>& b) {
  if (a.party != b.party) throw PartyMismatch("local addition needs two shares of the same party");
  if (a.values.size() != b.values.size()) throw LengthMismatch("share lengths differ");
  Share<F> out{a.party, a.values, a.layer_index};
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += b.values[i];
  return out;
}

}  // namespace pisim::proto
