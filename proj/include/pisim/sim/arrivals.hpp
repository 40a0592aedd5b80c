#pragma once

#include <random>
#include <vector>

#include "pisim/errors.hpp"

namespace pisim::sim {

// Poisson process on [0, horizon): i.i.d. exponential gaps.
template <class Rng>
std::vector<double> generate_arrivals(double rate, double horizon, Rng& rng) {
  if (!(rate >= 0)) throw InvalidConfig("arrival rate must be >= 0");
  std::vector<double> out;
  if (rate == 0) return out;
  std::exponential_distribution<double> gap(rate);
  for (double t = gap(rng); t < horizon; t += gap(rng)) out.push_back(t);
  return out;
}

}  // namespace pisim::sim
