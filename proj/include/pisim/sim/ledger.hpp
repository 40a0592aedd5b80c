#pragma once

#include <algorithm>
#include <string>

#include "pisim/errors.hpp"
#include "pisim/proto/share.hpp"

namespace pisim::sim {

using proto::Party;

// Per-party storage: space is reserved when an offline phase starts, committed when it
// finishes and released when the online phase consumes the bundle.
class StorageLedger {
 public:
  StorageLedger(Party party, double capacity) : party_(party), capacity_(capacity) {}

  Party party() const { return party_; }
  double capacity() const { return capacity_; }
  double reserved() const { return reserved_; }
  double committed() const { return committed_; }
  double used() const { return reserved_ + committed_; }
  double high_water() const { return high_water_; }

  bool can_reserve(double bytes) const { return used() + bytes <= capacity_; }

  void reserve(double bytes) {
    if (!can_reserve(bytes)) throw Error(std::string(proto::to_string(party_)) + " storage over capacity");
    reserved_ += bytes;
    high_water_ = std::max(high_water_, used());
  }
  void commit(double bytes) {
    reserved_ -= bytes;
    committed_ += bytes;
    check();
  }
  void release(double bytes) {
    committed_ -= bytes;
    check();
  }

  void check() const {
    // tolerance for floating-point residue of repeated add/subtract
    const double eps = 1e-6 * std::max(1.0, capacity_);
    if (reserved_ < -eps || committed_ < -eps || used() > capacity_ + eps)
      throw Error(std::string(proto::to_string(party_)) + " storage ledger out of bounds");
  }

 private:
  Party party_;
  double capacity_;
  double reserved_ = 0;
  double committed_ = 0;
  double high_water_ = 0;
};

}  // namespace pisim::sim
