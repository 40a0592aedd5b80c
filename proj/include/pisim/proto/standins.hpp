#pragma once

// Functional stand-ins for the cryptographic building blocks. They compute the right values
// and keep the dataflow honest through access control: ciphertext contents, label encodings
// and OT choices are private members reachable only from the operations that would be able to
// use them in the real primitives. None of this is cryptographically secure.

#include <cstdint>
#include <map>
#include <random>
#include <utility>
#include <vector>

#include "pisim/errors.hpp"
#include "pisim/netarch/segments.hpp"
#include "pisim/proto/field.hpp"
#include "pisim/proto/linear.hpp"
#include "pisim/proto/share.hpp"
#include "pisim/proto/weights.hpp"

namespace pisim::proto {

// ---------------------------------------------------------------------------------------------
// HE

template <class F>
class HeSecretKey;

template <class F>
class Ciphertext {
 public:
  Ciphertext() = default;
  std::uint64_t key_id() const { return key_id_; }
  std::size_t size() const { return hidden_.size(); }

 private:
  std::uint64_t key_id_ = 0;
  std::vector<F> hidden_;

  friend class HeSecretKey<F>;
  template <class G>
  friend Ciphertext<G> he_linear_plus_mask(const netarch::NetworkArch&, const NetworkWeights&,
                                           const std::vector<netarch::Shape>&, const netarch::Segment&,
                                           const std::map<int, Ciphertext<G>>&, const std::vector<G>&);
};

struct HePublicKey {
  std::uint64_t id = 0;
};

template <class F>
class HeSecretKey {
 public:
  explicit HeSecretKey(std::uint64_t id) : id_(id) {}
  HePublicKey public_key() const { return {id_}; }

  Ciphertext<F> encrypt(const std::vector<F>& values) const {
    Ciphertext<F> ct;
    ct.key_id_ = id_;
    ct.hidden_ = values;
    return ct;
  }
  std::vector<F> decrypt(const Ciphertext<F>& ct) const {
    if (ct.key_id_ != id_) throw ProtocolViolation("ciphertext was produced under a different key");
    return ct.hidden_;
  }

 private:
  std::uint64_t id_;
};

// Server side of the offline linear step: from encryptions of the client masks feeding a
// segment, produce Enc(L(r) + s) where L is the segment's linear part (no biases).
template <class F>
Ciphertext<F> he_linear_plus_mask(const netarch::NetworkArch& arch, const NetworkWeights& nw,
                                  const std::vector<netarch::Shape>& shapes, const netarch::Segment& seg,
                                  const std::map<int, Ciphertext<F>>& enc_sources, const std::vector<F>& s) {
  std::map<int, std::vector<F>> plain;
  std::uint64_t key = 0;
  for (const auto& [layer, ct] : enc_sources) {
    if (key != 0 && ct.key_id_ != key) throw ProtocolViolation("ciphertexts under mixed keys");
    key = ct.key_id_;
    plain.emplace(layer, ct.hidden_);
  }
  auto lin = eval_segment<F>(arch, nw, shapes, seg, plain, false);
  if (lin.size() != s.size()) throw ShapeMismatch("server mask does not match the segment output");
  for (std::size_t i = 0; i < lin.size(); ++i) lin[i] += s[i];
  Ciphertext<F> out;
  out.key_id_ = key;
  out.hidden_ = std::move(lin);
  return out;
}

// ---------------------------------------------------------------------------------------------
// Garbled ReLU: evaluates ReLU(<x>_c + <x>_s) - r_next on encoded inputs.

enum class GcSlot : int { ClientShare = 0, NextMask = 1, ServerShare = 2, Output = 3 };

template <class F>
class GarblerKey;
template <class F>
class GcBlob;

template <class F>
class EncodedInputs {
 public:
  EncodedInputs() = default;
  std::uint64_t blob_id() const { return blob_id_; }
  GcSlot slot() const { return slot_; }
  std::size_t size() const { return hidden_.size(); }

 private:
  std::uint64_t blob_id_ = 0;
  GcSlot slot_ = GcSlot::ClientShare;
  std::vector<F> hidden_;  // value + pad
  friend class GarblerKey<F>;
  friend class GcBlob<F>;
};

// OT receiver's message: the choice bits, opaque to the sender.
template <class F>
class OtChoice {
 public:
  OtChoice() = default;
  std::uint64_t blob_id() const { return blob_id_; }
  std::size_t size() const { return hidden_.size(); }

 private:
  std::uint64_t blob_id_ = 0;
  GcSlot slot_ = GcSlot::ClientShare;
  std::vector<F> hidden_;
  friend class GarblerKey<F>;
  template <class G>
  friend OtChoice<G> ot_choose(std::uint64_t, GcSlot, const std::vector<G>&);
};

template <class F>
OtChoice<F> ot_choose(std::uint64_t blob_id, GcSlot slot, const std::vector<F>& values) {
  OtChoice<F> c;
  c.blob_id_ = blob_id;
  c.slot_ = slot;
  c.hidden_ = values;
  return c;
}

template <class F>
class EncodedOutput {
 public:
  EncodedOutput() = default;
  std::uint64_t blob_id() const { return blob_id_; }
  std::size_t size() const { return hidden_.size(); }

 private:
  std::uint64_t blob_id_ = 0;
  std::vector<F> hidden_;
  friend class GarblerKey<F>;
  friend class GcBlob<F>;
};

namespace detail {
template <class F>
std::vector<F> pads(std::uint64_t seed, GcSlot slot, std::size_t n) {
  std::mt19937_64 rng(seed ^ (0x9E3779B97F4A7C15ull * (static_cast<std::uint64_t>(slot) + 1)));
  return uniform_vector<F>(n, rng);
}
}  // namespace detail

template <class F>
class GcBlob {
 public:
  GcBlob() = default;
  std::uint64_t id() const { return id_; }
  int segment() const { return segment_; }
  std::size_t relus() const { return relus_; }
  std::int64_t bytes() const { return bytes_; }
  Party garbler() const { return garbler_; }

  // Evaluator side. Throws MagnitudeOverflow if the reconstructed pre-activation leaves the
  // range where its sign is meaningful.
  EncodedOutput<F> evaluate(const EncodedInputs<F>& client_share, const EncodedInputs<F>& next_mask,
                            const EncodedInputs<F>& server_share) const {
    const auto x_c = open(client_share, GcSlot::ClientShare);
    const auto r = open(next_mask, GcSlot::NextMask);
    const auto x_s = open(server_share, GcSlot::ServerShare);
    const auto out_pad = detail::pads<F>(seed_, GcSlot::Output, relus_);
    EncodedOutput<F> out;
    out.blob_id_ = id_;
    out.hidden_.resize(relus_);
    const auto limit = safe_magnitude<F>();
    for (std::size_t i = 0; i < relus_; ++i) {
      const auto x = (x_c[i] + x_s[i]).to_signed();
      if (x > limit || x < -limit) throw MagnitudeOverflow("ReLU input magnitude exceeds the field's safe range");
      out.hidden_[i] = F::from_signed(x > 0 ? x : 0) - r[i] + out_pad[i];
    }
    return out;
  }

  // Output decoding for an evaluator that is entitled to the result (client-garbler).
  std::vector<F> decode(const EncodedOutput<F>& enc) const {
    if (!reveals_output_) throw ProtocolViolation("this circuit's output decodes only at the garbler");
    if (enc.blob_id_ != id_) throw ProtocolViolation("output labels belong to another circuit");
    const auto pad = detail::pads<F>(seed_, GcSlot::Output, relus_);
    std::vector<F> y(relus_);
    for (std::size_t i = 0; i < relus_; ++i) y[i] = enc.hidden_[i] - pad[i];
    return y;
  }

 private:
  std::vector<F> open(const EncodedInputs<F>& e, GcSlot want) const {
    if (e.blob_id_ != id_) throw ProtocolViolation("labels belong to another circuit");
    if (e.slot_ != want) throw ProtocolViolation("labels fed to the wrong circuit input");
    if (e.hidden_.size() != relus_) throw LengthMismatch("label vector length differs from the circuit width");
    const auto pad = detail::pads<F>(seed_, want, relus_);
    std::vector<F> v(relus_);
    for (std::size_t i = 0; i < relus_; ++i) v[i] = e.hidden_[i] - pad[i];
    return v;
  }

  std::uint64_t id_ = 0;
  int segment_ = 0;
  std::size_t relus_ = 0;
  std::int64_t bytes_ = 0;
  Party garbler_ = Party::Server;
  bool reveals_output_ = false;
  std::uint64_t seed_ = 0;
  friend class GarblerKey<F>;
};

template <class F>
class GarblerKey {
 public:
  GarblerKey() = default;

  // Garbles a width-`relus` circuit. `reveal_output` embeds the output decoding in the blob
  // so the evaluator learns y - r_next directly.
  template <class Rng>
  static std::pair<GarblerKey, GcBlob<F>> garble(Party garbler, int segment, std::size_t relus, std::int64_t bytes,
                                                 bool reveal_output, Rng& rng) {
    GarblerKey k;
    k.id_ = rng();
    if (k.id_ == 0) k.id_ = 1;
    k.seed_ = rng();
    k.relus_ = relus;
    GcBlob<F> b;
    b.id_ = k.id_;
    b.segment_ = segment;
    b.relus_ = relus;
    b.bytes_ = bytes;
    b.garbler_ = garbler;
    b.reveals_output_ = reveal_output;
    b.seed_ = k.seed_;
    return {k, b};
  }

  std::uint64_t blob_id() const { return id_; }

  // Labels for the garbler's own input values.
  EncodedInputs<F> encode(const std::vector<F>& values, GcSlot slot) const {
    if (values.size() != relus_) throw LengthMismatch("input width differs from the circuit width");
    EncodedInputs<F> e;
    e.blob_id_ = id_;
    e.slot_ = slot;
    const auto pad = detail::pads<F>(seed_, slot, relus_);
    e.hidden_.resize(relus_);
    for (std::size_t i = 0; i < relus_; ++i) e.hidden_[i] = values[i] + pad[i];
    return e;
  }

  // OT sender: labels for the receiver's choice, without reading the choice.
  EncodedInputs<F> respond(const OtChoice<F>& c) const {
    if (c.blob_id_ != id_) throw ProtocolViolation("OT choice addresses another circuit");
    return encode(c.hidden_, c.slot_);
  }

  std::vector<F> decode(const EncodedOutput<F>& enc) const {
    if (enc.blob_id_ != id_) throw ProtocolViolation("output labels belong to another circuit");
    const auto pad = detail::pads<F>(seed_, GcSlot::Output, relus_);
    std::vector<F> y(relus_);
    for (std::size_t i = 0; i < relus_; ++i) y[i] = enc.hidden_[i] - pad[i];
    return y;
  }

 private:
  std::uint64_t id_ = 0;
  std::uint64_t seed_ = 0;
  std::size_t relus_ = 0;
};

}  // namespace pisim::proto
