#pragma once

// Two-party executors for the server-garbler and client-garbler protocols. Each party is a
// PartyProgram over a DuplexChannel; party state lives in ClientState / ServerState and the two
// only exchange data through channel messages.

#include <any>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "pisim/cost/model.hpp"
#include "pisim/errors.hpp"
#include "pisim/netarch/arch_format.hpp"
#include "pisim/netarch/segments.hpp"
#include "pisim/proto/channel.hpp"
#include "pisim/proto/field.hpp"
#include "pisim/proto/linear.hpp"
#include "pisim/proto/share.hpp"
#include "pisim/proto/standins.hpp"
#include "pisim/proto/transcript.hpp"
#include "pisim/proto/weights.hpp"

namespace pisim::proto {

using cost::Protocol;

inline Party garbler_of(Protocol p) { return p == Protocol::ServerGarbler ? Party::Server : Party::Client; }
inline Party evaluator_of(Protocol p) { return other(garbler_of(p)); }

struct ProtocolOptions {
  std::int64_t input_bound = 255;
  bool check_overflow = true;
  bool threaded = false;             // one thread per party instead of interleaved scheduling
  bool record_layer_shares = false;  // keep both shares of every segment output
  cost::CostModel bytes{};           // byte rates for message sizes
};

// Public description both parties agree on.
struct ArchContext {
  netarch::NetworkArch arch;
  std::vector<netarch::Shape> shapes;
  std::vector<netarch::Segment> segments;
  std::string fingerprint;

  explicit ArchContext(netarch::NetworkArch a)
      : arch(std::move(a)),
        shapes(netarch::infer_shapes(arch)),
        segments(netarch::linear_segments(arch)),
        fingerprint(netarch::serialize_arch(arch)) {}

  std::size_t relu_count() const { return segments.size() - 1; }
  std::size_t relus(std::size_t k) const { return static_cast<std::size_t>(segments[k].output.elems()); }
};

// r_k masks the input of segment k (client), s_k its output (server).
template <class F = Elem>
struct MaskSet {
  std::vector<std::vector<F>> client_masks;
  std::vector<std::vector<F>> server_masks;
  std::uint64_t rng_seed = 0;
};

struct GcBlobInfo {
  int segment = 0;
  std::size_t relus = 0;
  std::int64_t bytes = 0;
  Party holder = Party::Client;
};

struct LabelHolding {
  int segment = 0;
  GcSlot slot = GcSlot::ClientShare;
  Party holder = Party::Client;
  bool obtained_online = false;
};

template <class F = Elem>
struct ClientState {
  std::uint64_t bundle_id = 0;
  Protocol protocol = Protocol::ServerGarbler;
  std::shared_ptr<const ArchContext> ctx;
  std::vector<std::vector<F>> r;       // per segment input
  std::vector<std::vector<F>> shares;  // L_k(r) + s_k per segment
  std::optional<HeSecretKey<F>> he_key;
  // server-garbler: evaluator material
  std::vector<GcBlob<F>> blobs;
  std::vector<EncodedInputs<F>> own_share_labels;
  std::vector<EncodedInputs<F>> next_mask_labels;
  // client-garbler: garbler keys
  std::vector<GarblerKey<F>> keys;
  bool consumed = false;
};

template <class F = Elem>
struct ServerState {
  std::uint64_t bundle_id = 0;
  Protocol protocol = Protocol::ServerGarbler;
  std::shared_ptr<const ArchContext> ctx;
  std::shared_ptr<const NetworkWeights> weights;
  std::vector<std::vector<F>> s;
  std::map<int, Ciphertext<F>> enc_masks;  // keyed by the layer producing the masked tensor
  // server-garbler: garbler keys
  std::vector<GarblerKey<F>> keys;
  // client-garbler: evaluator material
  std::vector<GcBlob<F>> blobs;
  std::vector<EncodedInputs<F>> client_share_labels;
  std::vector<EncodedInputs<F>> next_mask_labels;
  bool consumed = false;
};

// One inference's worth of offline material. The bookkeeping fields mirror what the party
// states hold; the states are what online_phase consumes.
template <class F = Elem>
struct PrecomputeBundle {
  std::uint64_t id = 0;
  Protocol protocol = Protocol::ServerGarbler;
  MaskSet<F> masks;
  std::vector<std::vector<F>> client_linear_shares;
  std::vector<GcBlobInfo> gc_blobs;
  std::vector<LabelHolding> evaluator_held_labels;
  Party owner_of_gc = Party::Client;
  ClientState<F> client;
  ServerState<F> server;

  bool consumed() const { return client.consumed || server.consumed; }
  std::int64_t gc_bytes() const {
    std::int64_t n = 0;
    for (const auto& g : gc_blobs) n += g.bytes;
    return n;
  }
};

template <class F = Elem>
struct OfflineResult {
  PrecomputeBundle<F> bundle;
  Transcript transcript;
};

template <class F = Elem>
struct InferenceResult {
  std::pair<Share<F>, Share<F>> output_shares;  // client, server
  std::vector<F> logits;
  Transcript transcript;
  std::vector<std::pair<Share<F>, Share<F>>> segment_shares;  // filled with record_layer_shares

  std::vector<std::int64_t> signed_logits() const {
    std::vector<std::int64_t> out(logits.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = logits[i].to_signed();
    return out;
  }
};

namespace detail {

inline std::int64_t bytes_of(double per_unit, double units) { return std::llround(per_unit * units); }

template <class T>
const T& payload(const Message& m) {
  const T* p = std::any_cast<T>(&m.payload);
  if (!p) throw ProtocolViolation("message payload has an unexpected type");
  return *p;
}

inline Message msg(PayloadKind k, int segment, std::int64_t bytes, bool stored, std::any payload = {}) {
  Message m;
  m.kind = k;
  m.segment = segment;
  m.bytes = bytes;
  m.stored = stored;
  m.payload = std::move(payload);
  return m;
}

// Step that completes once a message of kind `k` arrives for `me`.
inline std::function<bool()> on_recv(DuplexChannel& ch, Party me, PayloadKind k, int segment,
                                     std::function<void(const Message&)> handle) {
  return [&ch, me, k, segment, handle = std::move(handle)] {
    auto m = ch.try_recv(me, k, segment);
    if (!m) return false;
    handle(*m);
    return true;
  };
}

inline std::function<bool()> always(std::function<void()> f) {
  return [f = std::move(f)] {
    f();
    return true;
  };
}

inline void run(PartyProgram& c, PartyProgram& s, DuplexChannel& ch, bool threaded) {
  if (threaded)
    run_threaded(c, s, ch);
  else
    run_interleaved(c, s, ch);
}

inline std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (std::uint64_t{out[0]} << 32) | out[1];
}

// Sources of segment k keyed by producing layer, looked up in a per-layer store.
template <class T>
std::map<int, T> gather(const netarch::NetworkArch& arch, const netarch::Segment& seg, const std::map<int, T>& store) {
  std::map<int, T> out;
  for (int layer : segment_sources(arch, seg)) {
    auto it = store.find(layer);
    if (it == store.end()) throw ProtocolViolation("no masked tensor for layer " + std::to_string(layer));
    out.emplace(layer, it->second);
  }
  return out;
}

template <class F>
std::vector<F> sub(std::vector<F> a, const std::vector<F>& b) {
  if (a.size() != b.size()) throw LengthMismatch("vector lengths differ");
  for (std::size_t i = 0; i < a.size(); ++i) a[i] -= b[i];
  return a;
}

template <class F>
std::vector<F> add(std::vector<F> a, const std::vector<F>& b) {
  if (a.size() != b.size()) throw LengthMismatch("vector lengths differ");
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  return a;
}

}  // namespace detail

// ---------------------------------------------------------------------------------------------
// Offline phase

template <class F = Elem>
OfflineResult<F> offline_phase(Protocol protocol, const netarch::NetworkArch& arch, const NetworkWeights& weights,
                               std::uint64_t seed, const ProtocolOptions& opt = {}) {
  netarch::validate(arch);
  check_weights(arch, weights);
  netarch::check_share_topology(arch);
  if (opt.check_overflow) check_field_capacity<F>(arch, weights, static_cast<long double>(opt.input_bound));

  const auto ctx = std::make_shared<const ArchContext>(arch);
  const auto nw = std::make_shared<const NetworkWeights>(weights);
  const auto& segs = ctx->segments;
  const std::size_t K = segs.size();
  const std::size_t R = ctx->relu_count();
  const auto& cm = opt.bytes;
  const bool sg = protocol == Protocol::ServerGarbler;
  const std::uint64_t bundle_id = detail::mix(seed, 0) | 1;

  ClientState<F> cs;
  cs.bundle_id = bundle_id;
  cs.protocol = protocol;
  cs.ctx = ctx;
  cs.r.resize(K);
  cs.shares.resize(K);
  ServerState<F> ss;
  ss.bundle_id = bundle_id;
  ss.protocol = protocol;
  ss.ctx = ctx;
  ss.weights = nw;
  ss.s.resize(K);

  std::mt19937_64 client_rng(detail::mix(seed, 1));
  std::mt19937_64 server_rng(detail::mix(seed, 2));

  DuplexChannel ch;
  ch.set_phase(Phase::Offline);
  PartyProgram client(Party::Client), server(Party::Server);
  const Party C = Party::Client, S = Party::Server;

  // client
  client.add(detail::always([&] {
    cs.he_key.emplace(client_rng() | 1);
    ch.send(C, detail::msg(PayloadKind::Keys, -1, detail::bytes_of(cm.key_bytes, 1), false, cs.he_key->public_key()));
  }));
  for (std::size_t k = 0; k < K; ++k)
    client.add(detail::always([&, k] {
      const auto n = static_cast<double>(segs[k].input.elems());
      cs.r[k] = uniform_vector<F>(static_cast<std::size_t>(n), client_rng);
      ch.keep(C, static_cast<int>(k), detail::bytes_of(cm.secret_bytes_per_elem, n));
      ch.send(C, detail::msg(PayloadKind::EncryptedMasks, static_cast<int>(k), detail::bytes_of(cm.he_ct_bytes_per_elem, n),
                             false, cs.he_key->encrypt(cs.r[k])));
    }));
  client.add(detail::always([&] { ch.send(C, detail::msg(PayloadKind::OTMessage, -1, detail::bytes_of(cm.base_ot_bytes, 1), false)); }));
  client.add(detail::on_recv(ch, C, PayloadKind::OTMessage, -1, [](const Message&) {}));
  for (std::size_t k = 0; k < K; ++k)
    client.add(detail::on_recv(ch, C, PayloadKind::EncryptedLinearShare, static_cast<int>(k), [&, k](const Message& m) {
      cs.shares[k] = cs.he_key->decrypt(detail::payload<Ciphertext<F>>(m));
      ch.keep(C, static_cast<int>(k), detail::bytes_of(cm.secret_bytes_per_elem, static_cast<double>(cs.shares[k].size())));
    }));
  if (sg) {
    cs.blobs.resize(R);
    cs.own_share_labels.resize(R);
    cs.next_mask_labels.resize(R);
    for (std::size_t k = 0; k < R; ++k)
      client.add(detail::on_recv(ch, C, PayloadKind::GarbledCircuit, static_cast<int>(k),
                                 [&, k](const Message& m) { cs.blobs[k] = detail::payload<GcBlob<F>>(m); }));
    for (std::size_t k = 0; k < R; ++k) {
      client.add(detail::always([&, k] {
        const auto id = cs.blobs[k].id();
        auto choice = std::make_pair(ot_choose<F>(id, GcSlot::ClientShare, cs.shares[k]),
                                     ot_choose<F>(id, GcSlot::NextMask, cs.r[k + 1]));
        ch.send(C, detail::msg(PayloadKind::OTMessage, static_cast<int>(k),
                               detail::bytes_of(cm.offline_label_bytes_per_relu(), static_cast<double>(ctx->relus(k))), false,
                               std::move(choice)));
      }));
      client.add(detail::on_recv(ch, C, PayloadKind::Labels, static_cast<int>(k), [&, k](const Message& m) {
        const auto& [a, b] = detail::payload<std::pair<EncodedInputs<F>, EncodedInputs<F>>>(m);
        cs.own_share_labels[k] = a;
        cs.next_mask_labels[k] = b;
      }));
    }
  } else {
    cs.keys.resize(R);
    for (std::size_t k = 0; k < R; ++k)
      client.add(detail::always([&, k] {
        const auto n = ctx->relus(k);
        auto [key, blob] = GarblerKey<F>::garble(C, static_cast<int>(k), n,
                                                 detail::bytes_of(cm.gc_table_bytes_per_relu(), static_cast<double>(n)),
                                                 true, client_rng);
        cs.keys[k] = key;
        const auto bytes = blob.bytes();
        ch.send(C, detail::msg(PayloadKind::GarbledCircuit, static_cast<int>(k), bytes, true, std::move(blob)));
        ch.send(C, detail::msg(PayloadKind::Labels, static_cast<int>(k),
                               detail::bytes_of(cm.offline_label_bytes_per_relu(), static_cast<double>(n)), true,
                               std::make_pair(key.encode(cs.shares[k], GcSlot::ClientShare),
                                              key.encode(cs.r[k + 1], GcSlot::NextMask))));
      }));
  }

  // server
  server.add(detail::on_recv(ch, S, PayloadKind::Keys, -1, [](const Message&) {}));
  for (std::size_t k = 0; k < K; ++k)
    server.add(detail::on_recv(ch, S, PayloadKind::EncryptedMasks, static_cast<int>(k), [&, k](const Message& m) {
      ss.enc_masks[segs[k].input_layer] = detail::payload<Ciphertext<F>>(m);
      const auto n = static_cast<double>(segs[k].output.elems());
      ss.s[k] = uniform_vector<F>(static_cast<std::size_t>(n), server_rng);
      ch.keep(S, static_cast<int>(k), detail::bytes_of(cm.secret_bytes_per_elem, n));
    }));
  server.add(detail::on_recv(ch, S, PayloadKind::OTMessage, -1, [&](const Message&) {
    ch.send(S, detail::msg(PayloadKind::OTMessage, -1, detail::bytes_of(cm.base_ot_bytes, 1), false));
  }));
  for (std::size_t k = 0; k < K; ++k)
    server.add(detail::always([&, k] {
      const auto enc = detail::gather(ctx->arch, segs[k], ss.enc_masks);
      auto ct = he_linear_plus_mask<F>(ctx->arch, *nw, ctx->shapes, segs[k], enc, ss.s[k]);
      ch.send(S, detail::msg(PayloadKind::EncryptedLinearShare, static_cast<int>(k),
                             detail::bytes_of(cm.he_ct_bytes_per_elem, static_cast<double>(segs[k].output.elems())), false,
                             std::move(ct)));
    }));
  if (sg) {
    ss.keys.resize(R);
    for (std::size_t k = 0; k < R; ++k)
      server.add(detail::always([&, k] {
        const auto n = ctx->relus(k);
        auto [key, blob] = GarblerKey<F>::garble(S, static_cast<int>(k), n,
                                                 detail::bytes_of(cm.gc_table_bytes_per_relu(), static_cast<double>(n)),
                                                 false, server_rng);
        ss.keys[k] = key;
        const auto bytes = blob.bytes();
        ch.send(S, detail::msg(PayloadKind::GarbledCircuit, static_cast<int>(k), bytes, true, std::move(blob)));
      }));
    for (std::size_t k = 0; k < R; ++k)
      server.add(detail::on_recv(ch, S, PayloadKind::OTMessage, static_cast<int>(k), [&, k](const Message& m) {
        const auto& [a, b] = detail::payload<std::pair<OtChoice<F>, OtChoice<F>>>(m);
        ch.send(S, detail::msg(PayloadKind::Labels, static_cast<int>(k),
                               detail::bytes_of(cm.offline_label_bytes_per_relu(), static_cast<double>(ctx->relus(k))), true,
                               std::make_pair(ss.keys[k].respond(a), ss.keys[k].respond(b))));
      }));
  } else {
    ss.blobs.resize(R);
    ss.client_share_labels.resize(R);
    ss.next_mask_labels.resize(R);
    for (std::size_t k = 0; k < R; ++k) {
      server.add(detail::on_recv(ch, S, PayloadKind::GarbledCircuit, static_cast<int>(k),
                                 [&, k](const Message& m) { ss.blobs[k] = detail::payload<GcBlob<F>>(m); }));
      server.add(detail::on_recv(ch, S, PayloadKind::Labels, static_cast<int>(k), [&, k](const Message& m) {
        const auto& [a, b] = detail::payload<std::pair<EncodedInputs<F>, EncodedInputs<F>>>(m);
        ss.client_share_labels[k] = a;
        ss.next_mask_labels[k] = b;
      }));
    }
  }

  detail::run(client, server, ch, opt.threaded);
  if (!ch.idle()) throw ProtocolViolation("offline phase ended with undelivered messages");
  ss.enc_masks.clear();  // only needed while producing the linear shares

  OfflineResult<F> out;
  auto& b = out.bundle;
  b.id = bundle_id;
  b.protocol = protocol;
  b.masks.client_masks = cs.r;
  b.masks.server_masks = ss.s;
  b.masks.rng_seed = seed;
  b.client_linear_shares = cs.shares;
  b.owner_of_gc = evaluator_of(protocol);
  for (std::size_t k = 0; k < R; ++k) {
    const auto n = ctx->relus(k);
    b.gc_blobs.push_back({static_cast<int>(k), n, detail::bytes_of(cm.gc_table_bytes_per_relu(), static_cast<double>(n)),
                          b.owner_of_gc});
    b.evaluator_held_labels.push_back({static_cast<int>(k), GcSlot::ClientShare, b.owner_of_gc, false});
    b.evaluator_held_labels.push_back({static_cast<int>(k), GcSlot::NextMask, b.owner_of_gc, false});
    // the server's share is only known online: sent in the clear by a server garbler, or
    // fetched through OT by a server evaluator
    b.evaluator_held_labels.push_back({static_cast<int>(k), GcSlot::ServerShare, b.owner_of_gc, !sg});
  }
  b.client = std::move(cs);
  b.server = std::move(ss);
  out.transcript = ch.transcript();
  return out;
}

// ---------------------------------------------------------------------------------------------
// Online phase

template <class F = Elem>
InferenceResult<F> online_phase(Protocol protocol, ClientState<F>& cs, ServerState<F>& ss,
                                const std::vector<std::int64_t>& input, const ProtocolOptions& opt = {}) {
  if (cs.bundle_id != ss.bundle_id) throw BundleMismatch("client and server states come from different bundles");
  if (cs.protocol != protocol || ss.protocol != protocol)
    throw BundleMismatch("bundle was generated for the " + std::string(cost::long_name(cs.protocol)) + " protocol");
  if (!cs.ctx || !ss.ctx || cs.ctx->fingerprint != ss.ctx->fingerprint)
    throw BundleMismatch("party states describe different architectures");
  if (cs.consumed || ss.consumed) throw BundleConsumed("precompute bundle already used by an inference");
  const auto ctx = cs.ctx;
  if (static_cast<std::int64_t>(input.size()) != ctx->arch.input_shape().elems())
    throw ShapeMismatch("input has " + std::to_string(input.size()) + " elements, network expects " +
                        std::to_string(ctx->arch.input_shape().elems()));
  for (auto v : input)
    if (v > opt.input_bound || v < -opt.input_bound) throw FieldOverflowRisk("input value exceeds the configured bound");
  cs.consumed = true;
  ss.consumed = true;

  const auto& segs = ctx->segments;
  const std::size_t K = segs.size();
  const std::size_t R = ctx->relu_count();
  const auto& cm = opt.bytes;
  const bool sg = protocol == Protocol::ServerGarbler;
  const auto& arch = ctx->arch;
  const auto& nw = *ss.weights;

  DuplexChannel ch;
  ch.set_phase(Phase::Online);
  PartyProgram client(Party::Client), server(Party::Server);
  const Party C = Party::Client, S = Party::Server;

  InferenceResult<F> res;
  std::vector<F> final_server;
  std::map<int, std::vector<F>> masked;  // server: y - r per segment input layer
  std::vector<std::vector<F>> server_shares(K);
  const int last_layer = static_cast<int>(arch.layers.size()) - 1;

  // client
  client.add(detail::always([&] {
    std::vector<F> x(input.size());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = F::from_signed(input[i]) - cs.r[0][i];
    const auto bytes = detail::bytes_of(cm.wire_bytes_per_elem, static_cast<double>(x.size()));
    ch.send(C, detail::msg(PayloadKind::MaskedTensor, 0, bytes, false, std::move(x)));
  }));
  for (std::size_t k = 0; k < R; ++k) {
    const auto n = static_cast<double>(ctx->relus(k));
    if (sg) {
      client.add(detail::on_recv(ch, C, PayloadKind::Labels, static_cast<int>(k), [&, k, n](const Message& m) {
        auto out = cs.blobs[k].evaluate(cs.own_share_labels[k], cs.next_mask_labels[k], detail::payload<EncodedInputs<F>>(m));
        ch.send(C, detail::msg(PayloadKind::OutputLabels, static_cast<int>(k),
                               detail::bytes_of(cm.online_label_bytes_per_relu(), n), false, std::move(out)));
      }));
    } else {
      client.add(detail::on_recv(ch, C, PayloadKind::OTMessage, static_cast<int>(k), [&, k, n](const Message& m) {
        auto enc = cs.keys[k].respond(detail::payload<OtChoice<F>>(m));
        ch.send(C, detail::msg(PayloadKind::OTMessage, static_cast<int>(k),
                               detail::bytes_of(2 * cm.online_label_bytes_per_relu(), n), false, std::move(enc)));
      }));
    }
  }
  client.add(detail::on_recv(ch, C, PayloadKind::MaskedTensor, static_cast<int>(K - 1),
                             [&](const Message& m) { final_server = detail::payload<std::vector<F>>(m); }));

  // server
  server.add(detail::on_recv(ch, S, PayloadKind::MaskedTensor, 0,
                             [&](const Message& m) { masked[segs[0].input_layer] = detail::payload<std::vector<F>>(m); }));
  for (std::size_t k = 0; k < K; ++k) {
    server.add(detail::always([&, k] {
      const auto src = detail::gather(arch, segs[k], masked);
      server_shares[k] = detail::sub(eval_segment<F>(arch, nw, ctx->shapes, segs[k], src, true), ss.s[k]);
      const auto n = static_cast<double>(server_shares[k].size());
      if (k + 1 == K) {
        ch.send(S, detail::msg(PayloadKind::MaskedTensor, static_cast<int>(k), detail::bytes_of(cm.wire_bytes_per_elem, n),
                               false, server_shares[k]));
      } else if (sg) {
        ch.send(S, detail::msg(PayloadKind::Labels, static_cast<int>(k), detail::bytes_of(cm.online_label_bytes_per_relu(), n),
                               false, ss.keys[k].encode(server_shares[k], GcSlot::ServerShare)));
      } else {
        ch.send(S, detail::msg(PayloadKind::OTMessage, static_cast<int>(k), detail::bytes_of(cm.online_label_bytes_per_relu(), n),
                               false, ot_choose<F>(ss.blobs[k].id(), GcSlot::ServerShare, server_shares[k])));
      }
    }));
    if (k + 1 == K) break;
    const int next_input = segs[k + 1].input_layer;
    if (sg) {
      server.add(detail::on_recv(ch, S, PayloadKind::OutputLabels, static_cast<int>(k), [&, k, next_input](const Message& m) {
        masked[next_input] = ss.keys[k].decode(detail::payload<EncodedOutput<F>>(m));
      }));
    } else {
      server.add(detail::on_recv(ch, S, PayloadKind::OTMessage, static_cast<int>(k), [&, k, next_input](const Message& m) {
        const auto out =
            ss.blobs[k].evaluate(ss.client_share_labels[k], ss.next_mask_labels[k], detail::payload<EncodedInputs<F>>(m));
        masked[next_input] = ss.blobs[k].decode(out);
      }));
    }
  }

  detail::run(client, server, ch, opt.threaded);
  if (!ch.idle()) throw ProtocolViolation("online phase ended with undelivered messages");

  Share<F> c_out{Party::Client, cs.shares[K - 1], last_layer};
  Share<F> s_out{Party::Server, final_server, last_layer};
  res.logits = reconstruct(c_out, s_out);
  res.output_shares = {std::move(c_out), std::move(s_out)};
  if (opt.record_layer_shares)
    for (std::size_t k = 0; k < K; ++k) {
      const int layer = segs[k].empty() ? segs[k].input_layer : segs[k].last;
      res.segment_shares.push_back({Share<F>{Party::Client, cs.shares[k], layer}, Share<F>{Party::Server, server_shares[k], layer}});
    }
  res.transcript = ch.transcript();
  return res;
}

template <class F = Elem>
InferenceResult<F> online_phase(Protocol protocol, PrecomputeBundle<F>& bundle, const std::vector<std::int64_t>& input,
                                const ProtocolOptions& opt = {}) {
  if (bundle.protocol != protocol)
    throw BundleMismatch("bundle was generated for the " + std::string(cost::long_name(bundle.protocol)) + " protocol");
  return online_phase<F>(protocol, bundle.client, bundle.server, input, opt);
}

// ---------------------------------------------------------------------------------------------
// Single-layer building blocks

struct IntMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<std::int64_t> data;  // row-major

  std::int64_t at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
};

namespace detail {
template <class F>
std::vector<F> matvec(const IntMatrix& w, const std::vector<F>& x) {
  if (static_cast<std::int64_t>(w.data.size()) != std::int64_t{w.rows} * w.cols)
    throw ShapeMismatch("matrix data does not match its dimensions");
  if (static_cast<int>(x.size()) != w.cols)
    throw ShapeMismatch("matrix has " + std::to_string(w.cols) + " columns, vector has " + std::to_string(x.size()));
  std::vector<F> y(static_cast<std::size_t>(w.rows));
  for (int r = 0; r < w.rows; ++r) {
    F acc{};
    for (int c = 0; c < w.cols; ++c) acc += F::from_signed(w.at(r, c)) * x[static_cast<std::size_t>(c)];
    y[static_cast<std::size_t>(r)] = acc;
  }
  return y;
}
}  // namespace detail

// <x>_s = W (y - r) - s
template <class F = Elem>
Share<F> linear_layer_server_share(const IntMatrix& w, const std::vector<F>& masked_input, const std::vector<F>& s,
                                   int layer_index = 0) {
  auto y = detail::matvec(w, masked_input);
  if (s.size() != y.size()) throw ShapeMismatch("server mask length differs from the layer output");
  return {Party::Server, detail::sub(std::move(y), s), layer_index};
}

// <x>_c = W r + s, what the HE step hands the client
template <class F = Elem>
Share<F> linear_layer_client_share(const IntMatrix& w, const std::vector<F>& r, const std::vector<F>& s,
                                   int layer_index = 0) {
  auto y = detail::matvec(w, r);
  if (s.size() != y.size()) throw ShapeMismatch("server mask length differs from the layer output");
  return {Party::Client, detail::add(std::move(y), s), layer_index};
}

template <class F = Elem>
struct ReluGadgetResult {
  std::vector<F> server_masked;  // ReLU(x) - r_next, held by the server
  Transcript transcript;
};

// One garbled ReLU in isolation: the garbler is the non-evaluator, offline label transfer
// included. The result always lands at the server.
template <class F = Elem>
ReluGadgetResult<F> relu_gadget(const Share<F>& server_share, const Share<F>& client_share, const std::vector<F>& r_next,
                                Party evaluator, std::uint64_t seed = 0, const cost::CostModel& cm = {}) {
  if (server_share.party != Party::Server || client_share.party != Party::Client)
    throw PartyMismatch("relu_gadget needs one server share and one client share");
  const auto n = server_share.values.size();
  if (client_share.values.size() != n || r_next.size() != n) throw LengthMismatch("ReLU gadget inputs differ in length");
  const Party garbler = other(evaluator);
  std::mt19937_64 rng(detail::mix(seed, 3));
  auto [key, blob] = GarblerKey<F>::garble(garbler, 0, n, detail::bytes_of(cm.gc_table_bytes_per_relu(), static_cast<double>(n)),
                                           evaluator == Party::Server, rng);
  const auto dn = static_cast<double>(n);
  const auto off_labels = detail::bytes_of(cm.offline_label_bytes_per_relu(), dn);
  const auto on_labels = detail::bytes_of(cm.online_label_bytes_per_relu(), dn);

  DuplexChannel ch;
  ch.set_phase(Phase::Offline);
  ch.send(garbler, detail::msg(PayloadKind::GarbledCircuit, 0, blob.bytes(), true));
  EncodedInputs<F> c_lab, r_lab;
  if (evaluator == Party::Client) {
    // client inputs through OT
    ch.send(Party::Client, detail::msg(PayloadKind::OTMessage, 0, off_labels, false));
    c_lab = key.respond(ot_choose<F>(key.blob_id(), GcSlot::ClientShare, client_share.values));
    r_lab = key.respond(ot_choose<F>(key.blob_id(), GcSlot::NextMask, r_next));
    ch.send(Party::Server, detail::msg(PayloadKind::Labels, 0, off_labels, true));
  } else {
    c_lab = key.encode(client_share.values, GcSlot::ClientShare);
    r_lab = key.encode(r_next, GcSlot::NextMask);
    ch.send(Party::Client, detail::msg(PayloadKind::Labels, 0, off_labels, true));
  }
  ch.set_phase(Phase::Online);
  ReluGadgetResult<F> out;
  if (evaluator == Party::Client) {
    ch.send(Party::Server, detail::msg(PayloadKind::Labels, 0, on_labels, false));
    const auto s_lab = key.encode(server_share.values, GcSlot::ServerShare);
    const auto enc = blob.evaluate(c_lab, r_lab, s_lab);
    ch.send(Party::Client, detail::msg(PayloadKind::OutputLabels, 0, on_labels, false));
    out.server_masked = key.decode(enc);
  } else {
    ch.send(Party::Server, detail::msg(PayloadKind::OTMessage, 0, on_labels, false));
    const auto s_lab = key.respond(ot_choose<F>(key.blob_id(), GcSlot::ServerShare, server_share.values));
    ch.send(Party::Client, detail::msg(PayloadKind::OTMessage, 0, 2 * on_labels, false));
    out.server_masked = blob.decode(blob.evaluate(c_lab, r_lab, s_lab));
  }
  out.transcript = ch.transcript();
  return out;
}

// ---------------------------------------------------------------------------------------------
// Correctness harness

struct TrialBytes {
  std::int64_t offline = 0;
  std::int64_t online = 0;
  std::int64_t client_stored = 0;
  std::int64_t server_stored = 0;
};

struct VerifyReport {
  int trials = 0;
  int failures = 0;
  std::vector<TrialBytes> per_trial;
};

inline std::int64_t phase_total(const Transcript& t, Phase p) {
  return wire_bytes(t, p, Party::Client) + wire_bytes(t, p, Party::Server);
}

// Index of the first segment whose reconstructed output differs from the plaintext trace, or -1.
template <class F>
int first_share_mismatch(const std::vector<Tensor64>& trace, const std::vector<std::int64_t>& input,
                         const InferenceResult<F>& res) {
  for (std::size_t k = 0; k < res.segment_shares.size(); ++k) {
    const auto& [c, s] = res.segment_shares[k];
    const auto got = reconstruct(c, s);
    const auto& want = c.layer_index < 0 ? input : trace[static_cast<std::size_t>(c.layer_index)];
    if (got.size() != want.size()) return static_cast<int>(k);
    for (std::size_t i = 0; i < got.size(); ++i)
      if (got[i].to_signed() != want[i]) return static_cast<int>(k);
  }
  return -1;
}

template <class F = Elem>
VerifyReport verify_against_plaintext(Protocol protocol, const netarch::NetworkArch& arch, const NetworkWeights& weights,
                                      int n_trials, std::uint64_t seed, ProtocolOptions opt = {}) {
  VerifyReport rep;
  if (n_trials <= 0) return rep;
  netarch::validate(arch);
  check_weights(arch, weights);
  if (opt.check_overflow) check_field_capacity<F>(arch, weights, static_cast<long double>(opt.input_bound));
  opt.record_layer_shares = true;
  for (int t = 0; t < n_trials; ++t) {
    const auto trial_seed = detail::mix(seed, 100 + static_cast<std::uint64_t>(t));
    const auto input = random_input(arch, trial_seed, -opt.input_bound, opt.input_bound);
    auto off = offline_phase<F>(protocol, arch, weights, trial_seed, opt);
    const auto res = online_phase<F>(protocol, off.bundle, input, opt);
    const auto trace = reference_forward(arch, weights, input);
    const auto& want = trace.empty() ? input : trace.back();
    bool ok = res.logits.size() == want.size();
    for (std::size_t i = 0; ok && i < want.size(); ++i) ok = res.logits[i].to_signed() == want[i];
    if (ok) ok = first_share_mismatch(trace, input, res) < 0;
    ++rep.trials;
    if (!ok) ++rep.failures;
    rep.per_trial.push_back({phase_total(off.transcript, Phase::Offline), phase_total(res.transcript, Phase::Online),
                             stored_bytes(off.transcript, Party::Client), stored_bytes(off.transcript, Party::Server)});
  }
  return rep;
}

}  // namespace pisim::proto
