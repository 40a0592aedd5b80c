#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "pisim/errors.hpp"
#include "pisim/proto/share.hpp"

namespace pisim::proto {

enum class Phase { Offline, Online };

// LocalState marks material a party generates and keeps for itself (sender == receiver).
enum class PayloadKind {
  Keys,
  EncryptedMasks,
  EncryptedLinearShare,
  GarbledCircuit,
  Labels,
  OTMessage,
  MaskedTensor,
  OutputLabels,
  LocalState
};

inline std::string_view to_string(Phase p) { return p == Phase::Offline ? "offline" : "online"; }

inline std::string_view to_string(PayloadKind k) {
  switch (k) {
    case PayloadKind::Keys: return "keys";
    case PayloadKind::EncryptedMasks: return "encrypted_masks";
    case PayloadKind::EncryptedLinearShare: return "encrypted_linear_share";
    case PayloadKind::GarbledCircuit: return "garbled_circuit";
    case PayloadKind::Labels: return "labels";
    case PayloadKind::OTMessage: return "ot_message";
    case PayloadKind::MaskedTensor: return "masked_tensor";
    case PayloadKind::OutputLabels: return "output_labels";
    case PayloadKind::LocalState: return "local_state";
  }
  return "?";
}

inline PayloadKind parse_payload_kind(std::string_view s) {
  for (auto k : {PayloadKind::Keys, PayloadKind::EncryptedMasks, PayloadKind::EncryptedLinearShare,
                 PayloadKind::GarbledCircuit, PayloadKind::Labels, PayloadKind::OTMessage, PayloadKind::MaskedTensor,
                 PayloadKind::OutputLabels, PayloadKind::LocalState})
    if (to_string(k) == s) return k;
  throw InvalidConfig("unknown payload kind '" + std::string(s) + "'");
}

struct TranscriptEvent {
  Phase phase = Phase::Offline;
  int step = 0;
  Party sender = Party::Client;
  Party receiver = Party::Server;
  std::int64_t bytes = 0;
  bool stored_by_receiver = false;
  PayloadKind payload_kind = PayloadKind::Keys;
  int segment = -1;  // -1 for whole-inference messages
  std::uint64_t clock = 0;

  friend bool operator==(const TranscriptEvent&, const TranscriptEvent&) = default;
};

using Transcript = std::vector<TranscriptEvent>;

inline std::int64_t stored_bytes(const Transcript& t, Party receiver, Phase phase = Phase::Offline) {
  std::int64_t n = 0;
  for (const auto& e : t)
    if (e.phase == phase && e.receiver == receiver && e.stored_by_receiver) n += e.bytes;
  return n;
}

// Bytes that cross the wire (local state excluded).
inline std::int64_t wire_bytes(const Transcript& t, Phase phase, Party sender) {
  std::int64_t n = 0;
  for (const auto& e : t)
    if (e.phase == phase && e.sender == sender && e.sender != e.receiver) n += e.bytes;
  return n;
}

inline std::int64_t kind_bytes(const Transcript& t, PayloadKind k, Phase phase) {
  std::int64_t n = 0;
  for (const auto& e : t)
    if (e.phase == phase && e.payload_kind == k) n += e.bytes;
  return n;
}

inline nlohmann::json to_json(const TranscriptEvent& e) {
  return {{"phase", to_string(e.phase)},
          {"step", e.step},
          {"sender", to_string(e.sender)},
          {"receiver", to_string(e.receiver)},
          {"bytes", e.bytes},
          {"stored_by_receiver", e.stored_by_receiver},
          {"payload_kind", to_string(e.payload_kind)},
          {"segment", e.segment}};
}

inline TranscriptEvent event_from_json(const nlohmann::json& j) {
  TranscriptEvent e;
  const auto party = [](const std::string& s) {
    if (s == "client") return Party::Client;
    if (s == "server") return Party::Server;
    throw InvalidConfig("unknown party '" + s + "'");
  };
  const auto phase = j.at("phase").get<std::string>();
  if (phase != "offline" && phase != "online") throw InvalidConfig("unknown phase '" + phase + "'");
  e.phase = phase == "offline" ? Phase::Offline : Phase::Online;
  e.step = j.at("step").get<int>();
  e.sender = party(j.at("sender").get<std::string>());
  e.receiver = party(j.at("receiver").get<std::string>());
  e.bytes = j.at("bytes").get<std::int64_t>();
  e.stored_by_receiver = j.at("stored_by_receiver").get<bool>();
  e.payload_kind = parse_payload_kind(j.at("payload_kind").get<std::string>());
  e.segment = j.value("segment", -1);
  return e;
}

inline void write_jsonl(std::ostream& os, const Transcript& t) {
  for (const auto& e : t) os << to_json(e).dump() << "\n";
}

inline Transcript read_jsonl(std::istream& in) {
  Transcript t;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      t.push_back(event_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& ex) {
      throw ParseError(ex.what(), n, 1);
    }
  }
  return t;
}

}  // namespace pisim::proto
