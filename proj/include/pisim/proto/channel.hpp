#pragma once

#include <algorithm>
#include <any>
#include <condition_variable>
#include <deque>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <thread>
#include <tuple>
#include <vector>

#include "pisim/errors.hpp"
#include "pisim/proto/transcript.hpp"

namespace pisim::proto {

struct Message {
  PayloadKind kind = PayloadKind::Keys;
  int segment = -1;
  std::int64_t bytes = 0;
  bool stored = false;
  std::any payload;
  std::uint64_t clock = 0;
};

// In-memory duplex link between the two parties; the only state they share. Every send and
// every locally kept artifact is logged with the sender's Lamport clock, so the transcript
// order depends only on causality, not on thread timing.
class DuplexChannel {
 public:
  void set_phase(Phase p) {
    std::lock_guard lk(mu_);
    phase_ = p;
  }

  void send(Party from, Message m) {
    {
      std::lock_guard lk(mu_);
      if (closed_) throw ProtocolViolation("send on a closed channel");
      m.clock = ++clock_[idx(from)];
      log(from, other(from), m);
      queue_[idx(other(from))].push_back(std::move(m));
    }
    cv_.notify_all();
  }

  // Logs material `p` keeps for itself without crossing the wire.
  void keep(Party p, int segment, std::int64_t bytes) {
    std::lock_guard lk(mu_);
    Message m;
    m.kind = PayloadKind::LocalState;
    m.segment = segment;
    m.bytes = bytes;
    m.stored = true;
    m.clock = ++clock_[idx(p)];
    log(p, p, m);
  }

  // Next message for `me`, which must be of kind `want` (and segment, if given).
  std::optional<Message> try_recv(Party me, PayloadKind want, int segment = -2) {
    std::lock_guard lk(mu_);
    auto& q = queue_[idx(me)];
    if (q.empty()) return std::nullopt;
    Message m = std::move(q.front());
    q.pop_front();
    if (m.kind != want || (segment != -2 && m.segment != segment))
      throw ProtocolViolation(std::string(to_string(me)) + " expected " + std::string(to_string(want)) + " but got " +
                              std::string(to_string(m.kind)));
    clock_[idx(me)] = std::max(clock_[idx(me)], m.clock) + 1;
    return m;
  }

  // Blocks until a message for `me` is queued. Returns false if none can ever arrive.
  bool wait(Party me) {
    std::unique_lock lk(mu_);
    cv_.wait(lk, [&] { return !queue_[idx(me)].empty() || closed_ || finished_[idx(other(me))]; });
    return !queue_[idx(me)].empty();
  }

  void finish(Party p) {
    {
      std::lock_guard lk(mu_);
      finished_[idx(p)] = true;
    }
    cv_.notify_all();
  }

  void close() {
    {
      std::lock_guard lk(mu_);
      closed_ = true;
    }
    cv_.notify_all();
  }

  bool idle() const {
    std::lock_guard lk(mu_);
    return queue_[0].empty() && queue_[1].empty();
  }

  // Events ordered by (phase, clock, party), numbered per phase.
  Transcript transcript() const {
    std::lock_guard lk(mu_);
    Transcript t = log_;
    std::stable_sort(t.begin(), t.end(), [](const TranscriptEvent& a, const TranscriptEvent& b) {
      return std::tuple(a.phase, a.clock, a.sender) < std::tuple(b.phase, b.clock, b.sender);
    });
    int step[2] = {0, 0};
    for (auto& e : t) e.step = step[e.phase == Phase::Offline ? 0 : 1]++;
    return t;
  }

 private:
  static std::size_t idx(Party p) { return p == Party::Client ? 0 : 1; }

  void log(Party from, Party to, const Message& m) {
    TranscriptEvent e;
    e.phase = phase_;
    e.sender = from;
    e.receiver = to;
    e.bytes = m.bytes;
    e.stored_by_receiver = m.stored;
    e.payload_kind = m.kind;
    e.segment = m.segment;
    e.clock = m.clock;
    log_.push_back(e);
  }

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Message> queue_[2];
  std::uint64_t clock_[2] = {0, 0};
  bool finished_[2] = {false, false};
  bool closed_ = false;
  Phase phase_ = Phase::Offline;
  Transcript log_;
};

// A party's protocol as a list of resumable steps. A step returns false when the message it
// needs has not arrived yet; it must not have side effects before its receive succeeds.
class PartyProgram {
 public:
  explicit PartyProgram(Party p) : party_(p) {}

  void add(std::function<bool()> step) { steps_.push_back(std::move(step)); }
  Party party() const { return party_; }
  bool done() const { return pc_ >= steps_.size(); }

  // Runs until blocked or finished; returns whether any step completed.
  bool advance() {
    bool progressed = false;
    while (!done() && steps_[pc_]()) {
      ++pc_;
      progressed = true;
    }
    return progressed;
  }

 private:
  Party party_;
  std::vector<std::function<bool()>> steps_;
  std::size_t pc_ = 0;
};

// Deterministic single-thread scheduling: alternate the parties until both finish.
inline void run_interleaved(PartyProgram& a, PartyProgram& b, DuplexChannel&) {
  while (!a.done() || !b.done()) {
    const bool pa = a.advance();
    const bool pb = b.advance();
    if (!pa && !pb && (!a.done() || !b.done())) throw ProtocolViolation("protocol deadlock: both parties are waiting");
  }
}

// One thread per party; the channel is the only shared state.
inline void run_threaded(PartyProgram& a, PartyProgram& b, DuplexChannel& ch) {
  std::exception_ptr err[2];
  const auto body = [&ch](PartyProgram& p, std::exception_ptr& e) {
    try {
      while (true) {
        p.advance();
        if (p.done()) break;
        if (!ch.wait(p.party())) throw ProtocolViolation("protocol deadlock: peer finished while a message was awaited");
      }
    } catch (...) {
      e = std::current_exception();
      ch.close();
    }
    ch.finish(p.party());
  };
  std::thread ta(body, std::ref(a), std::ref(err[0]));
  std::thread tb(body, std::ref(b), std::ref(err[1]));
  ta.join();
  tb.join();
  for (auto& e : err)
    if (e) std::rethrow_exception(e);
}

}  // namespace pisim::proto
