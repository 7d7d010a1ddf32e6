#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <vector>

#include "ttpsim/rtunit.hpp"
#include "ttpsim/types.hpp"

namespace ttpsim {

enum class PrefetchPolicy {
  off,
  ttp_dfs,
  ttp_bfs,
  park_leaf,
  perfect_upward,
  perfect_downward,
};

enum class ArbitrationMode { demand_priority, threshold };

struct PrefetchPolicyConfig {
  PrefetchPolicy policy = PrefetchPolicy::off;
  std::array<int, 3> intensity{1, 2, 16};  // emission budget for 1st / 2nd / 3rd+ pop
  int bfs_distance = 4;
  ArbitrationMode arbitration = ArbitrationMode::demand_priority;
  int threshold_cycles = 25;
  int queue_capacity = 32;  // per-thread pending prefetch chunks

  bool enabled() const { return policy != PrefetchPolicy::off; }
  bool emits_prefetches() const {
    return policy == PrefetchPolicy::ttp_dfs || policy == PrefetchPolicy::ttp_bfs ||
           policy == PrefetchPolicy::park_leaf;
  }
};

PrefetchPolicy prefetch_policy_from_string(const std::string& name);
std::string to_string(PrefetchPolicy policy);

// Two-bit pop-streak machine. A push from any state returns to S0; pops move
// S0 -> S1 -> S2 and then hold. The budget attached to a pop is intensity[0]
// for the first pop of a streak, intensity[1] for the second, intensity[2]
// from the third on.
struct TtpFsm {
  enum State : std::uint8_t { S0 = 0, S1 = 1, S2 = 2 };
  State state = S0;

  void on_push() { state = S0; }

  // advances the state and returns the emission budget for this pop
  int on_pop(const std::array<int, 3>& intensity) {
    switch (state) {
      case S0:
        state = S1;
        return intensity[0];
      case S1:
        state = S2;
        return intensity[1];
      default:
        return intensity[2];
    }
  }
};

// Stack-side emitter: FSM plus a cursor that walks down from the top of the
// stack. The cursor only resets on a push, which is what prevents the same
// entry being emitted twice between pushes.
class DfsPrefetchEngine {
 public:
  explicit DfsPrefetchEngine(std::array<int, 3> intensity = {1, 2, 16})
      : intensity_(intensity) {}

  // Feed every stack event in order, with the post-event stack (index 0 =
  // bottom). Pops return the node addresses to prefetch, top-down.
  std::vector<addr_t> on_stack_event(const StackEvent& ev, const std::deque<addr_t>& stack);

  TtpFsm::State state() const { return fsm_.state; }

 private:
  TtpFsm fsm_;
  std::array<int, 3> intensity_;
  long cursor_ = -1;  // next stack index to emit; -1 = exhausted
};

// Queue-side emitter: after each pop, prefetch up to N entries from the head
// of the queue, skipping entries already emitted while enqueued.
class BfsPrefetchEngine {
 public:
  explicit BfsPrefetchEngine(int distance = 4) : distance_(distance) {}

  void on_push() { ++tail_pos_; }
  std::vector<addr_t> on_queue_pop(const std::deque<addr_t>& queue);

 private:
  int distance_;
  std::uint64_t head_pos_ = 0;     // absolute position of the current queue head
  std::uint64_t tail_pos_ = 0;     // absolute position one past the newest entry
  std::uint64_t emitted_pos_ = 0;  // absolute position one past the last emitted entry
};

// Stack prefetch during the leaf primitive test: one address per test cycle,
// top of stack downward, sharing the reset-on-push no-repeat rule.
class ParkLeafPrefetchEngine {
 public:
  void on_push(const std::deque<addr_t>& stack);
  void on_pop(const std::deque<addr_t>& stack);
  std::vector<addr_t> on_leaf_test_start(const std::deque<addr_t>& stack, int duration_cycles);

 private:
  long cursor_ = -1;
};

// Request-port arbiter for one RT unit: exactly one memory request per
// cycle. demand-priority sends prefetches only on cycles without a demand;
// threshold(c) lets a prefetch preempt once c cycles passed since the last
// one.
class PrefetchArbiter {
 public:
  enum class Grant { none, demand, prefetch };

  explicit PrefetchArbiter(ArbitrationMode mode = ArbitrationMode::demand_priority,
                           int threshold = 25)
      : mode_(mode), threshold_(threshold) {}

  Grant pick(bool demand_pending, bool prefetch_pending, std::uint64_t cycle);

 private:
  ArbitrationMode mode_;
  int threshold_;
  std::uint64_t last_prefetch_cycle_ = 0;
};

}  // namespace ttpsim
