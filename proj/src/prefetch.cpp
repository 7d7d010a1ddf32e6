#include "ttpsim/prefetch.hpp"

#include <algorithm>

namespace ttpsim {

PrefetchPolicy prefetch_policy_from_string(const std::string& name) {
  if (name == "off") return PrefetchPolicy::off;
  if (name == "ttp-dfs") return PrefetchPolicy::ttp_dfs;
  if (name == "ttp-bfs") return PrefetchPolicy::ttp_bfs;
  if (name == "park-leaf") return PrefetchPolicy::park_leaf;
  if (name == "perfect-upward") return PrefetchPolicy::perfect_upward;
  if (name == "perfect-downward") return PrefetchPolicy::perfect_downward;
  throw ConfigError("unknown policy '" + name + "'");
}

std::string to_string(PrefetchPolicy policy) {
  switch (policy) {
    case PrefetchPolicy::off:
      return "off";
    case PrefetchPolicy::ttp_dfs:
      return "ttp-dfs";
    case PrefetchPolicy::ttp_bfs:
      return "ttp-bfs";
    case PrefetchPolicy::park_leaf:
      return "park-leaf";
    case PrefetchPolicy::perfect_upward:
      return "perfect-upward";
    case PrefetchPolicy::perfect_downward:
      return "perfect-downward";
  }
  return "?";
}

std::vector<addr_t> DfsPrefetchEngine::on_stack_event(const StackEvent& ev,
                                                      const std::deque<addr_t>& stack) {
  std::vector<addr_t> out;
  if (ev.kind == StackEventKind::push) {
    fsm_.on_push();
    cursor_ = static_cast<long>(stack.size()) - 1;  // reset to the new top
    return out;
  }
  int k = fsm_.on_pop(intensity_);
  long top = static_cast<long>(stack.size()) - 1;
  if (top < 0) return out;
  long start = std::min(cursor_, top);
  long stop = std::max(top - k, -1L);  // emit indices (stop, start], walking down
  for (long i = start; i > stop; --i) out.push_back(stack[static_cast<std::size_t>(i)]);
  if (start > stop) cursor_ = stop;
  return out;
}

std::vector<addr_t> BfsPrefetchEngine::on_queue_pop(const std::deque<addr_t>& queue) {
  ++head_pos_;  // the pop that just happened
  std::vector<addr_t> out;
  std::uint64_t window_end = std::min(tail_pos_, head_pos_ + static_cast<std::uint64_t>(distance_));
  std::uint64_t first = std::max(emitted_pos_, head_pos_);
  for (std::uint64_t pos = first; pos < window_end; ++pos)
    out.push_back(queue[static_cast<std::size_t>(pos - head_pos_)]);
  if (window_end > emitted_pos_) emitted_pos_ = window_end;
  return out;
}

void ParkLeafPrefetchEngine::on_push(const std::deque<addr_t>& stack) {
  cursor_ = static_cast<long>(stack.size()) - 1;
}

void ParkLeafPrefetchEngine::on_pop(const std::deque<addr_t>& stack) {
  cursor_ = std::min(cursor_, static_cast<long>(stack.size()) - 1);
}

std::vector<addr_t> ParkLeafPrefetchEngine::on_leaf_test_start(const std::deque<addr_t>& stack,
                                                               int duration_cycles) {
  std::vector<addr_t> out;
  long top = static_cast<long>(stack.size()) - 1;
  long start = std::min(cursor_, top);
  for (long i = start; i >= 0 && static_cast<int>(out.size()) < duration_cycles; --i)
    out.push_back(stack[static_cast<std::size_t>(i)]);
  if (start >= 0) cursor_ = start - static_cast<long>(out.size());
  return out;
}

PrefetchArbiter::Grant PrefetchArbiter::pick(bool demand_pending, bool prefetch_pending,
                                             std::uint64_t cycle) {
  if (!demand_pending && !prefetch_pending) return Grant::none;
  bool prefetch_first = false;
  if (prefetch_pending) {
    if (!demand_pending) {
      prefetch_first = true;
    } else if (mode_ == ArbitrationMode::threshold) {
      prefetch_first = cycle - last_prefetch_cycle_ >= static_cast<std::uint64_t>(threshold_);
    }
  }
  if (prefetch_first) {
    last_prefetch_cycle_ = cycle;
    return Grant::prefetch;
  }
  return Grant::demand;
}

}  // namespace ttpsim
