#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <vector>

#include "ttpsim/bvh.hpp"
#include "ttpsim/types.hpp"

namespace ttpsim {

enum class TraversalOrder { dfs, bfs };

enum class AgentStatus { ready, waiting_mem, computing, done };

enum class StackEventKind { push, pop };

struct StackEvent {
  std::uint64_t cycle = 0;
  int thread_id = 0;
  StackEventKind kind = StackEventKind::push;
  addr_t addr = 0;
};

struct RtUnitConfig {
  int warp_size = 32;
  int warp_buffer_size = 4;
  TraversalOrder traversal_order = TraversalOrder::dfs;
  int box_test_latency = 4;
  int leaf_test_latency = 8;
  int max_stack_depth = 64;
  bool near_child_first = false;  // optional distance-ordered pushes, off by default
};

// One ray working through the tree. The pending list is LIFO under dfs
// (back = top of stack) and FIFO under bfs (front = head of queue).
struct TraversalAgent {
  int thread_id = 0;
  Ray ray;
  bool has_ray = false;
  TraversalOrder order = TraversalOrder::dfs;
  std::deque<addr_t> pending;
  float min_thit = 0.0f;
  HitRecord best;
  AgentStatus status = AgentStatus::done;
  int pop_streak = 0;
  std::uint32_t nodes_visited = 0;

  // Root box test; pushes the root or finishes immediately with a miss.
  void init_traversal(const FlatBvh& bvh, const RtUnitConfig& cfg,
                      std::vector<StackEvent>* log, std::uint64_t cycle);

  // ready -> waiting_mem. Removes the next node address (stack top or queue
  // head), records the pop event and extends the pop streak.
  addr_t pop_next(std::vector<StackEvent>* log, std::uint64_t cycle);

  // Child box tests or the leaf primitive test for a fetched node; pushes
  // surviving children in child-index order (push events reset the streak)
  // and moves to ready or done.
  void process_node(const BvhNode& node, const RtUnitConfig& cfg, std::vector<StackEvent>* log,
                    std::uint64_t cycle);

  // Snapshot with index 0 = stack bottom (dfs) / queue head (bfs).
  const std::deque<addr_t>& pending_view() const { return pending; }

 private:
  void push_addr(addr_t addr, const RtUnitConfig& cfg, std::vector<StackEvent>* log,
                 std::uint64_t cycle);
};

struct FunctionalResult {
  HitRecord hit;
  std::uint32_t nodes_visited = 0;
  int max_pop_streak = 0;
  std::size_t max_pending_depth = 0;
};

// Runs one ray to completion against immediate memory. The timed engine
// reproduces exactly this push/pop sequence; tests lean on that equivalence.
FunctionalResult traverse_ray(const FlatBvh& bvh, const Ray& ray, const RtUnitConfig& cfg,
                              std::vector<StackEvent>* log = nullptr, int thread_id = 0);

// A node fetch broken into 32-byte chunk reads, tagged with the issuing
// thread.
struct ChunkRequest {
  addr_t chunk = 0;
  int thread_id = 0;
};

struct CoalescedRequest {
  addr_t chunk = 0;
  std::vector<int> subscribers;  // thread ids, first = requester
};

// Same-cycle window merge: duplicate chunk addresses within one warp fold
// into a single request that remembers every subscriber.
std::vector<CoalescedRequest> coalesce(const std::vector<ChunkRequest>& requests);

// Round-robin pick over warps that currently have work. Remembers the last
// pick so service stays fair across cycles.
class WarpSelector {
 public:
  // pending[i] says whether warp i wants service; returns the chosen index
  // or -1 when nobody does.
  int select(const std::vector<bool>& pending);

 private:
  int last_ = -1;
};

}  // namespace ttpsim
