#include "ttpsim/rtunit.hpp"

#include <algorithm>

#include "ttpsim/intersect.hpp"

namespace ttpsim {

void TraversalAgent::push_addr(addr_t addr, const RtUnitConfig& cfg, std::vector<StackEvent>* log,
                               std::uint64_t cycle) {
  if (pending.size() >= static_cast<std::size_t>(cfg.max_stack_depth))
    throw SimulationError("traversal stack overflow on thread " + std::to_string(thread_id));
  pending.push_back(addr);
  pop_streak = 0;
  if (log) log->push_back({cycle, thread_id, StackEventKind::push, addr});
}

void TraversalAgent::init_traversal(const FlatBvh& bvh, const RtUnitConfig& cfg,
                                    std::vector<StackEvent>* log, std::uint64_t cycle) {
  pending.clear();
  min_thit = ray.t_max;
  best = HitRecord{};
  pop_streak = 0;
  nodes_visited = 0;
  order = cfg.traversal_order;
  if (!has_ray) {
    status = AgentStatus::done;
    return;
  }
  if (ray_box_test(ray, bvh.root_box)) {
    push_addr(bvh.root_addr, cfg, log, cycle);
    status = AgentStatus::ready;
  } else {
    status = AgentStatus::done;
  }
}

addr_t TraversalAgent::pop_next(std::vector<StackEvent>* log, std::uint64_t cycle) {
  addr_t addr;
  if (order == TraversalOrder::dfs) {
    addr = pending.back();
    pending.pop_back();
  } else {
    addr = pending.front();
    pending.pop_front();
  }
  ++pop_streak;
  ++nodes_visited;
  status = AgentStatus::waiting_mem;
  if (log) log->push_back({cycle, thread_id, StackEventKind::pop, addr});
  return addr;
}

void TraversalAgent::process_node(const BvhNode& node, const RtUnitConfig& cfg,
                                  std::vector<StackEvent>* log, std::uint64_t cycle) {
  if (node.is_leaf()) {
    auto t = ray_triangle_test(ray, node.tri);
    if (t && *t < min_thit) {
      min_thit = *t;
      best.hit = true;
      best.t = *t;
      best.primitive_id = node.tri.id;
      best.point = ray.origin + ray.dir * *t;
      best.normal = facing_normal(node.tri, ray.dir);
      if (ray.mode == RayMode::any_hit) {
        pending.clear();
        status = AgentStatus::done;
        return;
      }
    }
  } else {
    struct HitChild {
      float t;
      int index;
    };
    HitChild hits[kMaxChildren];
    int n = 0;
    for (int i = 0; i < node.child_count; ++i) {
      auto t = ray_box_test(ray, node.children[i].box);
      if (t && *t < min_thit) hits[n++] = {*t, i};
    }
    if (cfg.near_child_first && order == TraversalOrder::dfs) {
      // push far-to-near so the nearest child comes off the stack first;
      // ties keep child-index order
      std::stable_sort(hits, hits + n, [](const HitChild& a, const HitChild& b) { return a.t > b.t; });
    }
    for (int i = 0; i < n; ++i)
      push_addr(node.children[hits[i].index].addr, cfg, log, cycle);
  }
  status = pending.empty() ? AgentStatus::done : AgentStatus::ready;
}

FunctionalResult traverse_ray(const FlatBvh& bvh, const Ray& ray, const RtUnitConfig& cfg,
                              std::vector<StackEvent>* log, int thread_id) {
  TraversalAgent agent;
  agent.thread_id = thread_id;
  agent.ray = ray;
  agent.has_ray = true;
  agent.init_traversal(bvh, cfg, log, 0);
  FunctionalResult res;
  std::uint64_t step = 0;
  while (agent.status != AgentStatus::done) {
    addr_t addr = agent.pop_next(log, step++);
    res.max_pop_streak = std::max(res.max_pop_streak, agent.pop_streak);
    BvhNode node = node_at(bvh, addr);
    agent.process_node(node, cfg, log, step);
    res.max_pending_depth = std::max(res.max_pending_depth, agent.pending.size());
  }
  res.hit = agent.best;
  res.nodes_visited = agent.nodes_visited;
  return res;
}

std::vector<CoalescedRequest> coalesce(const std::vector<ChunkRequest>& requests) {
  std::vector<CoalescedRequest> out;
  for (const ChunkRequest& req : requests) {
    auto it = std::find_if(out.begin(), out.end(),
                           [&](const CoalescedRequest& c) { return c.chunk == req.chunk; });
    if (it == out.end()) {
      out.push_back({req.chunk, {req.thread_id}});
    } else {
      if (std::find(it->subscribers.begin(), it->subscribers.end(), req.thread_id) ==
          it->subscribers.end())
        it->subscribers.push_back(req.thread_id);
    }
  }
  return out;
}

int WarpSelector::select(const std::vector<bool>& pending) {
  int n = static_cast<int>(pending.size());
  if (n == 0) return -1;
  for (int k = 1; k <= n; ++k) {
    int idx = (last_ + k) % n;
    if (pending[static_cast<std::size_t>(idx)]) {
      last_ = idx;
      return idx;
    }
  }
  return -1;
}

}  // namespace ttpsim
