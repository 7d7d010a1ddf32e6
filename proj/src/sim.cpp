#include "ttpsim/sim.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <queue>

#include "ttpsim/bvh.hpp"
#include "ttpsim/intersect.hpp"
#include "ttpsim/prefetch.hpp"
#include "ttpsim/scene.hpp"

namespace ttpsim {

namespace {

// One fetched-but-unprocessed node per agent.
struct PendingFetch {
  BvhNode node;
  int remaining_chunks = 0;
  PopClass pop_class = 0;
  int max_level = 0;
};

struct EngineAgent {
  TraversalAgent core;
  DfsPrefetchEngine dfs;
  BfsPrefetchEngine bfs;
  ParkLeafPrefetchEngine park;
  std::deque<addr_t> prefetch_chunks;
  PendingFetch fetch;
  int warp = 0;  // wave-local warp index

  EngineAgent(std::array<int, 3> intensity, int bfs_distance) : dfs(intensity), bfs(bfs_distance) {}
};

struct EngineWarp {
  int sm = 0;
  std::vector<int> agents;  // wave-local agent indices
  std::deque<CoalescedRequest> chunk_queue;
  int ready_agents = 0;
  int live_agents = 0;  // agents not yet done

  bool finished() const { return live_agents == 0 && chunk_queue.empty(); }
  bool wants_service() const { return !chunk_queue.empty() || ready_agents > 0; }
};

struct SmState {
  std::vector<int> warps;          // wave-local warp indices owned by this SM
  std::size_t next_resident = 0;   // into `warps`
  std::vector<int> resident;
  WarpSelector selector;
  PrefetchArbiter arbiter;
  std::size_t prefetch_rr = 0;
  int prefetch_queues_nonempty = 0;

  SmState(ArbitrationMode mode, int threshold) : arbiter(mode, threshold) {}
};

struct ComputeEntry {
  std::uint64_t cycle;
  std::uint64_t seq;
  int agent;
  bool operator>(const ComputeEntry& o) const {
    return cycle != o.cycle ? cycle > o.cycle : seq > o.seq;
  }
};

struct OutstandingChunk {
  std::vector<int> subscribers;
  bool in_use = false;
};

// Everything alive for the duration of one run_experiment call.
struct Engine {
  const SimConfig& cfg;
  const FlatBvh& bvh;
  MemoryHierarchy mem;
  RunStats stats;
  bool collect_trace;
  std::vector<StackEvent> trace;

  std::vector<EngineAgent> agents;
  std::vector<EngineWarp> warps;
  std::vector<SmState> sms;
  std::priority_queue<ComputeEntry, std::vector<ComputeEntry>, std::greater<>> compute_heap;
  std::uint64_t compute_seq = 0;

  std::vector<OutstandingChunk> outstanding;
  std::vector<std::uint64_t> free_tokens;

  std::uint64_t cycle = 0;
  std::uint64_t last_finish_cycle = 0;
  int finished_agents = 0;
  int next_thread_id = 0;

  std::vector<StackEvent> scratch_events;
  std::vector<MemCompletion> completions;
  std::vector<ChunkRequest> chunk_batch;

  Engine(const SimConfig& c, const FlatBvh& b, bool trace_on)
      : cfg(c), bvh(b), mem(make_hier_config(c)), collect_trace(trace_on) {
    stats.policy = to_string(cfg.prefetch.policy);
    stats.dram_requests_per_cycle = cfg.memory.dram.requests_per_cycle;
  }

  static HierarchyConfig make_hier_config(const SimConfig& c) {
    HierarchyConfig h = c.memory;
    switch (c.prefetch.policy) {
      case PrefetchPolicy::perfect_upward:
        h.perfect = PerfectMode::upward;
        break;
      case PrefetchPolicy::perfect_downward:
        h.perfect = PerfectMode::downward;
        break;
      default:
        h.perfect = PerfectMode::off;
        break;
    }
    return h;
  }

  std::uint64_t alloc_token(std::vector<int>&& subscribers) {
    std::uint64_t token;
    if (!free_tokens.empty()) {
      token = free_tokens.back();
      free_tokens.pop_back();
    } else {
      token = outstanding.size();
      outstanding.emplace_back();
    }
    OutstandingChunk& slot = outstanding[token];
    slot.subscribers = std::move(subscribers);
    slot.in_use = true;
    return token;
  }

  void free_token(std::uint64_t token) {
    outstanding[token].in_use = false;
    outstanding[token].subscribers.clear();
    free_tokens.push_back(token);
  }

  void enqueue_prefetch_nodes(int agent_idx, const std::vector<addr_t>& node_addrs) {
    if (node_addrs.empty()) return;
    EngineAgent& a = agents[agent_idx];
    bool was_empty = a.prefetch_chunks.empty();
    int cap = cfg.prefetch.queue_capacity;
    for (addr_t node_addr : node_addrs)
      for (addr_t chunk : footprint_for(bvh, node_addr)) {
        a.prefetch_chunks.push_back(chunk);
        if (static_cast<int>(a.prefetch_chunks.size()) > cap) a.prefetch_chunks.pop_front();
      }
    if (was_empty && !a.prefetch_chunks.empty())
      ++sms[warps[a.warp].sm].prefetch_queues_nonempty;
  }

  // Route one stack event into the active policy engine and the trace.
  void feed_event(int agent_idx, const StackEvent& ev) {
    if (collect_trace) trace.push_back(ev);
    EngineAgent& a = agents[agent_idx];
    switch (cfg.prefetch.policy) {
      case PrefetchPolicy::ttp_dfs:
        enqueue_prefetch_nodes(agent_idx, a.dfs.on_stack_event(ev, a.core.pending));
        break;
      case PrefetchPolicy::ttp_bfs:
        if (ev.kind == StackEventKind::push)
          a.bfs.on_push();
        else
          enqueue_prefetch_nodes(agent_idx, a.bfs.on_queue_pop(a.core.pending));
        break;
      case PrefetchPolicy::park_leaf:
        if (ev.kind == StackEventKind::push)
          a.park.on_push(a.core.pending);
        else
          a.park.on_pop(a.core.pending);
        break;
      default:
        break;
    }
  }

  void feed_scratch(int agent_idx) {
    for (const StackEvent& ev : scratch_events) feed_event(agent_idx, ev);
    scratch_events.clear();
  }

  void agent_finished(int agent_idx) {
    EngineAgent& a = agents[agent_idx];
    ++finished_agents;
    last_finish_cycle = std::max(last_finish_cycle, cycle);
    stats.node_visits += a.core.nodes_visited;
    stats.max_nodes_per_ray = std::max<std::uint64_t>(stats.max_nodes_per_ray,
                                                      a.core.nodes_visited);
    --warps[a.warp].live_agents;
  }

  void start_compute(int agent_idx) {
    EngineAgent& a = agents[agent_idx];
    if (a.fetch.max_level >= 2)
      ++stats.streaks.dram_miss[std::min<int>(a.fetch.pop_class, kNumPopClasses) - 1];
    a.core.status = AgentStatus::computing;
    bool leaf = a.fetch.node.is_leaf();
    int latency = leaf ? cfg.rtunit.leaf_test_latency : cfg.rtunit.box_test_latency;
    if (leaf && cfg.prefetch.policy == PrefetchPolicy::park_leaf)
      enqueue_prefetch_nodes(
          agent_idx, a.park.on_leaf_test_start(a.core.pending, cfg.rtunit.leaf_test_latency));
    compute_heap.push({cycle + static_cast<std::uint64_t>(latency), compute_seq++, agent_idx});
  }

  void handle_completions() {
    mem.advance(cycle, completions);
    for (const MemCompletion& done : completions) {
      OutstandingChunk& slot = outstanding[done.token];
      for (int agent_idx : slot.subscribers) {
        EngineAgent& a = agents[agent_idx];
        a.fetch.max_level = std::max(a.fetch.max_level, done.level);
        if (--a.fetch.remaining_chunks == 0) start_compute(agent_idx);
      }
      free_token(done.token);
    }
    completions.clear();
  }

  void handle_compute_done() {
    while (!compute_heap.empty() && compute_heap.top().cycle <= cycle) {
      int agent_idx = compute_heap.top().agent;
      compute_heap.pop();
      EngineAgent& a = agents[agent_idx];
      a.core.process_node(a.fetch.node, cfg.rtunit, &scratch_events, cycle);
      feed_scratch(agent_idx);
      if (a.core.status == AgentStatus::done)
        agent_finished(agent_idx);
      else
        ++warps[a.warp].ready_agents;
    }
  }

  // All ready agents of a selected warp pop together; their node footprints
  // coalesce into the warp's chunk queue.
  void batch_pop(EngineWarp& warp) {
    chunk_batch.clear();
    for (int agent_idx : warp.agents) {
      EngineAgent& a = agents[agent_idx];
      if (a.core.status != AgentStatus::ready) continue;
      addr_t node_addr = a.core.pop_next(&scratch_events, cycle);
      --warp.ready_agents;
      int cls = std::min(a.core.pop_streak, kNumPopClasses);
      ++stats.streaks.all[cls - 1];
      feed_scratch(agent_idx);
      a.fetch.node = node_at(bvh, node_addr);
      a.fetch.pop_class = cls;
      a.fetch.max_level = 0;
      std::vector<addr_t> chunks = node_footprint(a.fetch.node);
      a.fetch.remaining_chunks = static_cast<int>(chunks.size());
      for (addr_t chunk : chunks) chunk_batch.push_back({chunk, agent_idx});
    }
    for (CoalescedRequest& req : coalesce(chunk_batch))
      warp.chunk_queue.push_back(std::move(req));
  }

  void refill_residents(SmState& sm) {
    std::erase_if(sm.resident, [&](int w) { return warps[w].finished(); });
    while (static_cast<int>(sm.resident.size()) < cfg.rtunit.warp_buffer_size &&
           sm.next_resident < sm.warps.size())
      sm.resident.push_back(sm.warps[sm.next_resident++]);
  }

  void issue_stage(int sm_idx) {
    SmState& sm = sms[sm_idx];
    refill_residents(sm);

    std::vector<bool> pending(sm.resident.size());
    bool any_demand = false;
    for (std::size_t i = 0; i < sm.resident.size(); ++i) {
      pending[i] = warps[sm.resident[i]].wants_service();
      any_demand = any_demand || pending[i];
    }
    int slot = any_demand ? sm.selector.select(pending) : -1;
    EngineWarp* warp = slot >= 0 ? &warps[sm.resident[static_cast<std::size_t>(slot)]] : nullptr;
    if (warp && warp->chunk_queue.empty()) batch_pop(*warp);

    bool demand_pending = warp && !warp->chunk_queue.empty();
    bool prefetch_pending = sm.prefetch_queues_nonempty > 0;
    switch (sm.arbiter.pick(demand_pending, prefetch_pending, cycle)) {
      case PrefetchArbiter::Grant::demand:
        issue_demand(sm_idx, *warp);
        break;
      case PrefetchArbiter::Grant::prefetch:
        issue_prefetch(sm_idx);
        break;
      case PrefetchArbiter::Grant::none:
        break;
    }
  }

  void issue_demand(int sm_idx, EngineWarp& warp) {
    CoalescedRequest& front = warp.chunk_queue.front();
    MemRequest req;
    req.sector = front.chunk;
    req.kind = AccessKind::demand;
    req.sm = sm_idx;
    req.pop_class = agents[front.subscribers.front()].fetch.pop_class;
    req.token = alloc_token(std::move(front.subscribers));
    ++stats.l1_submits;
    AccessCategory cat = mem.submit(req, cycle);
    if (cat == AccessCategory::hit_mshr_full || cat == AccessCategory::miss_mshr_full) {
      // port spent; the chunk stays at the front and retries
      front.subscribers = std::move(outstanding[req.token].subscribers);
      free_token(req.token);
      return;
    }
    warp.chunk_queue.pop_front();
  }

  void issue_prefetch(int sm_idx) {
    SmState& sm = sms[sm_idx];
    std::vector<int> resident_agents;
    for (int w : sm.resident)
      for (int agent_idx : warps[w].agents) resident_agents.push_back(agent_idx);
    if (resident_agents.empty()) return;
    for (std::size_t probe = 0; probe < resident_agents.size(); ++probe) {
      std::size_t i = (sm.prefetch_rr + probe) % resident_agents.size();
      EngineAgent& a = agents[resident_agents[i]];
      if (a.prefetch_chunks.empty()) continue;
      MemRequest req;
      req.sector = a.prefetch_chunks.front();
      req.kind = AccessKind::prefetch;
      req.sm = sm_idx;
      req.pop_class = 0;
      req.token = kNoToken;
      a.prefetch_chunks.pop_front();
      if (a.prefetch_chunks.empty()) --sm.prefetch_queues_nonempty;
      ++stats.l1_submits;
      mem.submit(req, cycle);  // full categories drop the prefetch silently
      sm.prefetch_rr = i + 1;
      return;
    }
  }

  bool port_work_pending() const {
    for (const SmState& sm : sms) {
      if (sm.prefetch_queues_nonempty > 0) return true;
      for (int w : sm.resident)
        if (warps[w].wants_service()) return true;
      // a waiting warp behind a full buffer becomes resident next stage
      if (sm.next_resident < sm.warps.size())
        for (int w : sm.resident)
          if (warps[w].finished()) return true;
    }
    return false;
  }

  void run_wave(const std::vector<Ray>& rays, std::vector<HitRecord>& out_hits) {
    agents.clear();
    warps.clear();
    sms.clear();
    finished_agents = 0;
    while (!compute_heap.empty()) compute_heap.pop();

    int n = static_cast<int>(rays.size());
    agents.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      agents.emplace_back(cfg.prefetch.intensity, cfg.prefetch.bfs_distance);
      EngineAgent& a = agents.back();
      a.core.thread_id = next_thread_id++;
      a.core.ray = rays[static_cast<std::size_t>(i)];
      a.core.has_ray = true;
      a.warp = i / cfg.rtunit.warp_size;
    }

    int warp_count = (n + cfg.rtunit.warp_size - 1) / cfg.rtunit.warp_size;
    warps.resize(static_cast<std::size_t>(warp_count));
    sms.assign(static_cast<std::size_t>(cfg.memory.sm_count),
               SmState(cfg.prefetch.arbitration, cfg.prefetch.threshold_cycles));
    for (int w = 0; w < warp_count; ++w) {
      warps[static_cast<std::size_t>(w)].sm = w % cfg.memory.sm_count;
      sms[static_cast<std::size_t>(w % cfg.memory.sm_count)].warps.push_back(w);
    }
    for (int i = 0; i < n; ++i) warps[static_cast<std::size_t>(agents[i].warp)].agents.push_back(i);

    for (int i = 0; i < n; ++i) {
      EngineAgent& a = agents[static_cast<std::size_t>(i)];
      a.core.init_traversal(bvh, cfg.rtunit, &scratch_events, cycle);
      feed_scratch(i);
      EngineWarp& warp = warps[static_cast<std::size_t>(a.warp)];
      if (a.core.status == AgentStatus::done) {
        ++warp.live_agents;  // balanced by agent_finished below
        agent_finished(i);
      } else {
        ++warp.live_agents;
        ++warp.ready_agents;
      }
    }

    while (finished_agents < n) {
      handle_completions();
      handle_compute_done();
      if (finished_agents >= n) break;
      for (int s = 0; s < cfg.memory.sm_count; ++s) issue_stage(s);

      std::uint64_t next = ~0ULL;
      if (port_work_pending()) next = cycle + 1;
      next = std::min(next, mem.next_event_cycle());
      if (!compute_heap.empty()) next = std::min(next, compute_heap.top().cycle);
      if (next == ~0ULL) throw SimulationError("simulation stalled with unfinished rays");
      cycle = next;
    }

    out_hits.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out_hits[static_cast<std::size_t>(i)] = agents[static_cast<std::size_t>(i)].core.best;
    stats.rays += static_cast<std::uint64_t>(n);
  }

  void drain() {
    while (!mem.idle()) {
      cycle = std::max(cycle, mem.next_event_cycle());
      handle_completions();
    }
  }

  void finalize() {
    stats.total_cycles = last_finish_cycle;
    stats.l1 = mem.l1_counters();
    stats.l2 = mem.l2_counters();
    stats.dram = mem.dram_counters();
    for (int i = 0; i < kNumPopClasses; ++i) {
      stats.l1_miss_by_class[i] = mem.l1_miss_hist(i);
      stats.dram_miss_by_class[i] = mem.dram_miss_hist(i);
    }
    verify_conservation(stats);
  }
};

std::vector<Triangle> load_scene(const SimConfig& cfg) {
  if (cfg.scene.kind == SceneSource::Kind::obj) return load_obj(cfg.scene.obj_path);
  return generate_synthetic(cfg.scene.synthetic_kind,
                            static_cast<std::uint32_t>(cfg.scene.synthetic_count), cfg.seed);
}

}  // namespace

RunResult run_experiment(const SimConfig& cfg, bool collect_trace) {
  validate_config(cfg);
  std::vector<Triangle> tris = load_scene(cfg);
  FlatBvh bvh = build_bvh(tris);
  Camera camera = auto_frame_camera(tris, cfg.image_width, cfg.image_height, cfg.fov_degrees);

  Engine engine(cfg, bvh, collect_trace);
  RunResult result;
  result.width = cfg.image_width;
  result.height = cfg.image_height;

  std::vector<Ray> wave_rays =
      generate_sample_rays(camera, cfg.samples_per_pixel, cfg.seed);
  std::vector<HitRecord> wave_hits;
  for (int wave = 0;; ++wave) {
    engine.run_wave(wave_rays, wave_hits);
    if (wave == 0) {
      std::size_t pixels = static_cast<std::size_t>(cfg.image_width) * cfg.image_height;
      result.hit_buffer.assign(wave_hits.begin(), wave_hits.begin() + pixels);
    }
    if (wave >= cfg.bounce_depth) break;
    wave_rays = generate_bounce_rays(wave_hits, cfg.seed + static_cast<std::uint64_t>(wave) + 1);
    if (wave_rays.empty()) break;
  }
  engine.drain();
  engine.finalize();

  result.stats = std::move(engine.stats);
  result.trace = std::move(engine.trace);
  return result;
}

std::string ppm_bytes(const std::vector<HitRecord>& hits, int width, int height) {
  if (width <= 0 || height <= 0 ||
      hits.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
    throw SimulationError("hit buffer does not match image dimensions");
  std::string out = "P6\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  out.reserve(out.size() + hits.size() * 3);
  for (const HitRecord& h : hits) {
    if (!h.hit) {
      out.append(3, '\0');
      continue;
    }
    SplitMix64 rng(static_cast<std::uint64_t>(h.primitive_id) * 0x9e3779b97f4a7c15ULL + 1);
    std::uint64_t bits = rng.next();
    // channels in [64, 255]: hits are never confused with the black misses
    out.push_back(static_cast<char>(64 + (bits & 0xff) % 192));
    out.push_back(static_cast<char>(64 + ((bits >> 8) & 0xff) % 192));
    out.push_back(static_cast<char>(64 + ((bits >> 16) & 0xff) % 192));
  }
  return out;
}

void write_ppm(const std::vector<HitRecord>& hits, int width, int height,
               const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SimulationError("cannot open image file '" + path + "'");
  std::string bytes = ppm_bytes(hits, width, height);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw SimulationError("failed writing image file '" + path + "'");
}

std::string trace_text(const std::vector<StackEvent>& trace) {
  std::string out;
  char line[96];
  for (const StackEvent& ev : trace) {
    std::snprintf(line, sizeof(line), "%llu %d %s 0x%llx\n",
                  static_cast<unsigned long long>(ev.cycle), ev.thread_id,
                  ev.kind == StackEventKind::push ? "push" : "pop",
                  static_cast<unsigned long long>(ev.addr));
    out += line;
  }
  return out;
}

void write_trace(const std::vector<StackEvent>& trace, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SimulationError("cannot open trace file '" + path + "'");
  std::string text = trace_text(trace);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw SimulationError("failed writing trace file '" + path + "'");
}

}  // namespace ttpsim
