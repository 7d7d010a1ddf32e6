#pragma once

#include <cstdint>
#include <queue>
#include <unordered_map>
#include <vector>

#include "ttpsim/types.hpp"

namespace ttpsim {

enum class AccessKind { demand, prefetch };

// Exactly one of these describes every access attempt.
enum class AccessCategory {
  hit,
  hit_mshr_merged,
  hit_mshr_full,
  miss_mshr_available,
  miss_mshr_full,
};

inline constexpr int kNumAccessCategories = 5;
inline constexpr std::uint64_t kNoToken = ~0ULL;

struct CacheConfig {
  std::size_t capacity = 32 * 1024;
  int associativity = 0;  // 0 = fully associative
  int line_size = 128;
  int sector_size = 32;
  int hit_latency = 20;
  int mshr_entries = 256;
  int mshr_merge_capacity = 8;
};

// Counters for one cache level, aggregated over all instances of that level.
struct LevelCounters {
  std::uint64_t by_category[2][kNumAccessCategories] = {};  // [kind][category]
  std::uint64_t misses_forwarded = 0;      // sector requests sent down a level
  std::uint64_t prefetch_installed = 0;    // sectors brought in by prefetch fills
  std::uint64_t prefetch_later_demanded = 0;
  std::uint64_t unused_prefetch_evicted = 0;
  std::uint64_t writebacks = 0;

  std::uint64_t kind_cat(AccessKind k, AccessCategory c) const {
    return by_category[static_cast<int>(k)][static_cast<int>(c)];
  }
  // Accesses that reached a terminal outcome. Full-MSHR attempts retry and
  // are counted again, so conservation checks work on completed counts.
  std::uint64_t completed(AccessKind k) const {
    return kind_cat(k, AccessCategory::hit) + kind_cat(k, AccessCategory::hit_mshr_merged) +
           kind_cat(k, AccessCategory::miss_mshr_available);
  }
  std::uint64_t demand_hits() const {
    return kind_cat(AccessKind::demand, AccessCategory::hit) +
           kind_cat(AccessKind::demand, AccessCategory::hit_mshr_merged);
  }
  std::uint64_t demand_misses() const {
    return kind_cat(AccessKind::demand, AccessCategory::miss_mshr_available);
  }
  std::uint64_t demand_accesses() const { return demand_hits() + demand_misses(); }
  std::uint64_t prefetch_requests() const {
    std::uint64_t n = 0;
    for (int c = 0; c < kNumAccessCategories; ++c)
      n += by_category[static_cast<int>(AccessKind::prefetch)][c];
    return n;
  }
  std::uint64_t prefetch_useful_misses() const {
    return kind_cat(AccessKind::prefetch, AccessCategory::miss_mshr_available);
  }
};

// Set-associative sector cache with line-granular MSHRs. Read-only traffic:
// the upper level never writes back into it, so lines are never dirty. The
// cache tracks which sectors a prefetch brought in and reports when a demand
// first touches them.
class SectorCache {
 public:
  SectorCache(const CacheConfig& cfg, LevelCounters* counters);

  struct AccessResult {
    AccessCategory category = AccessCategory::hit;
    bool forward = false;  // true when a new sector request must go down
  };

  // Classify one sector access. Demand hits touch LRU. Tokens other than
  // kNoToken ride in the MSHR and come back from fill(); stall categories
  // leave no state behind.
  AccessResult access(addr_t sector_addr, AccessKind kind, std::uint64_t token);

  struct FillResult {
    std::vector<std::uint64_t> tokens;  // demand subscribers completed by this fill
  };

  // A sector arrives from below: install it and finish its subscribers.
  FillResult fill(addr_t sector_addr);

  // Install without an MSHR entry (forced hits, prefetch side effects).
  void install_direct(addr_t sector_addr);

  bool sector_present(addr_t sector_addr) const;
  std::size_t mshr_in_use() const { return mshr_.size(); }
  const CacheConfig& config() const { return cfg_; }

 private:
  struct Line {
    addr_t line_addr = 0;
    std::uint32_t valid_sectors = 0;
    std::uint32_t prefetch_marks = 0;
    std::uint64_t lru_stamp = 0;
    bool in_use = false;
  };

  struct SectorFlight {
    bool requested = false;
    bool prefetch_origin = false;
    bool demand_merged = false;
    int merged_count = 0;  // entry-level subscriber slots this sector holds
    std::vector<std::uint64_t> tokens;
  };

  struct MshrEntry {
    int subscriber_count = 0;
    SectorFlight sectors[32];  // line_size / sector_size, bounded small
  };

  int sectors_per_line_;
  std::size_t num_sets_;
  int ways_;
  CacheConfig cfg_;
  LevelCounters* counters_;
  std::vector<Line> lines_;  // num_sets * ways
  std::unordered_map<addr_t, MshrEntry> mshr_;
  std::uint64_t lru_clock_ = 1;

  addr_t line_of(addr_t sector) const { return sector & ~static_cast<addr_t>(cfg_.line_size - 1); }
  int sector_index(addr_t sector) const {
    return static_cast<int>((sector % cfg_.line_size) / cfg_.sector_size);
  }
  std::size_t set_of(addr_t line_addr) const;
  Line* find_line(addr_t line_addr);
  const Line* find_line(addr_t line_addr) const;
  Line& allocate_line(addr_t line_addr);
};

struct DramConfig {
  int latency = 200;
  int requests_per_cycle = 2;
};

struct DramCounters {
  std::uint64_t reads = 0;
  std::uint64_t demand_reads = 0;
  std::uint64_t writebacks = 0;
};

enum class PerfectMode { off, upward, downward };

// Pop-streak position of the access that fetched a node: 1, 2, 3, 4 =
// fourth-or-later. 0 marks traffic with no pop attached (prefetches).
using PopClass = int;
inline constexpr int kNumPopClasses = 4;

struct MemRequest {
  addr_t sector = 0;
  AccessKind kind = AccessKind::demand;
  int sm = 0;
  std::uint64_t token = 0;  // engine cookie returned on completion
  PopClass pop_class = 0;
};

struct MemCompletion {
  std::uint64_t token = 0;
  std::uint64_t cycle = 0;
  int level = 0;  // deepest level that serviced the request: 0 L1, 1 L2, 2 DRAM
};

struct HierarchyConfig {
  int sm_count = 8;
  CacheConfig l1;
  CacheConfig l2{512 * 1024, 16, 128, 32, 160, 768, 8};
  DramConfig dram;
  PerfectMode perfect = PerfectMode::off;
};

// Private L1 per SM, one shared L2, fixed-latency DRAM behind an admission
// cap. Requests and fills move between levels as scheduled events; there is
// no per-cycle polling, so idle stretches cost nothing.
class MemoryHierarchy {
 public:
  explicit MemoryHierarchy(const HierarchyConfig& cfg);

  // Returns the L1 classification. Stall categories leave nothing in
  // flight: demands should be retried, prefetches are dropped.
  AccessCategory submit(const MemRequest& req, std::uint64_t cycle);

  // Process everything due at `cycle`; completions are appended to `out`.
  void advance(std::uint64_t cycle, std::vector<MemCompletion>& out);

  std::uint64_t next_event_cycle() const;
  bool idle() const { return events_.empty(); }

  LevelCounters& l1_counters() { return l1_counters_; }
  LevelCounters& l2_counters() { return l2_counters_; }
  DramCounters& dram_counters() { return dram_counters_; }
  std::uint64_t dram_miss_hist(int pop_class_index) const {
    return dram_miss_hist_[pop_class_index];
  }
  std::uint64_t l1_miss_hist(int pop_class_index) const { return l1_miss_hist_[pop_class_index]; }

  SectorCache& l1(int sm) { return l1_[static_cast<std::size_t>(sm)]; }
  SectorCache& l2() { return l2_cache_; }

 private:
  enum class EventType { l1_done, forced_done, arrive_l2, fill_l1, arrive_dram, dram_done };

  struct Event {
    std::uint64_t cycle;
    std::uint64_t seq;
    EventType type;
    addr_t sector;
    AccessKind kind;
    int sm;            // origin SM for l1-bound events
    std::uint64_t token;
    PopClass pop_class;
    int level;  // service depth reported on completion
  };

  struct EventOrder {
    bool operator()(const Event& a, const Event& b) const {
      if (a.cycle != b.cycle) return a.cycle > b.cycle;
      return a.seq > b.seq;
    }
  };

  HierarchyConfig cfg_;
  LevelCounters l1_counters_;
  LevelCounters l2_counters_;
  DramCounters dram_counters_;
  std::uint64_t dram_miss_hist_[kNumPopClasses] = {};
  std::uint64_t l1_miss_hist_[kNumPopClasses] = {};

  std::vector<SectorCache> l1_;
  SectorCache l2_cache_;

  std::priority_queue<Event, std::vector<Event>, EventOrder> events_;
  std::uint64_t seq_ = 0;

  // DRAM admission: analytic FIFO cursor, cap per cycle.
  std::uint64_t dram_cursor_ = 0;
  int dram_admitted_at_cursor_ = 0;

  void push_event(std::uint64_t cycle, EventType type, addr_t sector, AccessKind kind, int sm,
                  std::uint64_t token, PopClass pop_class, int level);
  void handle(const Event& ev, std::vector<MemCompletion>& out);
  void complete_l1_fill(int sm, addr_t sector, std::uint64_t cycle, int level,
                        std::vector<MemCompletion>& out);
};

}  // namespace ttpsim
