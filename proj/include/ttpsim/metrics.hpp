#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ttpsim/memhier.hpp"
#include "ttpsim/rtunit.hpp"

namespace ttpsim {

// Pops classified by position in the per-thread streak: 1st, 2nd, 3rd,
// 4th-or-later. The miss sub-histogram counts pops whose node fetch missed
// both L1 and L2.
struct PopStreakHistogram {
  std::uint64_t all[kNumPopClasses] = {};
  std::uint64_t dram_miss[kNumPopClasses] = {};

  std::uint64_t total_pops() const;
  std::uint64_t total_dram_miss() const;
};

// Classify each pop in a stack-event stream. miss_flags[i] annotates the
// i-th pop of the stream in order (true = fetch missed both L1 and L2); an
// empty vector leaves the miss sub-histogram all zero.
PopStreakHistogram pop_streak_histogram(const std::vector<StackEvent>& events,
                                        const std::vector<bool>& miss_flags = {});

enum class CacheLevel { l1, l2 };

// Everything one run reports. Counters are final values copied out of the
// hierarchy after the last completion drained.
struct RunStats {
  std::string policy = "off";
  std::uint64_t total_cycles = 0;
  LevelCounters l1;
  LevelCounters l2;
  DramCounters dram;
  // Demand sector misses by the pop class of the fetch that caused them.
  std::uint64_t l1_miss_by_class[kNumPopClasses] = {};
  std::uint64_t dram_miss_by_class[kNumPopClasses] = {};
  PopStreakHistogram streaks;
  std::uint64_t l1_submits = 0;  // access attempts, counted by the engine
  std::uint64_t rays = 0;
  std::uint64_t node_visits = 0;
  std::uint64_t max_nodes_per_ray = 0;
  int dram_requests_per_cycle = 2;

  const LevelCounters& level(CacheLevel l) const { return l == CacheLevel::l1 ? l1 : l2; }
  double avg_nodes_per_ray() const;
  double dram_bw_utilization() const;
};

// later-demanded / prefetched blocks; absent when nothing was prefetched.
std::optional<double> accuracy(const RunStats& s, CacheLevel level);

// (baseline misses - run misses) / baseline misses. Throws SimulationError
// when the two runs did not traverse the same workload.
double coverage(const RunStats& run, const RunStats& baseline, CacheLevel level);

// useful prefetch misses / all prefetch requests; absent when none issued.
std::optional<double> efficiency(const RunStats& s, CacheLevel level);

// Demand misses per thousand node visits.
double mpki(const RunStats& s, CacheLevel level);

double speedup(const RunStats& baseline, const RunStats& run);

// Throws SimulationError if any cross-level counter identity fails.
void verify_conservation(const RunStats& s);

// Fixed-order CSV schema shared by every emitter.
std::string csv_header();
std::string csv_row(const RunStats& run, const RunStats* baseline, const std::string& run_id);

}  // namespace ttpsim
