#include "ttpsim/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <unordered_map>

namespace ttpsim {

std::uint64_t PopStreakHistogram::total_pops() const {
  std::uint64_t n = 0;
  for (auto v : all) n += v;
  return n;
}

std::uint64_t PopStreakHistogram::total_dram_miss() const {
  std::uint64_t n = 0;
  for (auto v : dram_miss) n += v;
  return n;
}

PopStreakHistogram pop_streak_histogram(const std::vector<StackEvent>& events,
                                        const std::vector<bool>& miss_flags) {
  PopStreakHistogram hist;
  std::unordered_map<int, int> streaks;
  std::size_t pop_index = 0;
  for (const StackEvent& ev : events) {
    if (ev.kind == StackEventKind::push) {
      streaks[ev.thread_id] = 0;
      continue;
    }
    int streak = ++streaks[ev.thread_id];
    int cls = std::min(streak, kNumPopClasses) - 1;
    ++hist.all[cls];
    if (pop_index < miss_flags.size() && miss_flags[pop_index]) ++hist.dram_miss[cls];
    ++pop_index;
  }
  return hist;
}

double RunStats::avg_nodes_per_ray() const {
  return rays == 0 ? 0.0 : static_cast<double>(node_visits) / static_cast<double>(rays);
}

double RunStats::dram_bw_utilization() const {
  if (total_cycles == 0 || dram_requests_per_cycle <= 0) return 0.0;
  return static_cast<double>(dram.reads) /
         (static_cast<double>(dram_requests_per_cycle) * static_cast<double>(total_cycles));
}

std::optional<double> accuracy(const RunStats& s, CacheLevel level) {
  const LevelCounters& c = s.level(level);
  if (c.prefetch_installed == 0) return std::nullopt;
  return static_cast<double>(c.prefetch_later_demanded) /
         static_cast<double>(c.prefetch_installed);
}

double coverage(const RunStats& run, const RunStats& baseline, CacheLevel level) {
  if (run.node_visits != baseline.node_visits)
    throw SimulationError("coverage requires identical workloads: node visit counts differ");
  std::uint64_t base = baseline.level(level).demand_misses();
  if (base == 0) return 0.0;
  std::uint64_t mine = run.level(level).demand_misses();
  return (static_cast<double>(base) - static_cast<double>(mine)) / static_cast<double>(base);
}

std::optional<double> efficiency(const RunStats& s, CacheLevel level) {
  const LevelCounters& c = s.level(level);
  std::uint64_t requests = c.prefetch_requests();
  if (requests == 0) return std::nullopt;
  return static_cast<double>(c.prefetch_useful_misses()) / static_cast<double>(requests);
}

double mpki(const RunStats& s, CacheLevel level) {
  if (s.node_visits == 0) return 0.0;
  return 1000.0 * static_cast<double>(s.level(level).demand_misses()) /
         static_cast<double>(s.node_visits);
}

double speedup(const RunStats& baseline, const RunStats& run) {
  if (run.total_cycles == 0) return 0.0;
  return static_cast<double>(baseline.total_cycles) / static_cast<double>(run.total_cycles);
}

namespace {

void check(bool ok, const char* what) {
  if (!ok) throw SimulationError(std::string("counter identity violated: ") + what);
}

std::uint64_t category_sum(const LevelCounters& c) {
  std::uint64_t n = 0;
  for (int k = 0; k < 2; ++k)
    for (int cat = 0; cat < kNumAccessCategories; ++cat) n += c.by_category[k][cat];
  return n;
}

}  // namespace

void verify_conservation(const RunStats& s) {
  check(s.l1.misses_forwarded ==
            s.l2.completed(AccessKind::demand) + s.l2.completed(AccessKind::prefetch),
        "L1 misses forwarded = completed L2 accesses");
  check(s.l2.misses_forwarded == s.dram.reads, "L2 misses forwarded = DRAM reads");
  check(category_sum(s.l1) == s.l1_submits, "L1 categories partition all access attempts");
  check(s.l1.demand_hits() + s.l1.demand_misses() == s.l1.completed(AccessKind::demand),
        "L1 demand hits + misses = completed demand accesses");
  check(s.l2.demand_hits() + s.l2.demand_misses() == s.l2.completed(AccessKind::demand),
        "L2 demand hits + misses = completed demand accesses");
  check(s.l1.prefetch_later_demanded <= s.l1.prefetch_installed,
        "L1 later-demanded <= prefetched blocks");
  check(s.l2.prefetch_later_demanded <= s.l2.prefetch_installed,
        "L2 later-demanded <= prefetched blocks");
  check(s.streaks.total_pops() == s.node_visits, "pop-streak classes sum to total pops");
  for (int i = 0; i < kNumPopClasses; ++i)
    check(s.streaks.dram_miss[i] <= s.streaks.all[i], "miss sub-histogram bounded by pops");
  std::uint64_t l1_class_sum = 0;
  for (auto v : s.l1_miss_by_class) l1_class_sum += v;
  check(l1_class_sum == s.l1.kind_cat(AccessKind::demand, AccessCategory::miss_mshr_available),
        "per-class L1 demand misses sum to the L1 demand miss count");
}

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string fmt_optional(const std::optional<double>& v) {
  return v ? fmt_double(*v) : std::string();
}

}  // namespace

std::string csv_header() {
  return "run_id,policy,cycles,speedup_vs_baseline,l1_accuracy,l2_accuracy,l1_coverage,"
         "l2_coverage,l1_efficiency,l2_efficiency,l1_mpki,l2_mpki,dram_reads,dram_writebacks,"
         "dram_bw_util,popstreak_1,popstreak_2,popstreak_3,popstreak_4plus,popstreak_miss_1,"
         "popstreak_miss_2,popstreak_miss_3,popstreak_miss_4plus,avg_nodes_per_ray,"
         "max_nodes_per_ray";
}

std::string csv_row(const RunStats& run, const RunStats* baseline, const std::string& run_id) {
  std::string row;
  auto add = [&](const std::string& field) {
    if (!row.empty()) row += ',';
    row += field;
  };
  add(run_id);
  add(run.policy);
  add(std::to_string(run.total_cycles));
  add(baseline ? fmt_double(speedup(*baseline, run)) : std::string());
  add(fmt_optional(accuracy(run, CacheLevel::l1)));
  add(fmt_optional(accuracy(run, CacheLevel::l2)));
  if (baseline) {
    double l1_cov = coverage(run, *baseline, CacheLevel::l1);
    double l2_cov = coverage(run, *baseline, CacheLevel::l2);
    if (l1_cov < 0.0 || l2_cov < 0.0)
      std::fprintf(stderr, "warning: negative coverage for run '%s' (prefetch pollution)\n",
                   run_id.c_str());
    add(fmt_double(l1_cov));
    add(fmt_double(l2_cov));
  } else {
    add(std::string());
    add(std::string());
  }
  add(fmt_optional(efficiency(run, CacheLevel::l1)));
  add(fmt_optional(efficiency(run, CacheLevel::l2)));
  add(fmt_double(mpki(run, CacheLevel::l1)));
  add(fmt_double(mpki(run, CacheLevel::l2)));
  add(std::to_string(run.dram.reads));
  add(std::to_string(run.dram.writebacks));
  add(fmt_double(run.dram_bw_utilization()));
  for (auto v : run.streaks.all) add(std::to_string(v));
  for (auto v : run.streaks.dram_miss) add(std::to_string(v));
  add(fmt_double(run.avg_nodes_per_ray()));
  add(std::to_string(run.max_nodes_per_ray));
  return row;
}

}  // namespace ttpsim
