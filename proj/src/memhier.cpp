#include "ttpsim/memhier.hpp"

#include <algorithm>
#include <bit>

namespace ttpsim {

namespace {

int popcount32(std::uint32_t v) { return std::popcount(v); }

}  // namespace

SectorCache::SectorCache(const CacheConfig& cfg, LevelCounters* counters)
    : cfg_(cfg), counters_(counters) {
  if (cfg.line_size <= 0 || cfg.sector_size <= 0 || cfg.line_size % cfg.sector_size != 0)
    throw ConfigError("cache line size must be a multiple of the sector size");
  sectors_per_line_ = cfg.line_size / cfg.sector_size;
  if (sectors_per_line_ > 32) throw ConfigError("too many sectors per line");
  if (cfg.capacity == 0 || cfg.capacity % static_cast<std::size_t>(cfg.line_size) != 0)
    throw ConfigError("cache capacity must be a positive multiple of the line size");
  std::size_t total_lines = cfg.capacity / static_cast<std::size_t>(cfg.line_size);
  if (cfg.associativity == 0) {
    ways_ = static_cast<int>(total_lines);
    num_sets_ = 1;
  } else {
    if (total_lines % static_cast<std::size_t>(cfg.associativity) != 0)
      throw ConfigError("cache capacity, line size and associativity do not divide");
    ways_ = cfg.associativity;
    num_sets_ = total_lines / static_cast<std::size_t>(cfg.associativity);
  }
  lines_.resize(total_lines);
}

std::size_t SectorCache::set_of(addr_t line_addr) const {
  return static_cast<std::size_t>(line_addr / static_cast<addr_t>(cfg_.line_size)) % num_sets_;
}

SectorCache::Line* SectorCache::find_line(addr_t line_addr) {
  std::size_t set = set_of(line_addr);
  Line* base = lines_.data() + set * static_cast<std::size_t>(ways_);
  for (int w = 0; w < ways_; ++w)
    if (base[w].in_use && base[w].line_addr == line_addr) return base + w;
  return nullptr;
}

const SectorCache::Line* SectorCache::find_line(addr_t line_addr) const {
  return const_cast<SectorCache*>(this)->find_line(line_addr);
}

SectorCache::Line& SectorCache::allocate_line(addr_t line_addr) {
  if (Line* existing = find_line(line_addr)) return *existing;
  std::size_t set = set_of(line_addr);
  Line* base = lines_.data() + set * static_cast<std::size_t>(ways_);
  Line* victim = nullptr;
  for (int w = 0; w < ways_; ++w) {
    if (!base[w].in_use) {
      victim = base + w;
      break;
    }
  }
  if (!victim) {
    victim = base;
    for (int w = 1; w < ways_; ++w)
      if (base[w].lru_stamp < victim->lru_stamp) victim = base + w;
    counters_->unused_prefetch_evicted +=
        static_cast<std::uint64_t>(popcount32(victim->valid_sectors & victim->prefetch_marks));
  }
  victim->in_use = true;
  victim->line_addr = line_addr;
  victim->valid_sectors = 0;
  victim->prefetch_marks = 0;
  victim->lru_stamp = lru_clock_++;
  return *victim;
}

bool SectorCache::sector_present(addr_t sector_addr) const {
  const Line* line = find_line(line_of(sector_addr));
  if (!line) return false;
  return (line->valid_sectors >> sector_index(sector_addr)) & 1u;
}

SectorCache::AccessResult SectorCache::access(addr_t sector_addr, AccessKind kind,
                                              std::uint64_t token) {
  if (sector_addr % static_cast<addr_t>(cfg_.sector_size) != 0)
    throw SimulationError("misaligned sector access");
  auto count = [&](AccessCategory c, bool fwd) {
    ++counters_->by_category[static_cast<int>(kind)][static_cast<int>(c)];
    if (fwd) ++counters_->misses_forwarded;
    return AccessResult{c, fwd};
  };

  addr_t la = line_of(sector_addr);
  int si = sector_index(sector_addr);
  if (Line* line = find_line(la); line && ((line->valid_sectors >> si) & 1u)) {
    if (kind == AccessKind::demand) {
      line->lru_stamp = lru_clock_++;
      if ((line->prefetch_marks >> si) & 1u) {
        line->prefetch_marks &= ~(1u << si);
        ++counters_->prefetch_later_demanded;
      }
    }
    return count(AccessCategory::hit, false);
  }

  auto it = mshr_.find(la);
  if (it != mshr_.end() && it->second.sectors[si].requested) {
    MshrEntry& entry = it->second;
    SectorFlight& flight = entry.sectors[si];
    if (token == kNoToken) {
      // redundant prefetch riding an outstanding request
      return count(AccessCategory::hit_mshr_merged, false);
    }
    if (entry.subscriber_count >= cfg_.mshr_merge_capacity)
      return count(AccessCategory::hit_mshr_full, false);
    ++entry.subscriber_count;
    ++flight.merged_count;
    flight.tokens.push_back(token);
    if (kind == AccessKind::demand) flight.demand_merged = true;
    return count(AccessCategory::hit_mshr_merged, false);
  }

  MshrEntry* entry = nullptr;
  if (it != mshr_.end()) {
    entry = &it->second;
  } else if (mshr_.size() < static_cast<std::size_t>(cfg_.mshr_entries)) {
    entry = &mshr_[la];
  } else {
    return count(AccessCategory::miss_mshr_full, false);
  }
  SectorFlight& flight = entry->sectors[si];
  flight.requested = true;
  flight.prefetch_origin = kind == AccessKind::prefetch;
  flight.demand_merged = false;
  flight.merged_count = 0;
  flight.tokens.clear();
  if (token != kNoToken) flight.tokens.push_back(token);
  return count(AccessCategory::miss_mshr_available, true);
}

SectorCache::FillResult SectorCache::fill(addr_t sector_addr) {
  FillResult res;
  addr_t la = line_of(sector_addr);
  int si = sector_index(sector_addr);
  bool prefetch_only = false;
  auto it = mshr_.find(la);
  if (it == mshr_.end() || !it->second.sectors[si].requested)
    throw SimulationError("fill without an outstanding sector request");
  {
    SectorFlight& flight = it->second.sectors[si];
    res.tokens = std::move(flight.tokens);
    if (flight.prefetch_origin) {
      ++counters_->prefetch_installed;
      if (flight.demand_merged)
        ++counters_->prefetch_later_demanded;
      else
        prefetch_only = true;
    }
    it->second.subscriber_count -= flight.merged_count;
    flight = SectorFlight{};
    bool any = false;
    for (int s = 0; s < sectors_per_line_; ++s) any = any || it->second.sectors[s].requested;
    if (!any) mshr_.erase(it);
  }
  Line& line = allocate_line(la);
  line.valid_sectors |= 1u << si;
  if (prefetch_only)
    line.prefetch_marks |= 1u << si;
  else
    line.prefetch_marks &= ~(1u << si);
  line.lru_stamp = lru_clock_++;
  return res;
}

void SectorCache::install_direct(addr_t sector_addr) {
  addr_t la = line_of(sector_addr);
  int si = sector_index(sector_addr);
  Line& line = allocate_line(la);
  line.valid_sectors |= 1u << si;
  line.prefetch_marks &= ~(1u << si);
  line.lru_stamp = lru_clock_++;
}

MemoryHierarchy::MemoryHierarchy(const HierarchyConfig& cfg)
    : cfg_(cfg), l2_cache_(cfg.l2, &l2_counters_) {
  if (cfg.sm_count < 1) throw ConfigError("sm count must be >= 1");
  if (cfg.dram.requests_per_cycle < 1) throw ConfigError("dram requests per cycle must be >= 1");
  l1_.reserve(static_cast<std::size_t>(cfg.sm_count));
  for (int i = 0; i < cfg.sm_count; ++i) l1_.emplace_back(cfg.l1, &l1_counters_);
}

void MemoryHierarchy::push_event(std::uint64_t cycle, EventType type, addr_t sector,
                                 AccessKind kind, int sm, std::uint64_t token,
                                 PopClass pop_class, int level) {
  events_.push(Event{cycle, seq_++, type, sector, kind, sm, token, pop_class, level});
}

AccessCategory MemoryHierarchy::submit(const MemRequest& req, std::uint64_t cycle) {
  if (req.kind == AccessKind::demand && cfg_.perfect != PerfectMode::off) {
    bool forced = cfg_.perfect == PerfectMode::upward ? req.pop_class >= 2 : req.pop_class == 1;
    if (forced) {
      ++l1_counters_.by_category[static_cast<int>(AccessKind::demand)]
                               [static_cast<int>(AccessCategory::hit)];
      push_event(cycle + static_cast<std::uint64_t>(cfg_.l1.hit_latency), EventType::forced_done,
                 req.sector, AccessKind::demand, req.sm, req.token, req.pop_class, 0);
      return AccessCategory::hit;
    }
  }
  std::uint64_t cache_token = req.kind == AccessKind::demand ? req.token : kNoToken;
  auto res = l1_[static_cast<std::size_t>(req.sm)].access(req.sector, req.kind, cache_token);
  switch (res.category) {
    case AccessCategory::hit:
      if (req.kind == AccessKind::demand)
        push_event(cycle + static_cast<std::uint64_t>(cfg_.l1.hit_latency), EventType::l1_done,
                   req.sector, req.kind, req.sm, req.token, req.pop_class, 0);
      break;
    case AccessCategory::miss_mshr_available:
      if (req.kind == AccessKind::demand && req.pop_class >= 1)
        ++l1_miss_hist_[std::min(req.pop_class, kNumPopClasses) - 1];
      push_event(cycle + static_cast<std::uint64_t>(cfg_.l1.hit_latency), EventType::arrive_l2,
                 req.sector, req.kind, req.sm, 0, req.pop_class, 0);
      break;
    default:
      break;  // merged completes at fill; full categories leave nothing behind
  }
  return res.category;
}

void MemoryHierarchy::complete_l1_fill(int sm, addr_t sector, std::uint64_t cycle, int level,
                                       std::vector<MemCompletion>& out) {
  auto res = l1_[static_cast<std::size_t>(sm)].fill(sector);
  for (std::uint64_t token : res.tokens) out.push_back({token, cycle, level});
}

void MemoryHierarchy::handle(const Event& ev, std::vector<MemCompletion>& out) {
  switch (ev.type) {
    case EventType::l1_done:
      out.push_back({ev.token, ev.cycle, 0});
      break;
    case EventType::forced_done:
      l1_[static_cast<std::size_t>(ev.sm)].install_direct(ev.sector);
      out.push_back({ev.token, ev.cycle, 0});
      break;
    case EventType::arrive_l2: {
      auto res = l2_cache_.access(ev.sector, ev.kind, static_cast<std::uint64_t>(ev.sm));
      switch (res.category) {
        case AccessCategory::hit:
          push_event(ev.cycle + static_cast<std::uint64_t>(cfg_.l2.hit_latency),
                     EventType::fill_l1, ev.sector, ev.kind, ev.sm, 0, ev.pop_class, 1);
          break;
        case AccessCategory::hit_mshr_merged:
          break;  // the outstanding request fills this SM too
        case AccessCategory::miss_mshr_available:
          if (ev.kind == AccessKind::demand && ev.pop_class >= 1)
            ++dram_miss_hist_[std::min(ev.pop_class, kNumPopClasses) - 1];
          push_event(ev.cycle + static_cast<std::uint64_t>(cfg_.l2.hit_latency),
                     EventType::arrive_dram, ev.sector, ev.kind, ev.sm, 0, ev.pop_class, 0);
          break;
        default:
          // Structural stall at the shared level: the request is already
          // committed to an L1 MSHR slot, so it waits and retries.
          push_event(ev.cycle + 1, EventType::arrive_l2, ev.sector, ev.kind, ev.sm, 0,
                     ev.pop_class, 0);
          break;
      }
      break;
    }
    case EventType::arrive_dram: {
      if (ev.cycle > dram_cursor_) {
        dram_cursor_ = ev.cycle;
        dram_admitted_at_cursor_ = 0;
      }
      if (dram_admitted_at_cursor_ >= cfg_.dram.requests_per_cycle) {
        ++dram_cursor_;
        dram_admitted_at_cursor_ = 0;
      }
      ++dram_admitted_at_cursor_;
      ++dram_counters_.reads;
      if (ev.kind == AccessKind::demand) ++dram_counters_.demand_reads;
      push_event(dram_cursor_ + static_cast<std::uint64_t>(cfg_.dram.latency),
                 EventType::dram_done, ev.sector, ev.kind, ev.sm, 0, ev.pop_class, 2);
      break;
    }
    case EventType::dram_done: {
      auto res = l2_cache_.fill(ev.sector);
      for (std::uint64_t sm_token : res.tokens)
        push_event(ev.cycle, EventType::fill_l1, ev.sector, ev.kind,
                   static_cast<int>(sm_token), 0, ev.pop_class, 2);
      break;
    }
    case EventType::fill_l1:
      complete_l1_fill(ev.sm, ev.sector, ev.cycle, ev.level, out);
      break;
  }
}

void MemoryHierarchy::advance(std::uint64_t cycle, std::vector<MemCompletion>& out) {
  while (!events_.empty() && events_.top().cycle <= cycle) {
    Event ev = events_.top();
    events_.pop();
    handle(ev, out);
  }
}

std::uint64_t MemoryHierarchy::next_event_cycle() const {
  return events_.empty() ? ~0ULL : events_.top().cycle;
}

}  // namespace ttpsim
