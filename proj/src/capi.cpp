#include "ttpsim/capi.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <new>
#include <optional>
#include <string>

#include "ttpsim/config.hpp"
#include "ttpsim/metrics.hpp"
#include "ttpsim/sim.hpp"

struct ttp_config {
  ttpsim::SimConfig cfg;
};

struct ttp_result {
  ttpsim::RunResult run;
  bool has_trace = false;
};

namespace {

thread_local std::string g_last_error;

ttp_status fail(ttp_status code, const std::string& msg) {
  g_last_error = msg;
  return code;
}

template <typename Fn>
ttp_status guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const ttpsim::ConfigError& e) {
    return fail(TTP_ERR_CONFIG, e.what());
  } catch (const ttpsim::SimulationError& e) {
    return fail(TTP_ERR_RUNTIME, e.what());
  } catch (const std::exception& e) {
    return fail(TTP_ERR_RUNTIME, e.what());
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

ttp_status metric_value(const ttp_result* res, const ttp_result* baseline,
                        const std::string& name, double* out) {
  using ttpsim::CacheLevel;
  const ttpsim::RunStats& s = res->run.stats;

  auto optional_metric = [&](std::optional<double> v, const char* why) {
    if (!v) return fail(TTP_ERR_RUNTIME, std::string(name) + " undefined: " + why);
    *out = *v;
    return TTP_OK;
  };
  auto need_baseline = [&]() {
    if (baseline) return TTP_OK;
    return fail(TTP_ERR_INVALID_ARG, name + " requires a baseline result");
  };
  auto level = name.rfind("l2_", 0) == 0 ? CacheLevel::l2 : CacheLevel::l1;

  if (name == "cycles") {
    *out = static_cast<double>(s.total_cycles);
  } else if (name == "rays") {
    *out = static_cast<double>(s.rays);
  } else if (name == "node_visits") {
    *out = static_cast<double>(s.node_visits);
  } else if (name == "avg_nodes_per_ray") {
    *out = s.avg_nodes_per_ray();
  } else if (name == "max_nodes_per_ray") {
    *out = static_cast<double>(s.max_nodes_per_ray);
  } else if (name == "l1_accuracy" || name == "l2_accuracy") {
    return optional_metric(ttpsim::accuracy(s, level), "no prefetched blocks installed");
  } else if (name == "l1_coverage" || name == "l2_coverage") {
    if (ttp_status st = need_baseline(); st != TTP_OK) return st;
    *out = ttpsim::coverage(s, baseline->run.stats, level);
  } else if (name == "l1_efficiency" || name == "l2_efficiency") {
    return optional_metric(ttpsim::efficiency(s, level), "no prefetch requests issued");
  } else if (name == "l1_mpki" || name == "l2_mpki") {
    *out = ttpsim::mpki(s, level);
  } else if (name == "l1_demand_misses" || name == "l2_demand_misses") {
    *out = static_cast<double>(s.level(level).demand_misses());
  } else if (name == "dram_reads") {
    *out = static_cast<double>(s.dram.reads);
  } else if (name == "dram_writebacks") {
    *out = static_cast<double>(s.dram.writebacks);
  } else if (name == "dram_bw_util") {
    *out = s.dram_bw_utilization();
  } else if (name == "speedup") {
    if (ttp_status st = need_baseline(); st != TTP_OK) return st;
    *out = ttpsim::speedup(baseline->run.stats, s);
  } else {
    return fail(TTP_ERR_INVALID_ARG, "unknown metric '" + name + "'");
  }
  return TTP_OK;
}

}  // namespace

extern "C" {

ttp_config* ttp_config_create(void) { return new (std::nothrow) ttp_config(); }

ttp_config* ttp_config_clone(const ttp_config* cfg) {
  if (!cfg) return nullptr;
  return new (std::nothrow) ttp_config(*cfg);
}

void ttp_config_destroy(ttp_config* cfg) { delete cfg; }

ttp_status ttp_config_load_file(ttp_config* cfg, const char* path) {
  if (!cfg || !path) return fail(TTP_ERR_INVALID_ARG, "null config or path");
  try {
    cfg->cfg = ttpsim::parse_config_file(path);
    return TTP_OK;
  } catch (const ttpsim::ConfigError& e) {
    std::string msg = e.what();
    bool unreadable = msg.find("cannot open") != std::string::npos;
    return fail(unreadable ? TTP_ERR_IO : TTP_ERR_CONFIG, msg);
  } catch (const std::exception& e) {
    return fail(TTP_ERR_RUNTIME, e.what());
  }
}

ttp_status ttp_config_set(ttp_config* cfg, const char* key, const char* value) {
  if (!cfg || !key || !value) return fail(TTP_ERR_INVALID_ARG, "null config, key, or value");
  return guarded([&] {
    ttpsim::apply_config_override(cfg->cfg, key, value);
    return TTP_OK;
  });
}

ttp_status ttp_run(const ttp_config* cfg, int collect_trace, ttp_result** out) {
  if (!cfg || !out) return fail(TTP_ERR_INVALID_ARG, "null config or output handle");
  *out = nullptr;
  return guarded([&] {
    auto res = std::make_unique<ttp_result>();
    res->run = ttpsim::run_experiment(cfg->cfg, collect_trace != 0);
    res->has_trace = collect_trace != 0;
    *out = res.release();
    return TTP_OK;
  });
}

uint64_t ttp_result_cycles(const ttp_result* res) {
  return res ? res->run.stats.total_cycles : 0;
}

const char* ttp_result_policy(const ttp_result* res) {
  return res ? res->run.stats.policy.c_str() : nullptr;
}

ttp_status ttp_result_metric(const ttp_result* res, const ttp_result* baseline,
                             const char* name, double* out) {
  if (!res || !name || !out) return fail(TTP_ERR_INVALID_ARG, "null result, name, or output");
  return guarded([&] { return metric_value(res, baseline, name, out); });
}

const char* ttp_csv_header(void) {
  static const std::string header = ttpsim::csv_header();
  return header.c_str();
}

char* ttp_result_csv_row(const ttp_result* res, const ttp_result* baseline,
                         const char* run_id) {
  if (!res || !run_id) {
    fail(TTP_ERR_INVALID_ARG, "null result or run id");
    return nullptr;
  }
  try {
    return dup_string(ttpsim::csv_row(res->run.stats,
                                      baseline ? &baseline->run.stats : nullptr, run_id));
  } catch (const std::exception& e) {
    fail(TTP_ERR_RUNTIME, e.what());
    return nullptr;
  }
}

ttp_status ttp_result_write_image(const ttp_result* res, const char* path) {
  if (!res || !path) return fail(TTP_ERR_INVALID_ARG, "null result or path");
  try {
    ttpsim::write_ppm(res->run.hit_buffer, res->run.width, res->run.height, path);
    return TTP_OK;
  } catch (const std::exception& e) {
    return fail(TTP_ERR_IO, e.what());
  }
}

ttp_status ttp_result_write_trace(const ttp_result* res, const char* path) {
  if (!res || !path) return fail(TTP_ERR_INVALID_ARG, "null result or path");
  if (!res->has_trace)
    return fail(TTP_ERR_RUNTIME, "run did not collect a trace");
  try {
    ttpsim::write_trace(res->run.trace, path);
    return TTP_OK;
  } catch (const std::exception& e) {
    return fail(TTP_ERR_IO, e.what());
  }
}

void ttp_result_destroy(ttp_result* res) { delete res; }

const char* ttp_last_error(void) { return g_last_error.c_str(); }

void ttp_string_free(char* s) { std::free(s); }

}  // extern "C"
