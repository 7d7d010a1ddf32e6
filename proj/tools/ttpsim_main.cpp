#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ttpsim/capi.h"

namespace {

struct ConfigDeleter {
  void operator()(ttp_config* p) const { ttp_config_destroy(p); }
};
struct ResultDeleter {
  void operator()(ttp_result* p) const { ttp_result_destroy(p); }
};
using ConfigPtr = std::unique_ptr<ttp_config, ConfigDeleter>;
using ResultPtr = std::unique_ptr<ttp_result, ResultDeleter>;

int die(const std::string& what) {
  std::cerr << "error: " << what << ": " << ttp_last_error() << "\n";
  return 1;
}

bool set_key(ttp_config* cfg, const std::string& key, const std::string& value) {
  return ttp_config_set(cfg, key.c_str(), value.c_str()) == TTP_OK;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = text.find(sep, start);
    if (pos == std::string::npos) {
      parts.push_back(text.substr(start));
      return parts;
    }
    parts.push_back(text.substr(start, pos - start));
    start = pos + 1;
  }
}

// Translate one sweep-axis value into config overrides on `cfg`.
bool apply_axis(ttp_config* cfg, const std::string& axis, const std::string& value,
                std::string& error) {
  if (axis == "intensity") {
    std::vector<std::string> parts = split(value, ':');
    if (parts.size() != 3) {
      error = "intensity value must be n1:n2:n3, got '" + value + "'";
      return false;
    }
    return set_key(cfg, "prefetch.n1", parts[0]) && set_key(cfg, "prefetch.n2", parts[1]) &&
           set_key(cfg, "prefetch.n3", parts[2]);
  }
  if (axis == "bfs_distance") return set_key(cfg, "prefetch.bfs_distance", value);
  if (axis == "arbitration") return set_key(cfg, "prefetch.arbitration", value);
  if (axis == "cache_size") return set_key(cfg, "l1.capacity", value);
  if (axis == "resolution") {
    std::vector<std::string> parts = split(value, 'x');
    if (parts.size() != 2) {
      error = "resolution value must be WIDTHxHEIGHT, got '" + value + "'";
      return false;
    }
    return set_key(cfg, "image.width", parts[0]) && set_key(cfg, "image.height", parts[1]);
  }
  error = "unknown sweep axis '" + axis +
          "' (expected intensity, bfs_distance, arbitration, cache_size, or resolution)";
  return false;
}

// Comparative columns need the identical workload; a sweep point that changes
// the ray set (resolution axis) gets no baseline columns.
bool same_workload(const ttp_result* a, const ttp_result* b) {
  double va = 0.0, vb = 0.0;
  if (ttp_result_metric(a, nullptr, "node_visits", &va) != TTP_OK) return false;
  if (ttp_result_metric(b, nullptr, "node_visits", &vb) != TTP_OK) return false;
  return va == vb;
}

bool emit_row(std::ostream& out, const ttp_result* run, const ttp_result* baseline,
              const std::string& run_id) {
  char* row = ttp_result_csv_row(run, baseline, run_id.c_str());
  if (!row) return false;
  out << row << "\n";
  ttp_string_free(row);
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cycle-level ray-tracing unit simulator with tree-aware prefetching"};
  std::string config_path, scene, policy, sweep, out_path, image_path, trace_path, seed;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "Configuration file of key = value lines");
  app.add_option("--scene", scene, "Scene source: OBJ path or synthetic:<kind>:<count>");
  app.add_option("--policy", policy,
                 "Prefetch policy: off, ttp-dfs, ttp-bfs, park-leaf, perfect-upward, "
                 "perfect-downward");
  app.add_option("--sweep", sweep,
                 "Parameter sweep <axis>=<v1,v2,...>; axes: intensity (n1:n2:n3), "
                 "bfs_distance, arbitration, cache_size, resolution (WxH)");
  app.add_option("--out", out_path, "CSV output path (default: stdout)");
  app.add_option("--image", image_path, "Write the hit buffer as a binary PPM");
  app.add_option("--trace", trace_path, "Write the stack-event trace (single runs only)");
  app.add_option("--seed", seed, "Random seed (overrides the config file)");
  app.add_option("--set", overrides, "Extra key=value overrides, applied last")
      ->expected(-1);
  CLI11_PARSE(app, argc, argv);

  ConfigPtr cfg(ttp_config_create());
  if (!cfg) {
    std::cerr << "error: out of memory\n";
    return 1;
  }
  if (!config_path.empty() && ttp_config_load_file(cfg.get(), config_path.c_str()) != TTP_OK)
    return die("loading '" + config_path + "'");
  if (!scene.empty() && !set_key(cfg.get(), "scene", scene)) return die("--scene");
  if (!policy.empty() && !set_key(cfg.get(), "policy", policy)) return die("--policy");
  if (!seed.empty() && !set_key(cfg.get(), "seed", seed)) return die("--seed");
  for (const std::string& kv : overrides) {
    std::size_t eq = kv.find('=');
    if (eq == std::string::npos) {
      std::cerr << "error: --set expects key=value, got '" << kv << "'\n";
      return 1;
    }
    if (!set_key(cfg.get(), kv.substr(0, eq), kv.substr(eq + 1)))
      return die("--set " + kv);
  }

  std::ofstream out_file;
  if (!out_path.empty()) {
    out_file.open(out_path, std::ios::binary);
    if (!out_file) {
      std::cerr << "error: cannot open '" << out_path << "' for writing\n";
      return 1;
    }
  }
  std::ostream& out = out_path.empty() ? std::cout : out_file;

  if (!sweep.empty()) {
    if (!trace_path.empty()) {
      std::cerr << "error: --trace applies to single runs, not sweeps\n";
      return 1;
    }
    std::size_t eq = sweep.find('=');
    if (eq == std::string::npos || eq == 0) {
      std::cerr << "error: --sweep expects <axis>=<v1,v2,...>, got '" << sweep << "'\n";
      return 1;
    }
    std::string axis = sweep.substr(0, eq);
    std::vector<std::string> values = split(sweep.substr(eq + 1), ',');
    if (values.size() == 1 && values[0].empty()) {
      std::cerr << "error: --sweep " << axis << " has an empty value list\n";
      return 1;
    }

    ConfigPtr base_cfg(ttp_config_clone(cfg.get()));
    if (!base_cfg || !set_key(base_cfg.get(), "policy", "off")) return die("baseline config");
    ttp_result* raw = nullptr;
    if (ttp_run(base_cfg.get(), 0, &raw) != TTP_OK) return die("baseline run");
    ResultPtr baseline(raw);

    out << ttp_csv_header() << "\n";
    if (!emit_row(out, baseline.get(), nullptr, "baseline")) return die("baseline row");
    if (!image_path.empty() &&
        ttp_result_write_image(baseline.get(), image_path.c_str()) != TTP_OK)
      return die("writing '" + image_path + "'");

    int exit_code = 0;
    for (const std::string& value : values) {
      std::string run_id = axis + "=" + value;
      ConfigPtr point_cfg(ttp_config_clone(cfg.get()));
      std::string axis_error;
      if (!point_cfg || !apply_axis(point_cfg.get(), axis, value, axis_error)) {
        std::cerr << "error: sweep point '" << run_id << "': "
                  << (axis_error.empty() ? ttp_last_error() : axis_error) << "\n";
        exit_code = 1;
        continue;
      }
      ttp_result* point_raw = nullptr;
      if (ttp_run(point_cfg.get(), 0, &point_raw) != TTP_OK) {
        std::cerr << "error: sweep point '" << run_id << "': " << ttp_last_error() << "\n";
        exit_code = 1;
        continue;
      }
      ResultPtr point(point_raw);
      const ttp_result* base =
          same_workload(point.get(), baseline.get()) ? baseline.get() : nullptr;
      if (!emit_row(out, point.get(), base, run_id)) {
        std::cerr << "error: sweep point '" << run_id << "': " << ttp_last_error() << "\n";
        exit_code = 1;
      }
    }
    return exit_code;
  }

  // Single mode: run the configured policy; pair it with an off baseline
  // when the policy is anything else.
  ttp_result* raw = nullptr;
  int collect_trace = trace_path.empty() ? 0 : 1;
  if (ttp_run(cfg.get(), collect_trace, &raw) != TTP_OK) return die("run");
  ResultPtr run(raw);
  std::string run_policy = ttp_result_policy(run.get());

  ResultPtr baseline;
  if (run_policy != "off") {
    ConfigPtr base_cfg(ttp_config_clone(cfg.get()));
    if (!base_cfg || !set_key(base_cfg.get(), "policy", "off")) return die("baseline config");
    ttp_result* base_raw = nullptr;
    if (ttp_run(base_cfg.get(), 0, &base_raw) != TTP_OK) return die("baseline run");
    baseline.reset(base_raw);
  }

  out << ttp_csv_header() << "\n";
  if (baseline && !emit_row(out, baseline.get(), nullptr, "baseline"))
    return die("baseline row");
  if (!emit_row(out, run.get(), baseline.get(), run_policy)) return die("result row");

  if (!image_path.empty() && ttp_result_write_image(run.get(), image_path.c_str()) != TTP_OK)
    return die("writing '" + image_path + "'");
  if (!trace_path.empty() && ttp_result_write_trace(run.get(), trace_path.c_str()) != TTP_OK)
    return die("writing '" + trace_path + "'");
  return 0;
}
