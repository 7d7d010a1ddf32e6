#include "ttpsim/config.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace ttpsim {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
  throw ConfigError("invalid value for '" + key + "': '" + value + "'");
}

std::int64_t parse_int(const std::string& key, const std::string& value) {
  std::int64_t out = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) bad_value(key, value);
  return out;
}

std::int64_t parse_positive(const std::string& key, const std::string& value) {
  std::int64_t v = parse_int(key, value);
  if (v <= 0) bad_value(key, value);
  return v;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) bad_value(key, value);
  return out;
}

std::size_t parse_size(const std::string& key, const std::string& value) {
  std::string digits = value;
  std::size_t scale = 1;
  if (value.size() > 2 && (value.ends_with("KB") || value.ends_with("kB"))) {
    digits = value.substr(0, value.size() - 2);
    scale = 1024;
  } else if (value.size() > 2 && value.ends_with("MB")) {
    digits = value.substr(0, value.size() - 2);
    scale = 1024 * 1024;
  } else if (value.size() > 1 && value.ends_with("B")) {
    digits = value.substr(0, value.size() - 1);
  }
  return static_cast<std::size_t>(parse_positive(key, digits)) * scale;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  bad_value(key, value);
}

float parse_float(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    float v = std::stof(value, &pos);
    if (pos != value.size()) bad_value(key, value);
    return v;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    bad_value(key, value);
  }
}

// 0 means fully associative in CacheConfig.
int parse_associativity(const std::string& key, const std::string& value) {
  if (value == "full") return 0;
  return static_cast<int>(parse_positive(key, value));
}

void set_cache_key(CacheConfig& c, const std::string& key, const std::string& field,
                   const std::string& value) {
  if (field == "capacity")
    c.capacity = parse_size(key, value);
  else if (field == "associativity")
    c.associativity = parse_associativity(key, value);
  else if (field == "line_size")
    c.line_size = static_cast<int>(parse_positive(key, value));
  else if (field == "sector_size")
    c.sector_size = static_cast<int>(parse_positive(key, value));
  else if (field == "hit_latency")
    c.hit_latency = static_cast<int>(parse_positive(key, value));
  else if (field == "mshr_entries")
    c.mshr_entries = static_cast<int>(parse_positive(key, value));
  else if (field == "mshr_merge_capacity")
    c.mshr_merge_capacity = static_cast<int>(parse_positive(key, value));
  else
    throw ConfigError("unknown key '" + key + "'");
}

void set_arbitration(PrefetchPolicyConfig& p, const std::string& key, const std::string& value) {
  if (value == "demand-priority") {
    p.arbitration = ArbitrationMode::demand_priority;
    return;
  }
  p.arbitration = ArbitrationMode::threshold;
  p.threshold_cycles = static_cast<int>(parse_positive(key, value));
}

TraversalOrder parse_order(const std::string& key, const std::string& value) {
  if (value == "dfs") return TraversalOrder::dfs;
  if (value == "bfs") return TraversalOrder::bfs;
  bad_value(key, value);
}

}  // namespace

SceneSource parse_scene_source(const std::string& text) {
  if (text.empty()) throw ConfigError("empty scene source");
  SceneSource src;
  if (!text.starts_with("synthetic:")) {
    src.kind = SceneSource::Kind::obj;
    src.obj_path = text;
    return src;
  }
  std::string rest = text.substr(10);
  std::size_t colon = rest.find(':');
  if (colon == std::string::npos)
    throw ConfigError("scene source '" + text + "' needs the form synthetic:<kind>:<count>");
  std::string kind = rest.substr(0, colon);
  std::string count = rest.substr(colon + 1);
  src.kind = SceneSource::Kind::synthetic;
  if (kind == "grid")
    src.synthetic_kind = SyntheticKind::grid;
  else if (kind == "random-boxes")
    src.synthetic_kind = SyntheticKind::random_boxes;
  else if (kind == "deep-branch")
    src.synthetic_kind = SyntheticKind::deep_branch;
  else
    throw ConfigError("unknown synthetic scene kind '" + kind + "'");
  src.synthetic_count = static_cast<int>(parse_positive("scene", count));
  return src;
}

void apply_config_override(SimConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "scene")
    cfg.scene = parse_scene_source(value);
  else if (key == "policy")
    cfg.prefetch.policy = prefetch_policy_from_string(value);
  else if (key == "seed")
    cfg.seed = parse_u64(key, value);
  else if (key == "sm_count")
    cfg.memory.sm_count = static_cast<int>(parse_positive(key, value));
  else if (key == "image.width")
    cfg.image_width = static_cast<int>(parse_positive(key, value));
  else if (key == "image.height")
    cfg.image_height = static_cast<int>(parse_positive(key, value));
  else if (key == "camera.fov")
    cfg.fov_degrees = parse_float(key, value);
  else if (key == "bounce_depth")
    cfg.bounce_depth = static_cast<int>(parse_int(key, value));
  else if (key == "samples_per_pixel")
    cfg.samples_per_pixel = static_cast<int>(parse_positive(key, value));
  else if (key == "warp_size")
    cfg.rtunit.warp_size = static_cast<int>(parse_positive(key, value));
  else if (key == "warp_buffer_size")
    cfg.rtunit.warp_buffer_size = static_cast<int>(parse_positive(key, value));
  else if (key == "traversal_order")
    cfg.rtunit.traversal_order = parse_order(key, value);
  else if (key == "box_test_latency")
    cfg.rtunit.box_test_latency = static_cast<int>(parse_positive(key, value));
  else if (key == "leaf_test_latency")
    cfg.rtunit.leaf_test_latency = static_cast<int>(parse_positive(key, value));
  else if (key == "max_stack_depth")
    cfg.rtunit.max_stack_depth = static_cast<int>(parse_positive(key, value));
  else if (key == "near_child_first")
    cfg.rtunit.near_child_first = parse_bool(key, value);
  else if (key.starts_with("l1."))
    set_cache_key(cfg.memory.l1, key, key.substr(3), value);
  else if (key.starts_with("l2."))
    set_cache_key(cfg.memory.l2, key, key.substr(3), value);
  else if (key == "dram.latency")
    cfg.memory.dram.latency = static_cast<int>(parse_positive(key, value));
  else if (key == "dram.requests_per_cycle")
    cfg.memory.dram.requests_per_cycle = static_cast<int>(parse_positive(key, value));
  else if (key == "prefetch.n1")
    cfg.prefetch.intensity[0] = static_cast<int>(parse_positive(key, value));
  else if (key == "prefetch.n2")
    cfg.prefetch.intensity[1] = static_cast<int>(parse_positive(key, value));
  else if (key == "prefetch.n3")
    cfg.prefetch.intensity[2] = static_cast<int>(parse_positive(key, value));
  else if (key == "prefetch.bfs_distance")
    cfg.prefetch.bfs_distance = static_cast<int>(parse_positive(key, value));
  else if (key == "prefetch.arbitration")
    set_arbitration(cfg.prefetch, key, value);
  else if (key == "prefetch.queue_capacity")
    cfg.prefetch.queue_capacity = static_cast<int>(parse_positive(key, value));
  else
    throw ConfigError("unknown key '" + key + "'");
}

SimConfig parse_config_text(const std::string& text, const std::string& name) {
  SimConfig cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (std::size_t hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(name + ":" + std::to_string(line_no) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError(name + ":" + std::to_string(line_no) + ": expected key = value");
    try {
      apply_config_override(cfg, key, value);
    } catch (const ConfigError& err) {
      throw ConfigError(name + ":" + std::to_string(line_no) + ": " + err.what());
    }
  }
  return cfg;
}

SimConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path);
}

namespace {

void check_cache(const char* prefix, const CacheConfig& c) {
  std::string p(prefix);
  if (c.line_size % c.sector_size != 0)
    throw ConfigError(p + ".line_size must be a multiple of " + p + ".sector_size");
  if (c.line_size / c.sector_size > 32)
    throw ConfigError(p + ".line_size holds too many sectors (limit 32)");
  if (c.capacity % static_cast<std::size_t>(c.line_size) != 0)
    throw ConfigError(p + ".capacity must be a multiple of " + p + ".line_size");
  std::size_t lines = c.capacity / static_cast<std::size_t>(c.line_size);
  if (c.associativity > 0 && lines % static_cast<std::size_t>(c.associativity) != 0)
    throw ConfigError(p + ".capacity does not divide into " + p + ".associativity ways");
}

}  // namespace

void validate_config(const SimConfig& cfg) {
  check_cache("l1", cfg.memory.l1);
  check_cache("l2", cfg.memory.l2);
  if (cfg.bounce_depth < 0) throw ConfigError("bounce_depth must be >= 0");
  bool wants_dfs = cfg.prefetch.policy == PrefetchPolicy::ttp_dfs ||
                   cfg.prefetch.policy == PrefetchPolicy::park_leaf;
  if (wants_dfs && cfg.rtunit.traversal_order != TraversalOrder::dfs)
    throw ConfigError("policy " + to_string(cfg.prefetch.policy) +
                      " requires traversal_order = dfs");
  if (cfg.prefetch.policy == PrefetchPolicy::ttp_bfs &&
      cfg.rtunit.traversal_order != TraversalOrder::bfs)
    throw ConfigError("policy ttp-bfs requires traversal_order = bfs");
}

}  // namespace ttpsim
