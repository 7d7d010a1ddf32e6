#pragma once

#include <cstdint>
#include <string>

#include "ttpsim/memhier.hpp"
#include "ttpsim/prefetch.hpp"
#include "ttpsim/rtunit.hpp"
#include "ttpsim/scene.hpp"

namespace ttpsim {

// Where the triangles come from: a wavefront OBJ file or a generator string
// of the form "synthetic:<kind>:<count>".
struct SceneSource {
  enum class Kind { obj, synthetic };
  Kind kind = Kind::synthetic;
  std::string obj_path;
  SyntheticKind synthetic_kind = SyntheticKind::grid;
  int synthetic_count = 64;
};

SceneSource parse_scene_source(const std::string& text);

struct SimConfig {
  RtUnitConfig rtunit;
  HierarchyConfig memory;
  PrefetchPolicyConfig prefetch;
  SceneSource scene;
  int image_width = 32;
  int image_height = 32;
  float fov_degrees = 45.0f;
  int bounce_depth = 1;
  int samples_per_pixel = 1;
  std::uint64_t seed = 0;
};

// `key = value` lines, `#` comments, sizes accept KB/MB suffixes. Unknown
// keys and malformed values raise ConfigError naming the key and line.
SimConfig parse_config_text(const std::string& text, const std::string& name = "<config>");
SimConfig parse_config_file(const std::string& path);

// Apply one `key=value` override on top of an existing config.
void apply_config_override(SimConfig& cfg, const std::string& key, const std::string& value);

// Cross-field checks (policy/order pairing, cache geometry, positive
// counts). Throws ConfigError naming the offending key.
void validate_config(const SimConfig& cfg);

}  // namespace ttpsim
