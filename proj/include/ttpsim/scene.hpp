#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ttpsim/types.hpp"

namespace ttpsim {

enum class SyntheticKind { grid, random_boxes, deep_branch };

// Minimal OBJ reader: `v` and `f` records, 1-based indices, triangles only.
// Malformed input raises ConfigError naming the line; faces with more than
// three vertices raise "non-triangular face". An empty file yields an empty
// triangle list.
std::vector<Triangle> load_obj(const std::string& path);
std::vector<Triangle> load_obj_text(const std::string& text, const std::string& name = "<obj>");

// Procedural scenes. Identical (kind, count, seed) always produces identical
// geometry, byte for byte.
//   grid         - count triangles tiling the z=0 plane
//   random-boxes - seeded axis-aligned boxlets, 12 triangles each
//   deep-branch  - nested clusters shrinking toward a limit point; drives the
//                  builder into long skinny branches and deep stacks
std::vector<Triangle> generate_synthetic(SyntheticKind kind, std::uint32_t count,
                                         std::uint64_t seed);

SyntheticKind synthetic_kind_from_string(const std::string& name);
std::string to_string(SyntheticKind kind);

// One closest-hit ray per pixel through the pixel center, row-major
// (y outer, x inner). Directions are unit length.
std::vector<Ray> generate_primary_rays(const Camera& camera);

// Extra per-pixel samples with deterministic sub-pixel jitter; sample 0 is
// the pixel center (identical to generate_primary_rays).
std::vector<Ray> generate_sample_rays(const Camera& camera, int samples_per_pixel,
                                      std::uint64_t seed);

// Cosine-weighted hemisphere directions around each hit normal, origin nudged
// off the surface. Records with hit == false are skipped.
std::vector<Ray> generate_bounce_rays(const std::vector<HitRecord>& hits, std::uint64_t seed,
                                      int rays_per_hit = 1);

// Camera placed to frame the scene bounds looking down -z.
Camera auto_frame_camera(const std::vector<Triangle>& tris, int width, int height,
                         float fov_degrees = 45.0f);

Aabb scene_bounds(const std::vector<Triangle>& tris);

// splitmix64: tiny, platform-stable generator used for every seeded choice
// in the project so runs reproduce bit-for-bit everywhere.
struct SplitMix64 {
  std::uint64_t state;

  explicit SplitMix64(std::uint64_t seed) : state(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1)
  float next_float() { return static_cast<float>(next() >> 40) * 0x1.0p-24f; }

  double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
};

}  // namespace ttpsim
