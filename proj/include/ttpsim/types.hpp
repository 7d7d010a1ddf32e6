#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace ttpsim {

using addr_t = std::uint64_t;

// Fatal simulation-state error (stack overflow, corrupt node image, ...).
// Callers are expected to abort the run and surface the message.
class SimulationError : public std::runtime_error {
 public:
  explicit SimulationError(const std::string& what) : std::runtime_error(what) {}
};

// Configuration / input validation error. Messages name the offending key or
// file location so the CLI can print them verbatim.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct Vec3 {
  float x = 0.0f, y = 0.0f, z = 0.0f;

  Vec3() = default;
  Vec3(float x_, float y_, float z_) : x(x_), y(y_), z(z_) {}

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(float s) const { return {x * s, y * s, z * s}; }
  Vec3 operator/(float s) const { return {x / s, y / s, z / s}; }
  Vec3 operator-() const { return {-x, -y, -z}; }

  float operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }

  bool operator==(const Vec3& o) const { return x == o.x && y == o.y && z == o.z; }
};

inline float dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline float length(const Vec3& v) { return std::sqrt(dot(v, v)); }

inline Vec3 normalize(const Vec3& v) {
  float len = length(v);
  if (len == 0.0f) return v;
  return v / len;
}

inline Vec3 vmin(const Vec3& a, const Vec3& b) {
  return {std::min(a.x, b.x), std::min(a.y, b.y), std::min(a.z, b.z)};
}

inline Vec3 vmax(const Vec3& a, const Vec3& b) {
  return {std::max(a.x, b.x), std::max(a.y, b.y), std::max(a.z, b.z)};
}

struct Triangle {
  Vec3 v0, v1, v2;
  std::uint32_t id = 0;

  // Zero-area triangles are kept in the scene but flagged; intersection
  // treats them as never hit.
  bool degenerate() const {
    Vec3 n = cross(v1 - v0, v2 - v0);
    return dot(n, n) == 0.0f;
  }

  Vec3 centroid() const { return (v0 + v1 + v2) / 3.0f; }
};

// Axis-aligned box. Empty boxes use the inverted-bounds sentinel (min > max).
struct Aabb {
  Vec3 min{std::numeric_limits<float>::infinity(), std::numeric_limits<float>::infinity(),
           std::numeric_limits<float>::infinity()};
  Vec3 max{-std::numeric_limits<float>::infinity(), -std::numeric_limits<float>::infinity(),
           -std::numeric_limits<float>::infinity()};

  bool empty() const { return min.x > max.x || min.y > max.y || min.z > max.z; }

  void grow(const Vec3& p) {
    min = vmin(min, p);
    max = vmax(max, p);
  }

  void grow(const Aabb& b) {
    min = vmin(min, b.min);
    max = vmax(max, b.max);
  }

  void grow(const Triangle& t) {
    grow(t.v0);
    grow(t.v1);
    grow(t.v2);
  }

  bool contains(const Aabb& b) const {
    if (b.empty()) return true;
    return min.x <= b.min.x && min.y <= b.min.y && min.z <= b.min.z && max.x >= b.max.x &&
           max.y >= b.max.y && max.z >= b.max.z;
  }

  Vec3 extent() const { return max - min; }

  int longest_axis() const {
    Vec3 e = extent();
    if (e.x >= e.y && e.x >= e.z) return 0;
    return e.y >= e.z ? 1 : 2;
  }
};

enum class RayMode { closest_hit, any_hit };

struct Ray {
  Vec3 origin;
  Vec3 dir;  // unit length
  RayMode mode = RayMode::closest_hit;
  float t_max = std::numeric_limits<float>::infinity();
};

struct HitRecord {
  bool hit = false;
  float t = 0.0f;
  std::uint32_t primitive_id = 0;
  Vec3 point;
  Vec3 normal;  // geometric normal, oriented against the ray
};

struct Camera {
  Vec3 position{0.0f, 0.0f, 0.0f};
  Vec3 look_at{0.0f, 0.0f, -1.0f};
  Vec3 up{0.0f, 1.0f, 0.0f};
  float fov_degrees = 45.0f;
  int width = 32;
  int height = 32;
};

}  // namespace ttpsim
