#include "ttpsim/intersect.hpp"

#include <algorithm>

namespace ttpsim {

std::optional<float> ray_box_test(const Ray& ray, const Aabb& box) {
  if (box.empty()) return std::nullopt;
  float t_near = 0.0f;
  float t_far = ray.t_max;
  for (int axis = 0; axis < 3; ++axis) {
    float o = ray.origin[axis];
    float d = ray.dir[axis];
    float lo = box.min[axis];
    float hi = box.max[axis];
    if (d == 0.0f) {
      if (o < lo || o > hi) return std::nullopt;
      continue;
    }
    float inv = 1.0f / d;
    float t0 = (lo - o) * inv;
    float t1 = (hi - o) * inv;
    if (t0 > t1) std::swap(t0, t1);
    t_near = std::max(t_near, t0);
    t_far = std::min(t_far, t1);
    if (t_near > t_far) return std::nullopt;
  }
  return t_near;
}

std::optional<float> ray_triangle_test(const Ray& ray, const Triangle& tri) {
  if (tri.degenerate()) return std::nullopt;
  Vec3 e1 = tri.v1 - tri.v0;
  Vec3 e2 = tri.v2 - tri.v0;
  Vec3 pvec = cross(ray.dir, e2);
  float det = dot(e1, pvec);
  if (std::fabs(det) < kTriangleDetEpsilon) return std::nullopt;
  float inv_det = 1.0f / det;
  Vec3 tvec = ray.origin - tri.v0;
  float u = dot(tvec, pvec) * inv_det;
  if (u < 0.0f || u > 1.0f) return std::nullopt;
  Vec3 qvec = cross(tvec, e1);
  float v = dot(ray.dir, qvec) * inv_det;
  if (v < 0.0f || u + v > 1.0f) return std::nullopt;
  float t = dot(e2, qvec) * inv_det;
  if (t <= kMinHitDistance || t > ray.t_max) return std::nullopt;
  return t;
}

Vec3 facing_normal(const Triangle& tri, const Vec3& dir) {
  Vec3 n = normalize(cross(tri.v1 - tri.v0, tri.v2 - tri.v0));
  if (dot(n, dir) > 0.0f) n = -n;
  return n;
}

HitRecord brute_force_closest(const Ray& ray, const std::vector<Triangle>& tris) {
  HitRecord best;
  for (const Triangle& tri : tris) {
    auto t = ray_triangle_test(ray, tri);
    if (!t) continue;
    if (!best.hit || *t < best.t || (*t == best.t && tri.id < best.primitive_id)) {
      best.hit = true;
      best.t = *t;
      best.primitive_id = tri.id;
      best.point = ray.origin + ray.dir * *t;
      best.normal = facing_normal(tri, ray.dir);
    }
  }
  return best;
}

}  // namespace ttpsim
