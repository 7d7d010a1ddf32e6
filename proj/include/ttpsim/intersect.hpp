#pragma once

#include <optional>
#include <vector>

#include "ttpsim/types.hpp"

namespace ttpsim {

// Numeric guards shared by every intersection path. Kept here so the
// traversal and the reference resolver cannot drift apart.
inline constexpr float kTriangleDetEpsilon = 1e-7f;
inline constexpr float kMinHitDistance = 1e-6f;

// Slab test against the ray segment [0, t_max]. Returns the entry parameter
// (0 when the origin is inside the box), or nullopt on a miss. Zero direction
// components are handled without dividing by zero.
std::optional<float> ray_box_test(const Ray& ray, const Aabb& box);

// Moller-Trumbore. Hits report t in (kMinHitDistance, t_max]; degenerate
// triangles never hit.
std::optional<float> ray_triangle_test(const Ray& ray, const Triangle& tri);

// Reference resolver: tests every triangle, keeps the minimum t. Ties on t
// are broken toward the smaller primitive id. Used as the ground truth the
// traversal is checked against.
HitRecord brute_force_closest(const Ray& ray, const std::vector<Triangle>& tris);

// Geometric normal of tri, flipped to face against dir.
Vec3 facing_normal(const Triangle& tri, const Vec3& dir);

}  // namespace ttpsim
