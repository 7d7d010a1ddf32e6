#include <cmath>

#include "doctest.h"
#include "ttpsim/intersect.hpp"
#include "ttpsim/scene.hpp"

using namespace ttpsim;

namespace {

Aabb unit_box() {
  Aabb b;
  b.min = {0.0f, 0.0f, 0.0f};
  b.max = {1.0f, 1.0f, 1.0f};
  return b;
}

Ray make_ray(Vec3 origin, Vec3 dir) {
  Ray r;
  r.origin = origin;
  r.dir = normalize(dir);
  return r;
}

Triangle unit_right_triangle() {
  return {{0.0f, 0.0f, 0.0f}, {1.0f, 0.0f, 0.0f}, {0.0f, 1.0f, 0.0f}, 0};
}

}  // namespace

TEST_CASE("slab test reports entry distance") {
  auto t = ray_box_test(make_ray({-1.0f, 0.5f, 0.5f}, {1.0f, 0.0f, 0.0f}), unit_box());
  REQUIRE(t.has_value());
  CHECK(*t == doctest::Approx(1.0));
}

TEST_CASE("slab test returns zero inside the box") {
  auto t = ray_box_test(make_ray({0.5f, 0.5f, 0.5f}, {1.0f, 0.0f, 0.0f}), unit_box());
  REQUIRE(t.has_value());
  CHECK(*t == 0.0f);
}

TEST_CASE("slab test handles zero direction components") {
  // parallel to the box face plane, outside the slab: miss without dividing
  CHECK_FALSE(ray_box_test(make_ray({5.0f, 0.0f, 0.0f}, {0.0f, 1.0f, 0.0f}), unit_box()));
  // parallel but inside the slab: hit
  CHECK(ray_box_test(make_ray({0.5f, -1.0f, 0.5f}, {0.0f, 1.0f, 0.0f}), unit_box()));
}

TEST_CASE("slab test respects t_max") {
  Ray r = make_ray({-5.0f, 0.5f, 0.5f}, {1.0f, 0.0f, 0.0f});
  r.t_max = 2.0f;  // entry would be at t = 5
  CHECK_FALSE(ray_box_test(r, unit_box()));
  r.t_max = 10.0f;
  CHECK(ray_box_test(r, unit_box()));
}

TEST_CASE("slab test misses behind the origin") {
  CHECK_FALSE(ray_box_test(make_ray({3.0f, 0.5f, 0.5f}, {1.0f, 0.0f, 0.0f}), unit_box()));
}

TEST_CASE("triangle test unit example") {
  auto t = ray_triangle_test(make_ray({0.25f, 0.25f, -1.0f}, {0.0f, 0.0f, 1.0f}),
                             unit_right_triangle());
  REQUIRE(t.has_value());
  CHECK(*t == doctest::Approx(1.0));
}

TEST_CASE("triangle test respects t_max") {
  Triangle tri = unit_right_triangle();
  tri.v0.z = tri.v1.z = tri.v2.z = 5.0f;
  Ray r = make_ray({0.25f, 0.25f, -1.0f}, {0.0f, 0.0f, 1.0f});
  r.t_max = 2.0f;
  CHECK_FALSE(ray_triangle_test(r, tri));
  r.t_max = 10.0f;
  CHECK(ray_triangle_test(r, tri));
}

TEST_CASE("in-plane rays and degenerate triangles never hit") {
  CHECK_FALSE(
      ray_triangle_test(make_ray({-1.0f, 0.1f, 0.0f}, {1.0f, 0.0f, 0.0f}), unit_right_triangle()));
  Triangle line{{0.0f, 0.0f, 0.0f}, {1.0f, 0.0f, 0.0f}, {2.0f, 0.0f, 0.0f}, 0};
  REQUIRE(line.degenerate());
  CHECK_FALSE(ray_triangle_test(make_ray({0.5f, 0.0f, -1.0f}, {0.0f, 0.0f, 1.0f}), line));
}

TEST_CASE("outside-edge rays miss") {
  CHECK_FALSE(ray_triangle_test(make_ray({0.9f, 0.9f, -1.0f}, {0.0f, 0.0f, 1.0f}),
                                unit_right_triangle()));
}

TEST_CASE("box entry never exceeds the triangle hit distance") {
  SplitMix64 rng(11);
  for (int iter = 0; iter < 500; ++iter) {
    Triangle tri;
    auto v = [&] {
      return Vec3{rng.next_float() * 4.0f - 2.0f, rng.next_float() * 4.0f - 2.0f,
                  rng.next_float() * 4.0f - 2.0f};
    };
    tri = {v(), v(), v(), 0};
    Ray r = make_ray(v() + Vec3{0.0f, 0.0f, 5.0f}, v() - Vec3{0.0f, 0.0f, 5.0f});
    auto thit = ray_triangle_test(r, tri);
    if (!thit) continue;
    Aabb box;
    box.grow(tri);
    auto tbox = ray_box_test(r, box);
    REQUIRE(tbox.has_value());
    CHECK(*tbox <= *thit + 1e-4f);
  }
}

TEST_CASE("brute force keeps the nearest hit and breaks ties by id") {
  Triangle near = unit_right_triangle();
  near.v0.z = near.v1.z = near.v2.z = 1.0f;
  near.id = 9;
  Triangle far = unit_right_triangle();
  far.v0.z = far.v1.z = far.v2.z = 2.0f;
  far.id = 1;
  Ray r = make_ray({0.25f, 0.25f, 0.0f}, {0.0f, 0.0f, 1.0f});

  HitRecord best = brute_force_closest(r, {far, near});
  REQUIRE(best.hit);
  CHECK(best.primitive_id == 9);
  CHECK(best.t == doctest::Approx(1.0));

  Triangle twin_a = near, twin_b = near;
  twin_a.id = 7;
  twin_b.id = 3;
  HitRecord tie = brute_force_closest(r, {twin_a, twin_b});
  REQUIRE(tie.hit);
  CHECK(tie.primitive_id == 3);

  CHECK_FALSE(brute_force_closest(r, {}).hit);
}

TEST_CASE("facing normal points against the ray") {
  Triangle tri = unit_right_triangle();
  Vec3 down = facing_normal(tri, {0.0f, 0.0f, 1.0f});
  CHECK(down.z < 0.0f);
  Vec3 up = facing_normal(tri, {0.0f, 0.0f, -1.0f});
  CHECK(up.z > 0.0f);
}

TEST_CASE("translation invariance") {
  SplitMix64 rng(23);
  Vec3 shift{13.5f, -7.25f, 3.0f};
  for (int iter = 0; iter < 200; ++iter) {
    auto v = [&] {
      return Vec3{rng.next_float() * 4.0f - 2.0f, rng.next_float() * 4.0f - 2.0f,
                  rng.next_float() * 4.0f - 2.0f};
    };
    Triangle tri{v(), v(), v(), 0};
    Ray r = make_ray(v() + Vec3{0.0f, 0.0f, 4.0f}, v());
    Triangle moved{tri.v0 + shift, tri.v1 + shift, tri.v2 + shift, 0};
    Ray moved_ray = r;
    moved_ray.origin = r.origin + shift;
    auto a = ray_triangle_test(r, tri);
    auto b = ray_triangle_test(moved_ray, moved);
    REQUIRE(a.has_value() == b.has_value());
    if (a) CHECK(*a == doctest::Approx(*b).epsilon(1e-5));
  }
}
