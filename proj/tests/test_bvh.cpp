#include <algorithm>
#include <cstdio>
#include <cstring>
#include <map>
#include <set>

#include "doctest.h"
#include "ttpsim/bvh.hpp"
#include "ttpsim/intersect.hpp"
#include "ttpsim/scene.hpp"

using namespace ttpsim;

namespace {

// Union of triangle boxes reachable from addr, computed by a plain recursive
// walk independent of the builder.
Aabb reachable_box(const FlatBvh& bvh, addr_t addr) {
  Aabb out;
  BvhNode node = node_at(bvh, addr);
  if (node.is_leaf()) {
    out.grow(node.tri);
    return out;
  }
  for (int i = 0; i < node.child_count; ++i) out.grow(reachable_box(bvh, node.children[i].addr));
  return out;
}

void collect_leaf_ids(const FlatBvh& bvh, addr_t addr, std::multiset<std::uint32_t>& ids) {
  BvhNode node = node_at(bvh, addr);
  if (node.is_leaf()) {
    ids.insert(node.tri.id);
    return;
  }
  for (int i = 0; i < node.child_count; ++i) collect_leaf_ids(bvh, node.children[i].addr, ids);
}

// Byte offset of the u64 child address slot for child i of the internal node
// at node_addr: 32B header, then 32B child records with the address at +24.
std::size_t child_addr_offset(const FlatBvh& bvh, addr_t node_addr, int i) {
  return static_cast<std::size_t>(node_addr - bvh.base_addr) + 32 +
         static_cast<std::size_t>(i) * 32 + 24;
}

void poke_u64(FlatBvh& bvh, std::size_t off, std::uint64_t v) {
  std::memcpy(bvh.image.data() + off, &v, 8);
}

bool report_mentions(const std::vector<std::string>& report, const std::string& needle) {
  return std::any_of(report.begin(), report.end(), [&](const std::string& line) {
    return line.find(needle) != std::string::npos;
  });
}

}  // namespace

TEST_CASE("single triangle builds a leaf root") {
  Triangle tri{{0.0f, 0.0f, 0.0f}, {1.0f, 0.0f, 0.0f}, {0.0f, 1.0f, 0.0f}, 42};
  FlatBvh bvh = build_bvh({tri});
  CHECK(bvh.leaf_count == 1);
  CHECK(bvh.internal_count == 0);
  BvhNode root = node_at(bvh, bvh.root_addr);
  CHECK(root.is_leaf());
  CHECK(root.tri.id == 42);
  Aabb tri_box;
  tri_box.grow(tri);
  CHECK(bvh.root_box.min == tri_box.min);
  CHECK(bvh.root_box.max == tri_box.max);
  CHECK(validate(bvh).empty());
}

TEST_CASE("empty scene is rejected") {
  CHECK_THROWS_AS(build_bvh({}), ConfigError);
}

TEST_CASE("seven triangles fan out under an internal root") {
  auto tris = generate_synthetic(SyntheticKind::grid, 7, 0);
  FlatBvh bvh = build_bvh(tris);
  BvhNode root = node_at(bvh, bvh.root_addr);
  REQUIRE_FALSE(root.is_leaf());
  CHECK(root.child_count >= 2);
  Aabb covered;
  for (int i = 0; i < root.child_count; ++i) covered.grow(root.children[i].box);
  for (const Triangle& t : tris) {
    Aabb b;
    b.grow(t);
    CHECK(covered.contains(b));
  }
  CHECK(validate(bvh).empty());
}

TEST_CASE("leaves hold every input triangle exactly once") {
  for (std::uint32_t count : {1u, 2u, 13u, 100u}) {
    auto tris = generate_synthetic(SyntheticKind::random_boxes, count, 5);
    FlatBvh bvh = build_bvh(tris);
    std::multiset<std::uint32_t> want, got;
    for (const Triangle& t : tris) want.insert(t.id);
    collect_leaf_ids(bvh, bvh.root_addr, got);
    CHECK(want == got);
    CHECK(bvh.leaf_count == tris.size());
  }
}

TEST_CASE("image size grows with scene size") {
  std::size_t s10 = build_bvh(generate_synthetic(SyntheticKind::grid, 10, 0)).byte_size();
  std::size_t s100 = build_bvh(generate_synthetic(SyntheticKind::grid, 100, 0)).byte_size();
  std::size_t s1000 = build_bvh(generate_synthetic(SyntheticKind::grid, 1000, 0)).byte_size();
  CHECK(s10 < s100);
  CHECK(s100 < s1000);
}

TEST_CASE("builds are byte-identical for identical input") {
  auto tris = generate_synthetic(SyntheticKind::random_boxes, 60, 9);
  FlatBvh a = build_bvh(tris);
  FlatBvh b = build_bvh(tris);
  CHECK(a.image == b.image);
  CHECK(a.root_addr == b.root_addr);
  CHECK(a.node_addrs == b.node_addrs);
}

TEST_CASE("containment holds for every internal node") {
  auto tris = generate_synthetic(SyntheticKind::deep_branch, 120, 3);
  FlatBvh bvh = build_bvh(tris);
  for (addr_t addr : bvh.node_addrs) {
    BvhNode node = node_at(bvh, addr);
    if (node.is_leaf()) continue;
    for (int i = 0; i < node.child_count; ++i)
      CHECK(node.children[i].box.contains(reachable_box(bvh, node.children[i].addr)));
  }
}

TEST_CASE("node_at decodes nodes and rejects bad addresses") {
  auto tris = generate_synthetic(SyntheticKind::grid, 20, 0);
  FlatBvh bvh = build_bvh(tris);
  BvhNode root = node_at(bvh, bvh.root_addr);
  REQUIRE_FALSE(root.is_leaf());
  BvhNode child = node_at(bvh, root.children[0].addr);
  CHECK((child.kind == kNodeKindInternal || child.kind == kNodeKindLeaf));

  CHECK_THROWS_WITH_AS(node_at(bvh, bvh.root_addr + 1),
                       doctest::Contains("unaligned node address"), SimulationError);
  CHECK_THROWS_AS(node_at(bvh, bvh.end_addr()), SimulationError);
  // 32-byte aligned but one chunk into the 224-byte root record
  CHECK_THROWS_WITH_AS(node_at(bvh, bvh.root_addr + kChunkSize),
                       doctest::Contains("does not start a node"), SimulationError);
}

TEST_CASE("footprints cover nodes chunk by chunk and never overlap") {
  auto tris = generate_synthetic(SyntheticKind::random_boxes, 40, 1);
  FlatBvh bvh = build_bvh(tris);
  std::set<addr_t> seen;
  for (addr_t addr : bvh.node_addrs) {
    BvhNode node = node_at(bvh, addr);
    auto fp = node_footprint(node);
    if (node.is_leaf()) {
      REQUIRE(fp.size() == 2);
      CHECK(fp[0] == addr);
      CHECK(fp[1] == addr + 32);
    } else {
      REQUIRE(fp.size() == 7);
      for (std::size_t i = 0; i < 7; ++i) CHECK(fp[i] == addr + 32 * i);
    }
    CHECK(footprint_for(bvh, addr) == fp);
    for (addr_t chunk : fp) {
      CHECK(seen.insert(chunk).second);  // disjointness
      CHECK(chunk % kChunkSize == 0);
    }
  }
}

TEST_CASE("validate flags injected corruption") {
  auto tris = generate_synthetic(SyntheticKind::grid, 30, 0);
  FlatBvh clean = build_bvh(tris);
  REQUIRE(validate(clean).empty());
  REQUIRE_FALSE(node_at(clean, clean.root_addr).is_leaf());

  SUBCASE("unaligned child address") {
    FlatBvh bad = clean;
    poke_u64(bad, child_addr_offset(bad, bad.root_addr, 0), bad.root_addr + 1);
    CHECK(report_mentions(validate(bad), "unaligned child address"));
  }
  SUBCASE("cycle back to the root") {
    FlatBvh bad = clean;
    poke_u64(bad, child_addr_offset(bad, bad.root_addr, 0), bad.root_addr);
    CHECK(report_mentions(validate(bad), "cycle detected"));
  }
  SUBCASE("child address outside the image") {
    FlatBvh bad = clean;
    poke_u64(bad, child_addr_offset(bad, bad.root_addr, 0), bad.end_addr() + kNodeAlign);
    CHECK(report_mentions(validate(bad), "child address outside image"));
  }
  SUBCASE("shrunken child box") {
    FlatBvh bad = clean;
    // zero out the child box extents: min = max = 0
    std::size_t rec = child_addr_offset(bad, bad.root_addr, 0) - 24;
    for (std::size_t k = 0; k < 24; ++k) bad.image[rec + k] = 0;
    CHECK(report_mentions(validate(bad), "containment violation"));
  }
}

TEST_CASE("encoder lays nodes out in add order and patches forward links") {
  FlatBvhEncoder enc(0x2000);
  Triangle t0{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, 7};
  Triangle t1{{2, 0, 0}, {3, 0, 0}, {2, 1, 0}, 8};
  Aabb b0, b1;
  b0.grow(t0);
  b1.grow(t1);
  // root added first, children referenced by indices that do not exist yet
  int root = enc.add_internal({{b0, 1}, {b1, 2}});
  int leaf0 = enc.add_leaf(t0);
  int leaf1 = enc.add_leaf(t1);
  CHECK(root == 0);
  CHECK(leaf0 == 1);
  CHECK(leaf1 == 2);
  FlatBvh bvh = enc.finish(root);
  CHECK(bvh.base_addr == 0x2000);
  CHECK(bvh.root_addr == 0x2000);
  REQUIRE(bvh.node_addrs.size() == 3);
  CHECK(bvh.node_addrs[0] == 0x2000);
  CHECK(bvh.node_addrs[1] == 0x2000 + kInternalNodeSize);
  CHECK(bvh.node_addrs[2] == 0x2000 + kInternalNodeSize + kLeafNodeSize);
  BvhNode r = node_at(bvh, bvh.root_addr);
  REQUIRE(r.child_count == 2);
  CHECK(r.children[0].addr == bvh.node_addrs[1]);
  CHECK(r.children[1].addr == bvh.node_addrs[2]);
  CHECK(node_at(bvh, r.children[0].addr).tri.id == 7);
  CHECK(node_at(bvh, r.children[1].addr).tri.id == 8);
  CHECK(validate(bvh).empty());
}

TEST_CASE("encoder rejects bad arity and bad root") {
  FlatBvhEncoder enc;
  CHECK_THROWS_AS(enc.add_internal({}), SimulationError);
  FlatBvhEncoder enc2;
  enc2.add_leaf({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, 0});
  CHECK_THROWS_AS(enc2.finish(5), SimulationError);
}

TEST_CASE("depth cap aborts the build") {
  auto tris = generate_synthetic(SyntheticKind::deep_branch, 600, 2);
  BuildConfig cfg;
  cfg.max_leaf_depth = 3;
  CHECK_THROWS_WITH_AS(build_bvh(tris, cfg), doctest::Contains("max leaf depth"),
                       SimulationError);
  // a generous cap succeeds on the same scene
  FlatBvh bvh = build_bvh(tris);
  CHECK(validate(bvh).empty());
}

TEST_CASE("dump and load round-trip byte for byte") {
  auto tris = generate_synthetic(SyntheticKind::random_boxes, 25, 4);
  FlatBvh bvh = build_bvh(tris);
  std::string path = "bvh_roundtrip.bin";
  save_flat_bvh(bvh, path);
  FlatBvh loaded = load_flat_bvh(path);
  std::remove(path.c_str());
  CHECK(loaded.image == bvh.image);
  CHECK(loaded.base_addr == bvh.base_addr);
  CHECK(loaded.root_addr == bvh.root_addr);
  CHECK(loaded.node_addrs == bvh.node_addrs);
  CHECK(loaded.leaf_count == bvh.leaf_count);
  CHECK(loaded.internal_count == bvh.internal_count);
  CHECK(validate(loaded).empty());
}

TEST_CASE("load rejects a missing file") {
  CHECK_THROWS_AS(load_flat_bvh("no_such_file.bin"), ConfigError);
}
