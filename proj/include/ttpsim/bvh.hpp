#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ttpsim/types.hpp"

namespace ttpsim {

// Node image geometry. Internal nodes: 32-byte header plus six 32-byte child
// records (24-byte box + 8-byte address). Leaves: one triangle in 64 bytes.
// Every node starts on a 32-byte boundary, so footprints decompose into
// whole 32-byte chunks.
inline constexpr std::uint32_t kNodeKindInternal = 0;
inline constexpr std::uint32_t kNodeKindLeaf = 1;
inline constexpr std::size_t kInternalNodeSize = 224;
inline constexpr std::size_t kLeafNodeSize = 64;
inline constexpr std::size_t kNodeAlign = 32;
inline constexpr std::size_t kChunkSize = 32;
inline constexpr int kMaxChildren = 6;
inline constexpr addr_t kDefaultBaseAddr = 0x10000000ULL;

struct ChildRef {
  Aabb box;
  addr_t addr = 0;
};

struct BvhNode {
  std::uint32_t kind = kNodeKindLeaf;
  addr_t addr = 0;
  int child_count = 0;
  ChildRef children[kMaxChildren];
  Triangle tri;  // leaf payload

  bool is_leaf() const { return kind == kNodeKindLeaf; }
  std::size_t byte_size() const { return is_leaf() ? kLeafNodeSize : kInternalNodeSize; }
};

struct FlatBvh {
  std::vector<std::uint8_t> image;
  addr_t base_addr = kDefaultBaseAddr;
  addr_t root_addr = 0;
  Aabb root_box;
  std::vector<addr_t> node_addrs;  // every node start, ascending
  std::size_t leaf_count = 0;
  std::size_t internal_count = 0;

  std::size_t byte_size() const { return image.size(); }
  addr_t end_addr() const { return base_addr + image.size(); }
  bool contains_addr(addr_t addr) const { return addr >= base_addr && addr < end_addr(); }
};

struct BuildConfig {
  addr_t base_addr = kDefaultBaseAddr;
  int max_leaf_depth = 32;
};

// Deterministic top-down build: up to two collapsed levels of count-median
// splits along the longest centroid axis per node. Errors on an empty scene
// or if the depth cap is exceeded.
FlatBvh build_bvh(const std::vector<Triangle>& tris, const BuildConfig& cfg = {});

// Decode the node starting at addr. Unaligned or out-of-image addresses and
// addresses that do not start a node are errors.
BvhNode node_at(const FlatBvh& bvh, addr_t addr);

// 32-byte chunk addresses covering a node: 7 for internal, 2 for leaf.
std::vector<addr_t> node_footprint(const BvhNode& node);
std::vector<addr_t> footprint_for(const FlatBvh& bvh, addr_t node_addr);

// Structural audit: alignment, bounds, arity, acyclicity, child-box
// containment, exactly one primitive per leaf. Returns human-readable
// problem strings; empty means clean.
std::vector<std::string> validate(const FlatBvh& bvh);

// Direct encoder for handcrafted trees (tests, goldens) and the builder.
// Nodes are laid out in the order they are added; finish() resolves child
// links recorded by index.
class FlatBvhEncoder {
 public:
  explicit FlatBvhEncoder(addr_t base_addr = kDefaultBaseAddr) { bvh_.base_addr = base_addr; }

  // Returns the node index. Children are referenced by index and patched at
  // finish time.
  int add_internal(const std::vector<std::pair<Aabb, int>>& children);
  int add_leaf(const Triangle& tri);

  FlatBvh finish(int root_index);

 private:
  struct PendingChild {
    std::size_t offset;  // of the child record inside the image
    int node_index;
  };
  FlatBvh bvh_;
  std::vector<addr_t> index_addr_;
  std::vector<PendingChild> links_;
};

// Flat-image container format: magic, version, base and root addresses,
// payload bytes.
void save_flat_bvh(const FlatBvh& bvh, const std::string& path);
FlatBvh load_flat_bvh(const std::string& path);

}  // namespace ttpsim
