#include "ttpsim/bvh.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <numeric>
#include <unordered_set>

namespace ttpsim {

namespace {

void put_u32(std::vector<std::uint8_t>& img, std::size_t off, std::uint32_t v) {
  std::memcpy(img.data() + off, &v, 4);
}

void put_u64(std::vector<std::uint8_t>& img, std::size_t off, std::uint64_t v) {
  std::memcpy(img.data() + off, &v, 8);
}

void put_f32(std::vector<std::uint8_t>& img, std::size_t off, float v) {
  std::memcpy(img.data() + off, &v, 4);
}

std::uint32_t get_u32(const std::vector<std::uint8_t>& img, std::size_t off) {
  std::uint32_t v;
  std::memcpy(&v, img.data() + off, 4);
  return v;
}

std::uint64_t get_u64(const std::vector<std::uint8_t>& img, std::size_t off) {
  std::uint64_t v;
  std::memcpy(&v, img.data() + off, 8);
  return v;
}

float get_f32(const std::vector<std::uint8_t>& img, std::size_t off) {
  float v;
  std::memcpy(&v, img.data() + off, 4);
  return v;
}

Aabb triangle_box(const Triangle& t) {
  Aabb b;
  b.grow(t);
  return b;
}

}  // namespace

int FlatBvhEncoder::add_internal(const std::vector<std::pair<Aabb, int>>& children) {
  if (children.empty() || children.size() > static_cast<std::size_t>(kMaxChildren))
    throw SimulationError("internal node needs 1 to 6 children");
  std::size_t off = bvh_.image.size();
  bvh_.image.resize(off + kInternalNodeSize, 0);
  put_u32(bvh_.image, off, kNodeKindInternal);
  put_u32(bvh_.image, off + 4, static_cast<std::uint32_t>(children.size()));
  for (std::size_t i = 0; i < children.size(); ++i) {
    std::size_t coff = off + 32 + i * 32;
    const Aabb& box = children[i].first;
    put_f32(bvh_.image, coff + 0, box.min.x);
    put_f32(bvh_.image, coff + 4, box.min.y);
    put_f32(bvh_.image, coff + 8, box.min.z);
    put_f32(bvh_.image, coff + 12, box.max.x);
    put_f32(bvh_.image, coff + 16, box.max.y);
    put_f32(bvh_.image, coff + 20, box.max.z);
    links_.push_back({coff + 24, children[i].second});
  }
  int index = static_cast<int>(index_addr_.size());
  index_addr_.push_back(bvh_.base_addr + off);
  bvh_.node_addrs.push_back(bvh_.base_addr + off);
  ++bvh_.internal_count;
  return index;
}

int FlatBvhEncoder::add_leaf(const Triangle& tri) {
  std::size_t off = bvh_.image.size();
  bvh_.image.resize(off + kLeafNodeSize, 0);
  put_u32(bvh_.image, off, kNodeKindLeaf);
  put_u32(bvh_.image, off + 4, tri.id);
  put_f32(bvh_.image, off + 8, tri.v0.x);
  put_f32(bvh_.image, off + 12, tri.v0.y);
  put_f32(bvh_.image, off + 16, tri.v0.z);
  put_f32(bvh_.image, off + 20, tri.v1.x);
  put_f32(bvh_.image, off + 24, tri.v1.y);
  put_f32(bvh_.image, off + 28, tri.v1.z);
  put_f32(bvh_.image, off + 32, tri.v2.x);
  put_f32(bvh_.image, off + 36, tri.v2.y);
  put_f32(bvh_.image, off + 40, tri.v2.z);
  int index = static_cast<int>(index_addr_.size());
  index_addr_.push_back(bvh_.base_addr + off);
  bvh_.node_addrs.push_back(bvh_.base_addr + off);
  ++bvh_.leaf_count;
  return index;
}

FlatBvh FlatBvhEncoder::finish(int root_index) {
  if (root_index < 0 || root_index >= static_cast<int>(index_addr_.size()))
    throw SimulationError("root index out of range");
  for (const PendingChild& link : links_) {
    if (link.node_index < 0 || link.node_index >= static_cast<int>(index_addr_.size()))
      throw SimulationError("child index out of range");
    put_u64(bvh_.image, link.offset, index_addr_[static_cast<std::size_t>(link.node_index)]);
  }
  bvh_.root_addr = index_addr_[static_cast<std::size_t>(root_index)];
  FlatBvh out = std::move(bvh_);
  BvhNode root = node_at(out, out.root_addr);
  if (root.is_leaf()) {
    out.root_box = triangle_box(root.tri);
  } else {
    Aabb box;
    for (int i = 0; i < root.child_count; ++i) box.grow(root.children[i].box);
    out.root_box = box;
  }
  std::sort(out.node_addrs.begin(), out.node_addrs.end());
  return out;
}

namespace {

std::string hex_addr(addr_t addr) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "0x%llx", static_cast<unsigned long long>(addr));
  return buf;
}

}  // namespace

BvhNode node_at(const FlatBvh& bvh, addr_t addr) {
  if (addr % kNodeAlign != 0)
    throw SimulationError("unaligned node address " + hex_addr(addr));
  if (!bvh.contains_addr(addr)) throw SimulationError("node address outside image");
  if (!std::binary_search(bvh.node_addrs.begin(), bvh.node_addrs.end(), addr))
    throw SimulationError("address does not start a node");
  std::size_t off = addr - bvh.base_addr;
  BvhNode node;
  node.addr = addr;
  node.kind = get_u32(bvh.image, off);
  if (node.kind == kNodeKindLeaf) {
    if (off + kLeafNodeSize > bvh.image.size()) throw SimulationError("truncated leaf node");
    node.tri.id = get_u32(bvh.image, off + 4);
    node.tri.v0 = {get_f32(bvh.image, off + 8), get_f32(bvh.image, off + 12),
                   get_f32(bvh.image, off + 16)};
    node.tri.v1 = {get_f32(bvh.image, off + 20), get_f32(bvh.image, off + 24),
                   get_f32(bvh.image, off + 28)};
    node.tri.v2 = {get_f32(bvh.image, off + 32), get_f32(bvh.image, off + 36),
                   get_f32(bvh.image, off + 40)};
  } else if (node.kind == kNodeKindInternal) {
    if (off + kInternalNodeSize > bvh.image.size())
      throw SimulationError("truncated internal node");
    node.child_count = static_cast<int>(get_u32(bvh.image, off + 4));
    if (node.child_count < 1 || node.child_count > kMaxChildren)
      throw SimulationError("internal node child count out of range");
    for (int i = 0; i < node.child_count; ++i) {
      std::size_t coff = off + 32 + static_cast<std::size_t>(i) * 32;
      Aabb box;
      box.min = {get_f32(bvh.image, coff + 0), get_f32(bvh.image, coff + 4),
                 get_f32(bvh.image, coff + 8)};
      box.max = {get_f32(bvh.image, coff + 12), get_f32(bvh.image, coff + 16),
                 get_f32(bvh.image, coff + 20)};
      node.children[i].box = box;
      node.children[i].addr = get_u64(bvh.image, coff + 24);
    }
  } else {
    throw SimulationError("unknown node kind");
  }
  return node;
}

std::vector<addr_t> node_footprint(const BvhNode& node) {
  std::vector<addr_t> chunks;
  std::size_t n = node.byte_size() / kChunkSize;
  chunks.reserve(n);
  for (std::size_t i = 0; i < n; ++i) chunks.push_back(node.addr + i * kChunkSize);
  return chunks;
}

std::vector<addr_t> footprint_for(const FlatBvh& bvh, addr_t node_addr) {
  std::size_t off = node_addr - bvh.base_addr;
  std::uint32_t kind = get_u32(bvh.image, off);
  std::size_t bytes = kind == kNodeKindLeaf ? kLeafNodeSize : kInternalNodeSize;
  std::vector<addr_t> chunks;
  chunks.reserve(bytes / kChunkSize);
  for (std::size_t i = 0; i < bytes; i += kChunkSize) chunks.push_back(node_addr + i);
  return chunks;
}

namespace {

struct BuildItem {
  std::uint32_t first;  // index range into the ordered triangle list
  std::uint32_t count;
};

// Count-median split along the longest centroid axis; ties broken by
// primitive id so the ordering is total and platform independent.
void median_split(std::vector<std::uint32_t>& order, const std::vector<Triangle>& tris,
                  BuildItem item, BuildItem& left, BuildItem& right) {
  Aabb cbox;
  for (std::uint32_t i = 0; i < item.count; ++i)
    cbox.grow(tris[order[item.first + i]].centroid());
  int axis = cbox.longest_axis();
  auto begin = order.begin() + item.first;
  auto end = begin + item.count;
  std::uint32_t half = item.count / 2;
  std::nth_element(begin, begin + half, end, [&](std::uint32_t a, std::uint32_t b) {
    float ca = tris[a].centroid()[axis];
    float cb = tris[b].centroid()[axis];
    if (ca != cb) return ca < cb;
    return tris[a].id < tris[b].id;
  });
  // nth_element leaves both sides unordered; sort them for a canonical layout
  std::sort(begin, begin + half, [&](std::uint32_t a, std::uint32_t b) {
    float ca = tris[a].centroid()[axis];
    float cb = tris[b].centroid()[axis];
    if (ca != cb) return ca < cb;
    return tris[a].id < tris[b].id;
  });
  std::sort(begin + half, end, [&](std::uint32_t a, std::uint32_t b) {
    float ca = tris[a].centroid()[axis];
    float cb = tris[b].centroid()[axis];
    if (ca != cb) return ca < cb;
    return tris[a].id < tris[b].id;
  });
  left = {item.first, half};
  right = {item.first + half, item.count - half};
}

int build_node(FlatBvhEncoder& enc, std::vector<std::uint32_t>& order,
               const std::vector<Triangle>& tris, BuildItem item, int depth, int max_depth,
               Aabb* out_box) {
  if (depth > max_depth) throw SimulationError("bvh build exceeded max leaf depth");
  if (item.count == 1) {
    const Triangle& tri = tris[order[item.first]];
    Aabb box;
    box.grow(tri);
    *out_box = box;
    return enc.add_leaf(tri);
  }
  // Two collapsed levels of binary median splits: 2 to 4 children.
  BuildItem l, r;
  median_split(order, tris, item, l, r);
  std::vector<BuildItem> groups;
  for (BuildItem half : {l, r}) {
    if (half.count > 1) {
      BuildItem a, b;
      median_split(order, tris, half, a, b);
      groups.push_back(a);
      groups.push_back(b);
    } else {
      groups.push_back(half);
    }
  }
  std::vector<std::pair<Aabb, int>> children;
  children.reserve(groups.size());
  for (BuildItem g : groups) {
    Aabb box;
    int idx = build_node(enc, order, tris, g, depth + 1, max_depth, &box);
    children.push_back({box, idx});
  }
  Aabb self;
  for (const auto& c : children) self.grow(c.first);
  *out_box = self;
  return enc.add_internal(children);
}

}  // namespace

FlatBvh build_bvh(const std::vector<Triangle>& tris, const BuildConfig& cfg) {
  if (tris.empty()) throw ConfigError("cannot build a hierarchy over an empty scene");
  std::vector<std::uint32_t> order(tris.size());
  std::iota(order.begin(), order.end(), 0u);
  FlatBvhEncoder enc(cfg.base_addr);
  Aabb root_box;
  int root = build_node(enc, order, tris, {0, static_cast<std::uint32_t>(tris.size())}, 0,
                        cfg.max_leaf_depth, &root_box);
  return enc.finish(root);
}

namespace {

void format_addr(std::string& out, addr_t addr) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "0x%llx", static_cast<unsigned long long>(addr));
  out += buf;
}

}  // namespace

std::vector<std::string> validate(const FlatBvh& bvh) {
  std::vector<std::string> problems;
  auto report = [&](std::string msg, addr_t addr) {
    msg += " at ";
    format_addr(msg, addr);
    problems.push_back(std::move(msg));
  };

  if (bvh.image.empty()) {
    problems.push_back("empty node image");
    return problems;
  }

  // Walk from the root; on-path set catches cycles.
  std::unordered_set<addr_t> on_path;
  std::unordered_set<addr_t> visited;
  std::vector<std::string>& out = problems;
  std::function<Aabb(addr_t, int)> walk = [&](addr_t addr, int depth) -> Aabb {
    Aabb reach;  // union of primitive boxes reachable from here
    if (depth > 512) {
      report("depth runaway", addr);
      return reach;
    }
    if (addr % kNodeAlign != 0) {
      report("unaligned child address", addr);
      return reach;
    }
    if (!bvh.contains_addr(addr)) {
      report("child address outside image", addr);
      return reach;
    }
    if (on_path.count(addr)) {
      report("cycle detected", addr);
      return reach;
    }
    BvhNode node;
    try {
      node = node_at(bvh, addr);
    } catch (const SimulationError& e) {
      out.push_back(std::string(e.what()));
      return reach;
    }
    on_path.insert(addr);
    visited.insert(addr);
    if (node.is_leaf()) {
      reach.grow(node.tri);
    } else {
      if (node.child_count < 1 || node.child_count > kMaxChildren)
        report("child count out of range", addr);
      for (int i = 0; i < node.child_count; ++i) {
        Aabb child_reach = walk(node.children[i].addr, depth + 1);
        if (!node.children[i].box.contains(child_reach))
          report("containment violation", node.children[i].addr);
        reach.grow(node.children[i].box);
      }
    }
    on_path.erase(addr);
    return reach;
  };
  walk(bvh.root_addr, 0);
  (void)visited;
  return problems;
}

void save_flat_bvh(const FlatBvh& bvh, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open file for writing: " + path);
  const char magic[8] = {'T', 'T', 'P', 'B', 'V', 'H', '0', '\0'};
  out.write(magic, 8);
  std::uint32_t version = 1;
  out.write(reinterpret_cast<const char*>(&version), 4);
  std::uint32_t pad = 0;
  out.write(reinterpret_cast<const char*>(&pad), 4);
  std::uint64_t base = bvh.base_addr, root = bvh.root_addr, size = bvh.image.size();
  out.write(reinterpret_cast<const char*>(&base), 8);
  out.write(reinterpret_cast<const char*>(&root), 8);
  out.write(reinterpret_cast<const char*>(&size), 8);
  out.write(reinterpret_cast<const char*>(bvh.image.data()),
            static_cast<std::streamsize>(bvh.image.size()));
  if (!out) throw ConfigError("short write: " + path);
}

namespace {

// Rebuild node_addrs, counts and the root box by walking the image.
void index_image(FlatBvh& bvh) {
  std::unordered_set<addr_t> seen;
  std::vector<addr_t> work{bvh.root_addr};
  bvh.node_addrs.clear();
  bvh.leaf_count = bvh.internal_count = 0;
  while (!work.empty()) {
    addr_t addr = work.back();
    work.pop_back();
    if (seen.count(addr)) continue;
    seen.insert(addr);
    bvh.node_addrs.push_back(addr);
    std::size_t off = addr - bvh.base_addr;
    if (off + 4 > bvh.image.size()) throw SimulationError("truncated node image");
    std::uint32_t kind = get_u32(bvh.image, off);
    if (kind == kNodeKindLeaf) {
      ++bvh.leaf_count;
    } else if (kind == kNodeKindInternal) {
      ++bvh.internal_count;
      std::uint32_t n = get_u32(bvh.image, off + 4);
      if (n < 1 || n > static_cast<std::uint32_t>(kMaxChildren))
        throw SimulationError("corrupt child count during load");
      for (std::uint32_t i = 0; i < n; ++i)
        work.push_back(get_u64(bvh.image, off + 32 + i * 32 + 24));
    } else {
      throw SimulationError("unknown node kind during load");
    }
  }
  std::sort(bvh.node_addrs.begin(), bvh.node_addrs.end());
  BvhNode root = node_at(bvh, bvh.root_addr);
  if (root.is_leaf()) {
    Aabb box;
    box.grow(root.tri);
    bvh.root_box = box;
  } else {
    Aabb box;
    for (int i = 0; i < root.child_count; ++i) box.grow(root.children[i].box);
    bvh.root_box = box;
  }
}

}  // namespace

FlatBvh load_flat_bvh(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open file: " + path);
  char magic[8];
  in.read(magic, 8);
  const char expect[8] = {'T', 'T', 'P', 'B', 'V', 'H', '0', '\0'};
  if (!in || std::memcmp(magic, expect, 8) != 0) throw ConfigError("bad magic in " + path);
  std::uint32_t version = 0, pad = 0;
  in.read(reinterpret_cast<char*>(&version), 4);
  in.read(reinterpret_cast<char*>(&pad), 4);
  if (!in || version != 1) throw ConfigError("unsupported version in " + path);
  std::uint64_t base = 0, root = 0, size = 0;
  in.read(reinterpret_cast<char*>(&base), 8);
  in.read(reinterpret_cast<char*>(&root), 8);
  in.read(reinterpret_cast<char*>(&size), 8);
  if (!in) throw ConfigError("truncated header in " + path);
  FlatBvh bvh;
  bvh.base_addr = base;
  bvh.root_addr = root;
  bvh.image.resize(size);
  in.read(reinterpret_cast<char*>(bvh.image.data()), static_cast<std::streamsize>(size));
  if (!in) throw ConfigError("truncated payload in " + path);
  index_image(bvh);
  return bvh;
}

}  // namespace ttpsim
