#include "ttpsim/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "ttpsim/intersect.hpp"

namespace ttpsim {

namespace {

constexpr float kPi = 3.14159265358979323846f;

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream is(line);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

[[noreturn]] void obj_error(const std::string& name, int line_no, const std::string& msg) {
  throw ConfigError(name + ":" + std::to_string(line_no) + ": " + msg);
}

float parse_real(const std::string& tok, const std::string& name, int line_no) {
  try {
    size_t pos = 0;
    float v = std::stof(tok, &pos);
    if (pos != tok.size()) obj_error(name, line_no, "malformed number '" + tok + "'");
    return v;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    obj_error(name, line_no, "malformed number '" + tok + "'");
  }
}

// OBJ face tokens may carry /vt/vn suffixes; only the vertex index matters.
long parse_face_index(const std::string& tok, const std::string& name, int line_no) {
  std::string head = tok.substr(0, tok.find('/'));
  try {
    size_t pos = 0;
    long v = std::stol(head, &pos);
    if (pos != head.size() || v == 0) obj_error(name, line_no, "malformed face index '" + tok + "'");
    return v;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    obj_error(name, line_no, "malformed face index '" + tok + "'");
  }
}

}  // namespace

std::vector<Triangle> load_obj_text(const std::string& text, const std::string& name) {
  std::vector<Vec3> verts;
  std::vector<Triangle> tris;
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto toks = split_ws(line);
    if (toks.empty() || toks[0][0] == '#') continue;
    if (toks[0] == "v") {
      if (toks.size() < 4) obj_error(name, line_no, "vertex needs three coordinates");
      verts.push_back({parse_real(toks[1], name, line_no), parse_real(toks[2], name, line_no),
                       parse_real(toks[3], name, line_no)});
    } else if (toks[0] == "f") {
      if (toks.size() > 4) obj_error(name, line_no, "non-triangular face");
      if (toks.size() < 4) obj_error(name, line_no, "face needs three indices");
      Vec3 v[3];
      for (int i = 0; i < 3; ++i) {
        long idx = parse_face_index(toks[1 + i], name, line_no);
        if (idx < 0) idx = static_cast<long>(verts.size()) + idx + 1;
        if (idx < 1 || idx > static_cast<long>(verts.size()))
          obj_error(name, line_no, "face index out of range");
        v[i] = verts[static_cast<size_t>(idx - 1)];
      }
      Triangle tri{v[0], v[1], v[2], static_cast<std::uint32_t>(tris.size())};
      tris.push_back(tri);
    }
    // other record types (vn, vt, o, g, usemtl, ...) are ignored
  }
  return tris;
}

std::vector<Triangle> load_obj(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open obj file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_obj_text(buf.str(), path);
}

namespace {

std::vector<Triangle> generate_grid(std::uint32_t count) {
  std::vector<Triangle> tris;
  if (count == 0) return tris;
  std::uint32_t cells = (count + 1) / 2;
  std::uint32_t cols = static_cast<std::uint32_t>(std::ceil(std::sqrt(static_cast<double>(cells))));
  for (std::uint32_t cell = 0; cell < cells && tris.size() < count; ++cell) {
    float x = static_cast<float>(cell % cols);
    float y = static_cast<float>(cell / cols);
    Vec3 a{x, y, 0.0f}, b{x + 1.0f, y, 0.0f}, c{x + 1.0f, y + 1.0f, 0.0f}, d{x, y + 1.0f, 0.0f};
    tris.push_back({a, b, c, static_cast<std::uint32_t>(tris.size())});
    if (tris.size() < count) tris.push_back({a, c, d, static_cast<std::uint32_t>(tris.size())});
  }
  return tris;
}

void push_quad(std::vector<Triangle>& tris, const Vec3& a, const Vec3& b, const Vec3& c,
               const Vec3& d, std::uint32_t limit) {
  if (tris.size() < limit) tris.push_back({a, b, c, static_cast<std::uint32_t>(tris.size())});
  if (tris.size() < limit) tris.push_back({a, c, d, static_cast<std::uint32_t>(tris.size())});
}

void push_box(std::vector<Triangle>& tris, const Vec3& lo, const Vec3& hi, std::uint32_t limit) {
  Vec3 p000{lo.x, lo.y, lo.z}, p100{hi.x, lo.y, lo.z}, p010{lo.x, hi.y, lo.z},
      p110{hi.x, hi.y, lo.z};
  Vec3 p001{lo.x, lo.y, hi.z}, p101{hi.x, lo.y, hi.z}, p011{lo.x, hi.y, hi.z},
      p111{hi.x, hi.y, hi.z};
  push_quad(tris, p000, p100, p110, p010, limit);  // z = lo
  push_quad(tris, p001, p101, p111, p011, limit);  // z = hi
  push_quad(tris, p000, p100, p101, p001, limit);  // y = lo
  push_quad(tris, p010, p110, p111, p011, limit);  // y = hi
  push_quad(tris, p000, p010, p011, p001, limit);  // x = lo
  push_quad(tris, p100, p110, p111, p101, limit);  // x = hi
}

std::vector<Triangle> generate_random_boxes(std::uint32_t count, std::uint64_t seed) {
  std::vector<Triangle> tris;
  SplitMix64 rng(seed * 0x9e3779b97f4a7c15ULL + 0x632be59bd9b4e019ULL);
  while (tris.size() < count) {
    Vec3 center{rng.next_float() * 20.0f - 10.0f, rng.next_float() * 20.0f - 10.0f,
                rng.next_float() * 20.0f - 10.0f};
    float half = 0.2f + rng.next_float() * 1.3f;
    Vec3 lo = center - Vec3{half, half, half};
    Vec3 hi = center + Vec3{half, half, half};
    push_box(tris, lo, hi, count);
  }
  return tris;
}

// Clusters laid along a diagonal with geometrically shrinking spacing and
// size. Count-median splits keep peeling the dense tail off, so the tree
// grows one long branch and traversal produces extended runs of pops.
std::vector<Triangle> generate_deep_branch(std::uint32_t count, std::uint64_t seed) {
  std::vector<Triangle> tris;
  SplitMix64 rng(seed * 0x9e3779b97f4a7c15ULL + 0x2545f4914f6cdd1dULL);
  const float total = 100.0f;
  const float ratio = 0.82f;
  float offset = 0.0f;
  float step = total * (1.0f - ratio);
  std::uint32_t i = 0;
  while (tris.size() < count) {
    float scale = 0.05f + 0.45f * step / total;
    Vec3 center{offset, 0.0f, 0.0f};
    // Two thin triangles per cluster, offset off the axis so axis-aligned
    // rays cross their boxes but usually miss the surfaces.
    for (int k = 0; k < 2 && tris.size() < count; ++k) {
      float jx = (rng.next_float() - 0.5f) * scale;
      float jy = 0.15f + rng.next_float() * 0.5f;
      float jz = (rng.next_float() - 0.5f) * 0.6f;
      Vec3 a{center.x + jx, jy, jz};
      Vec3 b{center.x + jx + scale, jy + scale * 0.3f, jz};
      Vec3 c{center.x + jx, jy + scale * 0.3f, jz + scale};
      tris.push_back({a, b, c, static_cast<std::uint32_t>(tris.size())});
    }
    // Occasional large on-axis triangle so some rays do find hits.
    if (i % 17 == 5 && tris.size() < count) {
      Vec3 a{center.x, -1.5f, -1.5f};
      Vec3 b{center.x, 1.5f, 0.0f};
      Vec3 c{center.x, -1.5f, 1.5f};
      tris.push_back({a, b, c, static_cast<std::uint32_t>(tris.size())});
    }
    offset += step;
    step *= ratio;
    if (step < 1e-4f) {
      // restart another diagonal layer stacked in y
      offset = 0.0f;
      step = total * (1.0f - ratio);
    }
    ++i;
  }
  return tris;
}

}  // namespace

std::vector<Triangle> generate_synthetic(SyntheticKind kind, std::uint32_t count,
                                         std::uint64_t seed) {
  switch (kind) {
    case SyntheticKind::grid:
      return generate_grid(count);
    case SyntheticKind::random_boxes:
      return generate_random_boxes(count, seed);
    case SyntheticKind::deep_branch:
      return generate_deep_branch(count, seed);
  }
  throw ConfigError("unknown synthetic kind");
}

SyntheticKind synthetic_kind_from_string(const std::string& name) {
  if (name == "grid") return SyntheticKind::grid;
  if (name == "random-boxes") return SyntheticKind::random_boxes;
  if (name == "deep-branch") return SyntheticKind::deep_branch;
  throw ConfigError("unknown synthetic scene kind '" + name + "'");
}

std::string to_string(SyntheticKind kind) {
  switch (kind) {
    case SyntheticKind::grid:
      return "grid";
    case SyntheticKind::random_boxes:
      return "random-boxes";
    case SyntheticKind::deep_branch:
      return "deep-branch";
  }
  return "?";
}

std::vector<Ray> generate_sample_rays(const Camera& camera, int samples_per_pixel,
                                      std::uint64_t seed) {
  if (camera.width <= 0 || camera.height <= 0)
    throw ConfigError("camera resolution must be positive");
  if (samples_per_pixel < 1) throw ConfigError("samples per pixel must be >= 1");

  Vec3 forward = normalize(camera.look_at - camera.position);
  Vec3 right = normalize(cross(forward, camera.up));
  Vec3 up = cross(right, forward);
  float tan_half = std::tan(camera.fov_degrees * 0.5f * kPi / 180.0f);
  float aspect = static_cast<float>(camera.width) / static_cast<float>(camera.height);

  std::vector<Ray> rays;
  rays.reserve(static_cast<size_t>(camera.width) * camera.height * samples_per_pixel);
  for (int s = 0; s < samples_per_pixel; ++s) {
    for (int py = 0; py < camera.height; ++py) {
      for (int px = 0; px < camera.width; ++px) {
        float jx = 0.5f, jy = 0.5f;
        if (s > 0) {
          SplitMix64 rng(seed ^ (static_cast<std::uint64_t>(s) << 40) ^
                         (static_cast<std::uint64_t>(py) << 20) ^ static_cast<std::uint64_t>(px));
          jx = rng.next_float();
          jy = rng.next_float();
        }
        float u = (static_cast<float>(px) + jx) / static_cast<float>(camera.width);
        float v = (static_cast<float>(py) + jy) / static_cast<float>(camera.height);
        float ndc_x = (2.0f * u - 1.0f) * tan_half * aspect;
        float ndc_y = (1.0f - 2.0f * v) * tan_half;
        Ray ray;
        ray.origin = camera.position;
        ray.dir = normalize(forward + right * ndc_x + up * ndc_y);
        ray.mode = RayMode::closest_hit;
        rays.push_back(ray);
      }
    }
  }
  return rays;
}

std::vector<Ray> generate_primary_rays(const Camera& camera) {
  return generate_sample_rays(camera, 1, 0);
}

std::vector<Ray> generate_bounce_rays(const std::vector<HitRecord>& hits, std::uint64_t seed,
                                      int rays_per_hit) {
  if (rays_per_hit < 1) throw ConfigError("rays per hit must be >= 1");
  std::vector<Ray> rays;
  for (size_t i = 0; i < hits.size(); ++i) {
    const HitRecord& h = hits[i];
    if (!h.hit) continue;
    Vec3 n = h.normal;
    if (dot(n, n) == 0.0f) n = {0.0f, 0.0f, 1.0f};
    // local frame around n
    Vec3 tangent = std::fabs(n.x) > 0.9f ? Vec3{0.0f, 1.0f, 0.0f} : Vec3{1.0f, 0.0f, 0.0f};
    Vec3 bx = normalize(cross(tangent, n));
    Vec3 by = cross(n, bx);
    SplitMix64 rng(seed ^ (static_cast<std::uint64_t>(i) * 0xd1342543de82ef95ULL + 1));
    for (int k = 0; k < rays_per_hit; ++k) {
      float u1 = rng.next_float();
      float u2 = rng.next_float();
      float r = std::sqrt(u1);
      float phi = 2.0f * kPi * u2;
      float lx = r * std::cos(phi);
      float ly = r * std::sin(phi);
      float lz = std::sqrt(std::max(0.0f, 1.0f - u1));
      Ray ray;
      ray.dir = normalize(bx * lx + by * ly + n * lz);
      if (dot(ray.dir, n) <= 0.0f) ray.dir = n;  // grazing sample degenerated in float
      ray.origin = h.point + n * 1e-4f;
      ray.mode = RayMode::closest_hit;
      rays.push_back(ray);
    }
  }
  return rays;
}

Aabb scene_bounds(const std::vector<Triangle>& tris) {
  Aabb box;
  for (const Triangle& t : tris) box.grow(t);
  return box;
}

Camera auto_frame_camera(const std::vector<Triangle>& tris, int width, int height,
                         float fov_degrees) {
  Aabb box = scene_bounds(tris);
  Camera cam;
  cam.width = width;
  cam.height = height;
  cam.fov_degrees = fov_degrees;
  if (box.empty()) return cam;
  Vec3 center = (box.min + box.max) * 0.5f;
  Vec3 ext = box.extent();
  float e[3] = {ext.x, ext.y, ext.z};

  // View down the axis whose perpendicular face is largest and squarest, so
  // skinny scenes (a deep branch along x) are seen down the barrel instead
  // of edge-on. Ties go to the later axis, keeping -z for flat scenes.
  int axis = 0;
  float best_min = -1.0f, best_ratio = -1.0f;
  for (int a = 0; a < 3; ++a) {
    float p = e[(a + 1) % 3], q = e[(a + 2) % 3];
    float lo = std::min(p, q), hi = std::max({p, q, 1e-6f});
    if (lo > best_min || (lo == best_min && lo / hi >= best_ratio)) {
      axis = a;
      best_min = lo;
      best_ratio = lo / hi;
    }
  }

  Vec3 view_dir{0.0f, 0.0f, 0.0f};  // camera sits on the +axis side
  (axis == 0 ? view_dir.x : axis == 1 ? view_dir.y : view_dir.z) = 1.0f;
  cam.up = axis == 1 ? Vec3{0.0f, 0.0f, 1.0f} : Vec3{0.0f, 1.0f, 0.0f};

  Vec3 right = cross(view_dir * -1.0f, cam.up);
  float half_w = 0.5f * std::fabs(dot({e[0], e[1], e[2]}, right));
  float half_h = 0.5f * std::fabs(dot({e[0], e[1], e[2]}, cam.up));
  float half_d = 0.5f * e[axis];
  float tan_half = std::tan(fov_degrees * 0.5f * kPi / 180.0f);
  float aspect = static_cast<float>(width) / static_cast<float>(height);
  float dist = std::max(half_h / tan_half, half_w / (tan_half * aspect));
  dist = std::max(dist * 1.05f, 1e-3f) + half_d + 1.0f;
  cam.position = center + view_dir * dist;
  cam.look_at = center;
  return cam;
}

}  // namespace ttpsim
