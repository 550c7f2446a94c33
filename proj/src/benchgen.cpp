#include "benchgen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <sstream>

#include "config.hpp"
#include "error.hpp"
#include "fsutil.hpp"
#include "meshio.hpp"
#include "normals.hpp"
#include "rng.hpp"

namespace dpf {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t begin = 0;
  while (true) {
    const std::size_t end = s.find(sep, begin);
    out.push_back(s.substr(begin, end == std::string::npos ? std::string::npos : end - begin));
    if (end == std::string::npos) break;
    begin = end + 1;
  }
  return out;
}

double parse_num(const std::string& s, const std::string& context) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    require(used == s.size() && std::isfinite(v), ErrorCode::Parse,
            "bad number '" + s + "' in " + context);
    return v;
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    fail(ErrorCode::Parse, "bad number '" + s + "' in " + context);
  }
}

Vec3 parse_vec3(const std::string& s, const std::string& context) {
  const std::vector<std::string> parts = split(s, ',');
  require(parts.size() == 3, ErrorCode::Parse, "expected x,y,z in " + context);
  return Vec3{parse_num(parts[0], context), parse_num(parts[1], context),
              parse_num(parts[2], context)};
}

Vec3 parse_axis(const std::string& s, const std::string& context) {
  if (s == "x") return Vec3{1, 0, 0};
  if (s == "y") return Vec3{0, 1, 0};
  if (s == "z") return Vec3{0, 0, 1};
  const Vec3 axis = parse_vec3(s, context);
  require(norm(axis) > 1e-12, ErrorCode::Parse, "zero axis in " + context);
  return normalized(axis);
}

}  // namespace

// ---------------------------------------------------------------------------
// Primitives

TriMesh make_icosphere(std::size_t subdiv) {
  require(subdiv <= 8, ErrorCode::BadResolution, "icosphere subdivision above 8 is unsupported");
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> verts = {
      {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t},  {0, 1, t},
      {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (Vec3& v : verts) v = normalized(v);
  std::vector<Face> faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                             {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                             {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                             {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};

  for (std::size_t level = 0; level < subdiv; ++level) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> midpoint;
    auto mid = [&](std::uint32_t a, std::uint32_t b) {
      const auto key = std::minmax(a, b);
      const auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      const std::uint32_t idx = static_cast<std::uint32_t>(verts.size());
      verts.push_back(normalized((verts[a] + verts[b]) * 0.5));
      midpoint.emplace(key, idx);
      return idx;
    };
    std::vector<Face> next;
    next.reserve(4 * faces.size());
    for (const Face& f : faces) {
      const std::uint32_t ab = mid(f[0], f[1]);
      const std::uint32_t bc = mid(f[1], f[2]);
      const std::uint32_t ca = mid(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    faces = std::move(next);
  }

  TriMesh mesh;
  mesh.vertices = verts;
  mesh.faces = faces;
  mesh.vertex_normals = verts;  // unit sphere: normals are the positions
  return mesh;
}

TriMesh make_cylinder(std::size_t rings, std::size_t segments) {
  require(rings >= 1, ErrorCode::BadResolution, "cylinder needs at least 1 ring");
  require(segments >= 3, ErrorCode::BadResolution, "cylinder needs at least 3 segments");
  const double radius = 0.5;
  TriMesh mesh;
  for (std::size_t r = 0; r <= rings; ++r) {
    const double z = -1.0 + 2.0 * static_cast<double>(r) / static_cast<double>(rings);
    for (std::size_t s = 0; s < segments; ++s) {
      const double a = 2.0 * kPi * static_cast<double>(s) / static_cast<double>(segments);
      mesh.vertices.push_back(Vec3{radius * std::cos(a), radius * std::sin(a), z});
    }
  }
  auto side = [&](std::size_t r, std::size_t s) {
    return static_cast<std::uint32_t>(r * segments + (s % segments));
  };
  for (std::size_t r = 0; r < rings; ++r) {
    for (std::size_t s = 0; s < segments; ++s) {
      const std::uint32_t a = side(r, s), b = side(r, s + 1);
      const std::uint32_t c = side(r + 1, s), d = side(r + 1, s + 1);
      mesh.faces.push_back({a, b, d});
      mesh.faces.push_back({a, d, c});
    }
  }
  const std::uint32_t bottom = static_cast<std::uint32_t>(mesh.vertices.size());
  mesh.vertices.push_back(Vec3{0, 0, -1});
  const std::uint32_t top = static_cast<std::uint32_t>(mesh.vertices.size());
  mesh.vertices.push_back(Vec3{0, 0, 1});
  for (std::size_t s = 0; s < segments; ++s) {
    mesh.faces.push_back({bottom, side(0, s + 1), side(0, s)});
    mesh.faces.push_back({top, side(rings, s), side(rings, s + 1)});
  }
  mesh.vertex_normals = vertex_normals(mesh);
  return mesh;
}

TriMesh make_torus(std::size_t major_segments, std::size_t minor_segments) {
  require(major_segments >= 3 && minor_segments >= 3, ErrorCode::BadResolution,
          "torus needs at least 3 segments each way");
  const double major = 1.0, minor = 0.35;
  TriMesh mesh;
  for (std::size_t i = 0; i < major_segments; ++i) {
    const double u = 2.0 * kPi * static_cast<double>(i) / static_cast<double>(major_segments);
    const Vec3 ring_center{major * std::cos(u), major * std::sin(u), 0.0};
    for (std::size_t j = 0; j < minor_segments; ++j) {
      const double v = 2.0 * kPi * static_cast<double>(j) / static_cast<double>(minor_segments);
      const Vec3 n{std::cos(u) * std::cos(v), std::sin(u) * std::cos(v), std::sin(v)};
      mesh.vertices.push_back(ring_center + n * minor);
      mesh.vertex_normals.push_back(n);
    }
  }
  auto at = [&](std::size_t i, std::size_t j) {
    return static_cast<std::uint32_t>((i % major_segments) * minor_segments + (j % minor_segments));
  };
  for (std::size_t i = 0; i < major_segments; ++i) {
    for (std::size_t j = 0; j < minor_segments; ++j) {
      mesh.faces.push_back({at(i, j), at(i + 1, j), at(i + 1, j + 1)});
      mesh.faces.push_back({at(i, j), at(i + 1, j + 1), at(i, j + 1)});
    }
  }
  return mesh;
}

TriMesh make_grid(std::size_t n) {
  require(n >= 1, ErrorCode::BadResolution, "grid needs at least 1 cell per side");
  TriMesh mesh;
  for (std::size_t r = 0; r <= n; ++r) {
    for (std::size_t c = 0; c <= n; ++c) {
      mesh.vertices.push_back(Vec3{-1.0 + 2.0 * static_cast<double>(c) / static_cast<double>(n),
                                   -1.0 + 2.0 * static_cast<double>(r) / static_cast<double>(n),
                                   0.0});
      mesh.vertex_normals.push_back(Vec3{0, 0, 1});
    }
  }
  auto at = [&](std::size_t r, std::size_t c) {
    return static_cast<std::uint32_t>(r * (n + 1) + c);
  };
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      mesh.faces.push_back({at(r, c), at(r, c + 1), at(r + 1, c + 1)});
      mesh.faces.push_back({at(r, c), at(r + 1, c + 1), at(r + 1, c)});
    }
  }
  return mesh;
}

TriMesh make_primitive(const std::string& spec) {
  const std::vector<std::string> parts = split(spec, ':');
  const std::string& kind = parts[0];
  auto num_at = [&](std::size_t i, std::size_t fallback) -> std::size_t {
    if (parts.size() <= i) return fallback;
    const double v = parse_num(parts[i], "primitive spec '" + spec + "'");
    require(v >= 0 && v == std::floor(v), ErrorCode::Parse,
            "expected a non-negative integer in primitive spec '" + spec + "'");
    return static_cast<std::size_t>(v);
  };
  if (kind == "icosphere") return make_icosphere(num_at(1, 3));
  if (kind == "cylinder") return make_cylinder(num_at(1, 12), num_at(2, 32));
  if (kind == "torus") return make_torus(num_at(1, 32), num_at(2, 16));
  if (kind == "grid") return make_grid(num_at(1, 16));
  fail(ErrorCode::Parse, "unknown primitive '" + kind + "'");
}

// ---------------------------------------------------------------------------
// Warps

namespace {

Vec3 rotate_about_axis(const Vec3& v, const Vec3& axis, double angle) {
  // Rodrigues rotation; axis must be unit length.
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return v * c + cross(axis, v) * s + axis * (dot(axis, v) * (1.0 - c));
}

// Deterministic perpendicular reference for the bend plane.
Vec3 bend_reference(const Vec3& axis) {
  const Vec3 z{0, 0, 1};
  const Vec3 x{1, 0, 0};
  const Vec3 pick = std::abs(dot(axis, z)) < 0.9 ? z : x;
  return normalized(pick - axis * dot(pick, axis));
}

}  // namespace

Vec3 warp_point(const AnalyticWarp& warp, const Vec3& p) {
  if (const RigidWarp* rigid = std::get_if<RigidWarp>(&warp)) {
    return rotate_about_axis(p, rigid->axis, rigid->angle_rad) + rigid->translation;
  }
  if (const TwistWarp* twist = std::get_if<TwistWarp>(&warp)) {
    const double u = dot(p, twist->axis);
    const Vec3 radial = p - twist->axis * u;
    return twist->axis * u + rotate_about_axis(radial, twist->axis, twist->rate * u);
  }
  if (const BendWarp* bend = std::get_if<BendWarp>(&warp)) {
    if (bend->curvature == 0.0) return p;
    const Vec3 b = bend_reference(bend->axis);
    const double u = dot(p, bend->axis);
    const double v = dot(p, b);
    const Vec3 rest = p - bend->axis * u - b * v;
    const double r = 1.0 / bend->curvature;
    const double theta = bend->curvature * u;
    return rest + bend->axis * (std::sin(theta) * (r - v)) + b * (r - std::cos(theta) * (r - v));
  }
  const BumpWarp& bump = std::get<BumpWarp>(warp);
  const Vec3 d = p - bump.center;
  const double len = norm(d);
  if (len < 1e-12) return p;
  return p + d * (bump.amplitude * std::exp(-len * len / (2.0 * bump.sigma * bump.sigma)) / len);
}

AnalyticWarp parse_warp(const std::string& spec) {
  const std::vector<std::string> parts = split(spec, ':');
  const std::string& kind = parts[0];
  const std::string ctx = "warp spec '" + spec + "'";
  if (kind == "rigid") {
    require(parts.size() >= 3, ErrorCode::Parse, ctx + " needs rigid:axis:degrees");
    RigidWarp w;
    w.axis = parse_axis(parts[1], ctx);
    w.angle_rad = parse_num(parts[2], ctx) * kPi / 180.0;
    if (parts.size() >= 4) w.translation = parse_vec3(parts[3], ctx);
    return w;
  }
  if (kind == "twist") {
    require(parts.size() == 3, ErrorCode::Parse, ctx + " needs twist:axis:rate");
    TwistWarp w;
    w.axis = parse_axis(parts[1], ctx);
    w.rate = parse_num(parts[2], ctx);
    return w;
  }
  if (kind == "bend") {
    require(parts.size() == 3, ErrorCode::Parse, ctx + " needs bend:axis:curvature");
    BendWarp w;
    w.axis = parse_axis(parts[1], ctx);
    w.curvature = parse_num(parts[2], ctx);
    return w;
  }
  if (kind == "bump") {
    require(parts.size() == 4, ErrorCode::Parse, ctx + " needs bump:cx,cy,cz:amplitude:sigma");
    BumpWarp w;
    w.center = parse_vec3(parts[1], ctx);
    w.amplitude = parse_num(parts[2], ctx);
    w.sigma = parse_num(parts[3], ctx);
    require(w.sigma > 0.0, ErrorCode::Parse, ctx + ": sigma must be positive");
    return w;
  }
  fail(ErrorCode::Parse, "unknown warp '" + kind + "'");
}

WarpResult apply_warp(const AnalyticWarp& warp, const TriMesh& mesh) {
  WarpResult out;
  out.target.faces = mesh.faces;
  out.target.vertices.reserve(mesh.vertices.size());
  for (const Vec3& v : mesh.vertices) out.target.vertices.push_back(warp_point(warp, v));
  if (!mesh.faces.empty()) {
    out.target.vertex_normals = transfer_normals(mesh, out.target.vertices);
  }
  out.flow.base = mesh.vertices;
  out.flow.displacement.resize(mesh.vertices.size());
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    out.flow.displacement[i] = out.target.vertices[i] - mesh.vertices[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Case emission

void emit_case(const BenchCaseSpec& spec, const std::string& out_dir) {
  require(!spec.name.empty(), ErrorCode::InvalidArgument, "case name is empty");
  const TriMesh canonical = make_primitive(spec.primitive);
  const AnalyticWarp warp = parse_warp(spec.warp);
  WarpResult result = apply_warp(warp, canonical);

  if (spec.noise_sigma > 0.0) {
    Rng rng(derive_seed(spec.seed, 0x6E6F697365ull));
    for (Vec3& v : result.target.vertices) {
      v.x += spec.noise_sigma * rng.normal();
      v.y += spec.noise_sigma * rng.normal();
      v.z += spec.noise_sigma * rng.normal();
    }
    result.target.vertex_normals = transfer_normals(canonical, result.target.vertices);
    for (std::size_t i = 0; i < canonical.vertices.size(); ++i) {
      result.flow.displacement[i] = result.target.vertices[i] - canonical.vertices[i];
    }
  }

  const std::filesystem::path dir = std::filesystem::path(out_dir) / spec.name;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  require(!ec, ErrorCode::Io, "cannot create " + dir.string() + ": " + ec.message());

  write_mesh(canonical, (dir / "canonical.ply").string());
  write_mesh(result.target, (dir / "target.ply").string());
  write_flow(result.flow, (dir / "flow.csv").string());

  // Exact correspondences on a seeded vertex subset, handy for guided runs.
  const std::size_t count = std::min(spec.correspondence_count, canonical.vertices.size());
  Rng rng(derive_seed(spec.seed, 0x636F7272ull));
  std::vector<std::uint32_t> order(canonical.vertices.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<std::uint32_t>(i);
  for (std::size_t i = 0; i + 1 < order.size(); ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(order.size() - i));
    std::swap(order[i], order[j]);
  }
  CorrespondenceSet corr;
  for (std::size_t i = 0; i < count; ++i) {
    corr.pairs.push_back(Correspondence{canonical.vertices[order[i]],
                                        result.target.vertices[order[i]]});
  }
  write_correspondences(corr, (dir / "corr.csv").string());

  std::ostringstream manifest;
  manifest << "correspondences=" << count << "\n";
  manifest << "faces=" << canonical.faces.size() << "\n";
  manifest << "name=" << spec.name << "\n";
  manifest << "noise_sigma=" << format_double(spec.noise_sigma) << "\n";
  manifest << "primitive=" << spec.primitive << "\n";
  manifest << "seed=" << spec.seed << "\n";
  manifest << "vertices=" << canonical.vertices.size() << "\n";
  manifest << "warp=" << spec.warp << "\n";
  write_file_atomic((dir / "manifest.txt").string(), manifest.str());
}

std::vector<BenchCaseSpec> default_suite(std::uint64_t seed) {
  const std::string sphere = "icosphere:3";
  const std::string cylinder = "cylinder:12:24";
  std::vector<BenchCaseSpec> cases;
  auto add = [&](const std::string& name, const std::string& primitive, const std::string& warp) {
    BenchCaseSpec spec;
    spec.name = name;
    spec.primitive = primitive;
    spec.warp = warp;
    spec.noise_sigma = 0.0;
    spec.seed = seed;
    cases.push_back(spec);
  };
  add("sphere_rigid", sphere, "rigid:z:30");
  add("sphere_twist", sphere, "twist:z:0.6");
  add("sphere_bend", sphere, "bend:x:0.8");
  add("sphere_bump", sphere, "bump:0,0,0.6:0.35:0.4");
  add("cylinder_rigid", cylinder, "rigid:z:30");
  add("cylinder_twist", cylinder, "twist:z:0.6");
  add("cylinder_bend", cylinder, "bend:z:0.5");
  add("cylinder_bump", cylinder, "bump:0.5,0,0:0.3:0.35");
  return cases;
}

}  // namespace dpf
