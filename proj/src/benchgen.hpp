#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "csvio.hpp"
#include "types.hpp"

namespace dpf {

// ---------------------------------------------------------------------------
// Primitives

// Icosahedron subdivided `subdiv` times, vertices projected to the unit sphere.
TriMesh make_icosphere(std::size_t subdiv);
// Closed cylinder of radius 0.5 and height 2 along z with `rings` bands.
TriMesh make_cylinder(std::size_t rings, std::size_t segments = 32);
// Torus with major radius 1 and minor radius 0.35.
TriMesh make_torus(std::size_t major_segments, std::size_t minor_segments);
// Planar grid over [-1,1]^2 at z=0 with n x n cells.
TriMesh make_grid(std::size_t n);

// Parses "icosphere:3", "cylinder:16", "cylinder:16:32", "torus:32:16",
// "grid:8" and dispatches.
TriMesh make_primitive(const std::string& spec);

// ---------------------------------------------------------------------------
// Analytic warps

struct RigidWarp {
  Vec3 axis{0, 0, 1};
  double angle_rad = 0.0;
  Vec3 translation{0, 0, 0};
};

struct TwistWarp {
  Vec3 axis{0, 0, 1};
  double rate = 0.0;  // radians of rotation per unit length along the axis
};

struct BendWarp {
  Vec3 axis{1, 0, 0};  // coordinate that parameterizes the bend
  double curvature = 0.0;
};

struct BumpWarp {
  Vec3 center{0, 0, 0};
  double amplitude = 0.0;
  double sigma = 1.0;
};

using AnalyticWarp = std::variant<RigidWarp, TwistWarp, BendWarp, BumpWarp>;

Vec3 warp_point(const AnalyticWarp& warp, const Vec3& p);

// Parses "rigid:z:30" (axis, degrees), "rigid:z:30:0.1,0,0" (plus translation),
// "twist:z:0.6", "bend:x:0.8", "bump:0,0,0.5:0.3:0.4".
AnalyticWarp parse_warp(const std::string& spec);

struct WarpResult {
  TriMesh target;
  FlowFile flow;  // base = canonical vertices, displacement = target - canonical
};

// Closed-form per-vertex warp; normals of the target come from the warped
// geometry through the canonical connectivity.
WarpResult apply_warp(const AnalyticWarp& warp, const TriMesh& mesh);

// ---------------------------------------------------------------------------
// Case emission

struct BenchCaseSpec {
  std::string name;
  std::string primitive;  // primitive spec string
  std::string warp;       // warp spec string
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
  std::size_t correspondence_count = 100;
};

// Writes canonical.ply, target.ply, flow.csv, corr.csv and manifest.txt into
// out_dir/name/. Gaussian position noise (if any) lands on the target only and
// is included in the recorded flow.
void emit_case(const BenchCaseSpec& spec, const std::string& out_dir);

// The default suite: {sphere, cylinder} x {rigid 30deg, twist 0.6, bend 0.8,
// bump 0.3/0.4}.
std::vector<BenchCaseSpec> default_suite(std::uint64_t seed);

}  // namespace dpf
