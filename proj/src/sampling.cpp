#include "sampling.hpp"

#include <algorithm>
#include <cmath>

#include "error.hpp"
#include "rng.hpp"

namespace dpf {

namespace {

inline Vec3 face_cross(const TriMesh& mesh, const Face& f) {
  const Vec3& a = mesh.vertices[f[0]];
  const Vec3& b = mesh.vertices[f[1]];
  const Vec3& c = mesh.vertices[f[2]];
  return cross(b - a, c - a);
}

}  // namespace

double surface_area(const TriMesh& mesh) {
  double total = 0.0;
  for (const Face& f : mesh.faces) total += 0.5 * norm(face_cross(mesh, f));
  return total;
}

PointSet sample_surface(const TriMesh& mesh, std::size_t n, std::uint64_t seed) {
  require(n >= 1, ErrorCode::InvalidArgument, "sample count must be at least 1");
  require(!mesh.faces.empty(), ErrorCode::EmptyMesh, "mesh has no faces");

  std::vector<double> cumulative;
  cumulative.reserve(mesh.faces.size());
  double total = 0.0;
  for (const Face& f : mesh.faces) {
    total += 0.5 * norm(face_cross(mesh, f));
    cumulative.push_back(total);
  }
  require(total > 0.0, ErrorCode::EmptyMesh, "mesh has zero total area");

  Rng rng(seed);
  PointSet out;
  out.positions.reserve(n);
  out.normals.reserve(n);

  for (std::size_t i = 0; i < n; ++i) {
    const double pick = rng.uniform() * total;
    const std::size_t fi = static_cast<std::size_t>(
        std::upper_bound(cumulative.begin(), cumulative.end(), pick) - cumulative.begin());
    const Face& f = mesh.faces[std::min(fi, mesh.faces.size() - 1)];

    // Uniform barycentric draw.
    const double r1 = std::sqrt(rng.uniform());
    const double r2 = rng.uniform();
    const double w0 = 1.0 - r1;
    const double w1 = r1 * (1.0 - r2);
    const double w2 = r1 * r2;

    const Vec3 pos = mesh.vertices[f[0]] * w0 + mesh.vertices[f[1]] * w1 + mesh.vertices[f[2]] * w2;

    Vec3 nrm;
    if (mesh.has_vertex_normals()) {
      nrm = mesh.vertex_normals[f[0]] * w0 + mesh.vertex_normals[f[1]] * w1 +
            mesh.vertex_normals[f[2]] * w2;
    } else {
      nrm = face_cross(mesh, f);
    }
    const double len = norm(nrm);
    require(len > 1e-12, ErrorCode::NonFiniteValue, "degenerate interpolated normal");
    out.positions.push_back(pos);
    out.normals.push_back(nrm / len);
  }
  return out;
}

}  // namespace dpf
