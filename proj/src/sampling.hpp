#pragma once

#include <cstdint>

#include "types.hpp"

namespace dpf {

// Area-uniform oriented sample of a triangle mesh. Triangles are chosen with
// probability proportional to area (zero-area faces are excluded), positions by
// uniform barycentric coordinates, and normals by barycentric interpolation of
// the vertex normals (face normals when the mesh carries none), renormalized.
PointSet sample_surface(const TriMesh& mesh, std::size_t n, std::uint64_t seed);

// Total surface area and per-face areas (degenerate faces count as zero).
double surface_area(const TriMesh& mesh);

}  // namespace dpf
