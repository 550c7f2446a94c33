#pragma once

#include <vector>

#include "types.hpp"

namespace dpf {

// Per-point normals via PCA over the k nearest neighbors, with orientation made
// globally consistent by propagation along a minimum spanning tree of the k-NN
// graph. Each component root is oriented toward +z (ties resolved toward +y,
// then +x).
std::vector<Vec3> estimate_normals(const std::vector<Vec3>& positions, std::size_t k);

// Area-weighted average of incident face normals, renormalized. Every vertex
// must be referenced by at least one face.
std::vector<Vec3> vertex_normals(const TriMesh& mesh);

// Normals of the mesh (deformed_vertices, canonical.faces): the canonical
// connectivity is kept, only positions change.
std::vector<Vec3> transfer_normals(const TriMesh& canonical, const std::vector<Vec3>& deformed_vertices);

}  // namespace dpf
