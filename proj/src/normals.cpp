#include "normals.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <numeric>

#include "error.hpp"
#include "kdtree.hpp"

namespace dpf {

namespace {

struct Dsu {
  std::vector<std::uint32_t> parent;
  explicit Dsu(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0u); }
  std::uint32_t find(std::uint32_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  bool unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[std::max(a, b)] = std::min(a, b);
    return true;
  }
};

// Orient the component root deterministically: positive dot with +z, falling
// back to +y then +x on exact ties.
inline void orient_root(Vec3& n) {
  if (n.z < 0.0 || (n.z == 0.0 && (n.y < 0.0 || (n.y == 0.0 && n.x < 0.0)))) n = -n;
}

}  // namespace

std::vector<Vec3> estimate_normals(const std::vector<Vec3>& positions, std::size_t k) {
  const std::size_t n = positions.size();
  require(k >= 3, ErrorCode::InvalidArgument, "normal estimation needs k >= 3");
  require(n >= k, ErrorCode::InvalidArgument, "normal estimation needs at least k points");

  SpatialIndex index(positions);
  std::vector<Vec3> normals(n);
  std::vector<Neighbor> hits;

  struct Edge {
    double w;
    std::uint32_t a, b;
  };
  std::vector<Edge> edges;
  edges.reserve(n * k);

  for (std::size_t i = 0; i < n; ++i) {
    index.query(positions[i], k + 1, hits);
    std::vector<std::size_t> nbrs;
    nbrs.reserve(k);
    for (const Neighbor& h : hits) {
      if (h.index == i) continue;
      if (nbrs.size() == k) break;
      nbrs.push_back(h.index);
      const std::uint32_t a = static_cast<std::uint32_t>(std::min(i, h.index));
      const std::uint32_t b = static_cast<std::uint32_t>(std::max(i, h.index));
      edges.push_back(Edge{h.distance, a, b});
    }

    Vec3 mean{0, 0, 0};
    for (std::size_t j : nbrs) mean += positions[j];
    mean *= 1.0 / static_cast<double>(nbrs.size());

    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (std::size_t j : nbrs) {
      const Vec3 d = positions[j] - mean;
      const Eigen::Vector3d v(d.x, d.y, d.z);
      cov += v * v.transpose();
    }

    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
    const Eigen::Vector3d evals = solver.eigenvalues();  // ascending
    require(evals[2] > 0.0 && evals[1] > 1e-9 * evals[2], ErrorCode::DegenerateNeighborhood,
            "neighborhood of point " + std::to_string(i) + " is collinear");
    const Eigen::Vector3d nv = solver.eigenvectors().col(0);
    normals[i] = normalized(Vec3{nv[0], nv[1], nv[2]});
  }

  // Minimum spanning forest of the k-NN graph; weights are point distances.
  std::sort(edges.begin(), edges.end(), [](const Edge& x, const Edge& y) {
    if (x.w != y.w) return x.w < y.w;
    if (x.a != y.a) return x.a < y.a;
    return x.b < y.b;
  });
  Dsu dsu(n);
  std::vector<std::vector<std::uint32_t>> tree(n);
  for (const Edge& e : edges) {
    if (e.a == e.b) continue;
    if (dsu.unite(e.a, e.b)) {
      tree[e.a].push_back(e.b);
      tree[e.b].push_back(e.a);
    }
  }
  for (auto& adj : tree) std::sort(adj.begin(), adj.end());

  // Greedy orientation propagation: flip a child when it disagrees with its
  // parent; each component root follows the +z rule.
  std::vector<char> visited(n, 0);
  std::vector<std::uint32_t> stack;
  for (std::uint32_t root = 0; root < n; ++root) {
    if (visited[root]) continue;
    orient_root(normals[root]);
    visited[root] = 1;
    stack.push_back(root);
    while (!stack.empty()) {
      const std::uint32_t cur = stack.back();
      stack.pop_back();
      for (std::uint32_t nb : tree[cur]) {
        if (visited[nb]) continue;
        visited[nb] = 1;
        if (dot(normals[nb], normals[cur]) < 0.0) normals[nb] = -normals[nb];
        stack.push_back(nb);
      }
    }
  }
  return normals;
}

std::vector<Vec3> vertex_normals(const TriMesh& mesh) {
  const std::size_t v = mesh.vertices.size();
  std::vector<Vec3> accum(v, Vec3{0, 0, 0});
  std::vector<char> referenced(v, 0);
  for (const Face& f : mesh.faces) {
    const Vec3& a = mesh.vertices[f[0]];
    const Vec3& b = mesh.vertices[f[1]];
    const Vec3& c = mesh.vertices[f[2]];
    const Vec3 weighted = cross(b - a, c - a);  // length is twice the face area
    for (int corner = 0; corner < 3; ++corner) {
      accum[f[corner]] += weighted;
      referenced[f[corner]] = 1;
    }
  }
  std::vector<Vec3> out(v);
  for (std::size_t i = 0; i < v; ++i) {
    require(referenced[i], ErrorCode::IsolatedVertex,
            "vertex " + std::to_string(i) + " is not referenced by any face");
    const double len = norm(accum[i]);
    require(len > 1e-15, ErrorCode::DegenerateNeighborhood,
            "vertex " + std::to_string(i) + " has a zero area-weighted normal");
    out[i] = accum[i] / len;
  }
  return out;
}

std::vector<Vec3> transfer_normals(const TriMesh& canonical, const std::vector<Vec3>& deformed_vertices) {
  require(deformed_vertices.size() == canonical.vertices.size(), ErrorCode::LengthMismatch,
          "deformed vertex count " + std::to_string(deformed_vertices.size()) +
              " does not match canonical count " + std::to_string(canonical.vertices.size()));
  TriMesh deformed;
  deformed.vertices = deformed_vertices;
  deformed.faces = canonical.faces;
  return vertex_normals(deformed);
}

}  // namespace dpf
