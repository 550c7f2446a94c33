#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "error.hpp"
#include "vec.hpp"

namespace dpf {

constexpr double kUnitNormalTolerance = 1e-6;

// Oriented point cloud: positions paired with unit normals.
struct PointSet {
  std::vector<Vec3> positions;
  std::vector<Vec3> normals;

  std::size_t size() const { return positions.size(); }
  bool empty() const { return positions.empty(); }

  // Enforces the structural invariants: matching lengths, finite coordinates,
  // unit-length normals (within 1e-6).
  void validate() const;
};

using Face = std::array<std::uint32_t, 3>;

// Indexed triangle mesh; vertex normals are optional.
struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;
  std::vector<Vec3> vertex_normals;  // empty or one per vertex

  bool has_vertex_normals() const { return !vertex_normals.empty(); }
  void validate() const;
};

// One frame of a dynamic scene: either a raw point set or a mesh.
using Frame = std::variant<PointSet, TriMesh>;

// Ordered frames; index 0 is the canonical frame unless stated otherwise.
struct DynamicScene {
  std::vector<Frame> frames;

  std::size_t size() const { return frames.size(); }
  void validate() const { require(!frames.empty(), ErrorCode::InvalidArgument, "scene has no frames"); }
};

struct Aabb {
  Vec3 min{0, 0, 0};
  Vec3 max{0, 0, 0};

  Vec3 center() const { return (min + max) * 0.5; }
  Vec3 extent() const { return max - min; }
  double diagonal() const { return norm(max - min); }
  // Radius of the bounding sphere around the box center.
  double radius() const { return 0.5 * diagonal(); }
};

Aabb bounds_of(const std::vector<Vec3>& points);

const std::vector<Vec3>& frame_positions(const Frame& frame);

// Row-major [n x 3] buffer conversions.
std::vector<double> flatten(const std::vector<Vec3>& points);
std::vector<Vec3> unflatten(const std::vector<double>& data);

}  // namespace dpf
