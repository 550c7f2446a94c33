#include "types.hpp"

#include <cmath>

namespace dpf {

void PointSet::validate() const {
  require(positions.size() == normals.size(), ErrorCode::LengthMismatch,
          "positions and normals differ in length");
  for (std::size_t i = 0; i < positions.size(); ++i) {
    require(is_finite(positions[i]), ErrorCode::NonFiniteValue,
            "non-finite position at index " + std::to_string(i));
    require(is_finite(normals[i]), ErrorCode::NonFiniteValue,
            "non-finite normal at index " + std::to_string(i));
    require(std::abs(norm(normals[i]) - 1.0) <= kUnitNormalTolerance, ErrorCode::InvalidArgument,
            "normal at index " + std::to_string(i) + " is not unit length");
  }
}

void TriMesh::validate() const {
  const std::size_t v = vertices.size();
  for (std::size_t i = 0; i < v; ++i) {
    require(is_finite(vertices[i]), ErrorCode::NonFiniteValue,
            "non-finite vertex at index " + std::to_string(i));
  }
  for (std::size_t f = 0; f < faces.size(); ++f) {
    const Face& face = faces[f];
    for (int c = 0; c < 3; ++c) {
      require(face[c] < v, ErrorCode::IndexOutOfRange,
              "face " + std::to_string(f) + " references vertex " + std::to_string(face[c]) +
                  " but mesh has " + std::to_string(v) + " vertices");
    }
    require(face[0] != face[1] && face[1] != face[2] && face[0] != face[2],
            ErrorCode::InvalidArgument, "face " + std::to_string(f) + " repeats a vertex");
  }
  if (!vertex_normals.empty()) {
    require(vertex_normals.size() == v, ErrorCode::LengthMismatch,
            "vertex normal count does not match vertex count");
  }
}

Aabb bounds_of(const std::vector<Vec3>& points) {
  require(!points.empty(), ErrorCode::DegenerateBounds, "no points to bound");
  Aabb box{points[0], points[0]};
  for (const Vec3& p : points) {
    for (int c = 0; c < 3; ++c) {
      box.min[c] = std::min(box.min[c], p[c]);
      box.max[c] = std::max(box.max[c], p[c]);
    }
  }
  return box;
}

const std::vector<Vec3>& frame_positions(const Frame& frame) {
  if (const PointSet* ps = std::get_if<PointSet>(&frame)) return ps->positions;
  return std::get<TriMesh>(frame).vertices;
}

std::vector<double> flatten(const std::vector<Vec3>& points) {
  std::vector<double> out(3 * points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    out[3 * i] = points[i].x;
    out[3 * i + 1] = points[i].y;
    out[3 * i + 2] = points[i].z;
  }
  return out;
}

std::vector<Vec3> unflatten(const std::vector<double>& data) {
  require(data.size() % 3 == 0, ErrorCode::ShapeMismatch, "flat buffer length is not 3n");
  std::vector<Vec3> out(data.size() / 3);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = Vec3{data[3 * i], data[3 * i + 1], data[3 * i + 2]};
  }
  return out;
}

}  // namespace dpf
