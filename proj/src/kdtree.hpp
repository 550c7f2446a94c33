#pragma once

#include <cstdint>
#include <vector>

#include "types.hpp"
#include "vec.hpp"

namespace dpf {

struct Neighbor {
  std::size_t index = 0;
  double distance = 0.0;
};

// Balanced k-d tree over a fixed position array. Queries return exactly the
// brute-force result: ascending distance, ties broken by lowest index.
class SpatialIndex {
 public:
  explicit SpatialIndex(std::vector<Vec3> points, std::size_t leaf_size = 16);

  std::size_t size() const { return points_.size(); }
  const std::vector<Vec3>& points() const { return points_; }

  std::vector<Neighbor> query(const Vec3& q, std::size_t k) const;

  // Buffer-reusing variant for hot loops.
  void query(const Vec3& q, std::size_t k, std::vector<Neighbor>& out) const;

  // Index and squared distance of the single nearest point.
  Neighbor nearest(const Vec3& q) const;

 private:
  struct Node {
    double split = 0.0;
    std::int32_t axis = -1;  // -1 marks a leaf
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
    std::int32_t left = -1;
    std::int32_t right = -1;
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end);
  void search(std::int32_t node_id, const Vec3& q, std::size_t k,
              std::vector<std::pair<double, std::size_t>>& heap) const;

  std::vector<Vec3> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
  std::size_t leaf_size_;
};

}  // namespace dpf
