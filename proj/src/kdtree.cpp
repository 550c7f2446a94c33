#include "kdtree.hpp"

#include <algorithm>
#include <numeric>

#include "error.hpp"

namespace dpf {

namespace {

// Heap ordering: the "worst" candidate (largest distance, then largest index)
// sits on top so it is the one displaced first.
inline bool better(const std::pair<double, std::size_t>& a,
                   const std::pair<double, std::size_t>& b) {
  if (a.first != b.first) return a.first < b.first;
  return a.second < b.second;
}

}  // namespace

SpatialIndex::SpatialIndex(std::vector<Vec3> points, std::size_t leaf_size)
    : points_(std::move(points)), leaf_size_(std::max<std::size_t>(1, leaf_size)) {
  for (const Vec3& p : points_) {
    require(is_finite(p), ErrorCode::NonFiniteInput, "non-finite point in spatial index");
  }
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), 0u);
  if (!points_.empty()) {
    nodes_.reserve(2 * points_.size() / leaf_size_ + 2);
    build(0, static_cast<std::uint32_t>(points_.size()));
  }
}

std::int32_t SpatialIndex::build(std::uint32_t begin, std::uint32_t end) {
  const std::int32_t id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back(Node{});
  nodes_[id].begin = begin;
  nodes_[id].end = end;
  if (end - begin <= leaf_size_) return id;

  Aabb box{points_[order_[begin]], points_[order_[begin]]};
  for (std::uint32_t i = begin; i < end; ++i) {
    const Vec3& p = points_[order_[i]];
    for (int c = 0; c < 3; ++c) {
      box.min[c] = std::min(box.min[c], p[c]);
      box.max[c] = std::max(box.max[c], p[c]);
    }
  }
  const Vec3 ext = box.extent();
  int axis = 0;
  if (ext.y > ext[axis]) axis = 1;
  if (ext.z > ext[axis]) axis = 2;
  if (ext[axis] == 0.0) return id;  // all points coincide; keep as leaf

  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     if (points_[a][axis] != points_[b][axis])
                       return points_[a][axis] < points_[b][axis];
                     return a < b;
                   });
  const double split = points_[order_[mid]][axis];

  const std::int32_t left = build(begin, mid);
  const std::int32_t right = build(mid, end);
  nodes_[id].axis = axis;
  nodes_[id].split = split;
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

void SpatialIndex::search(std::int32_t node_id, const Vec3& q, std::size_t k,
                          std::vector<std::pair<double, std::size_t>>& heap) const {
  const Node& node = nodes_[node_id];
  if (node.axis < 0) {
    for (std::uint32_t i = node.begin; i < node.end; ++i) {
      const std::size_t idx = order_[i];
      const std::pair<double, std::size_t> cand{squared_distance(q, points_[idx]), idx};
      if (heap.size() < k) {
        heap.push_back(cand);
        std::push_heap(heap.begin(), heap.end(), better);
      } else if (better(cand, heap.front())) {
        std::pop_heap(heap.begin(), heap.end(), better);
        heap.back() = cand;
        std::push_heap(heap.begin(), heap.end(), better);
      }
    }
    return;
  }

  const double delta = q[node.axis] - node.split;
  const std::int32_t near = delta < 0.0 ? node.left : node.right;
  const std::int32_t far = delta < 0.0 ? node.right : node.left;
  search(near, q, k, heap);
  // The far side may still hold an equal-distance point with a lower index,
  // so only prune on a strictly larger plane distance.
  if (heap.size() < k || delta * delta <= heap.front().first) {
    search(far, q, k, heap);
  }
}

void SpatialIndex::query(const Vec3& q, std::size_t k, std::vector<Neighbor>& out) const {
  require(k >= 1, ErrorCode::InvalidArgument, "k must be at least 1");
  require(!points_.empty(), ErrorCode::EmptyIndex, "query on an empty index");
  require(is_finite(q), ErrorCode::NonFiniteInput, "non-finite query point");

  std::vector<std::pair<double, std::size_t>> heap;
  heap.reserve(k);
  search(0, q, k, heap);
  std::sort(heap.begin(), heap.end(), better);

  out.resize(heap.size());
  for (std::size_t i = 0; i < heap.size(); ++i) {
    out[i] = Neighbor{heap[i].second, std::sqrt(heap[i].first)};
  }
}

std::vector<Neighbor> SpatialIndex::query(const Vec3& q, std::size_t k) const {
  std::vector<Neighbor> out;
  query(q, k, out);
  return out;
}

Neighbor SpatialIndex::nearest(const Vec3& q) const {
  std::vector<Neighbor> out;
  query(q, 1, out);
  return out[0];
}

}  // namespace dpf
