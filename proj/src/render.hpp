#pragma once

#include <cstdint>
#include <vector>

#include "tape.hpp"
#include "types.hpp"
#include "vec.hpp"

namespace dpf {

// Orthographic camera looking at `target` from `position`. The film spans
// [-view_half_extent, view_half_extent] in both axes of the image plane.
struct Camera {
  Vec3 position{0, 0, 1};
  Vec3 target{0, 0, 0};
  Vec3 up_hint{0, 0, 1};
  std::size_t width = 256;
  std::size_t height = 256;
  double view_half_extent = 1.0;
};

// Precomputed orthonormal frame plus projection helpers.
struct CameraFrame {
  Vec3 origin, right, up, forward;
  std::size_t width, height;
  double view_half_extent;

  // Continuous pixel coordinates (pixel (i,j) has center (i+0.5, j+0.5)) and
  // depth along the viewing direction.
  void project(const Vec3& p, double& px, double& py, double& depth) const;
  Vec3 to_camera(const Vec3& v) const;  // directions only
};

CameraFrame make_frame(const Camera& cam);

// Camera position drawn uniformly on the sphere of radius 1.5x the bounding
// sphere radius, looking at the scene center.
Camera sample_camera(std::uint64_t seed, const Aabb& bounds, std::size_t resolution = 256);

struct NormalImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> data;       // 3 per pixel, row-major, background (0,0,0)
  std::vector<std::uint8_t> mask; // 1 where covered

  Vec3 pixel(std::size_t x, std::size_t y) const {
    const std::size_t at = 3 * (y * width + x);
    return {data[at], data[at + 1], data[at + 2]};
  }
  void set_pixel(std::size_t x, std::size_t y, const Vec3& v) {
    const std::size_t at = 3 * (y * width + x);
    data[at] = v.x;
    data[at + 1] = v.y;
    data[at + 2] = v.z;
  }
};

// Z-buffered rasterization of camera-space vertex normals. Ground-truth side
// only; not differentiable.
NormalImage rasterize_mesh_normals(const TriMesh& mesh, const Camera& cam);

struct SplatOptions {
  double radius_px = 2.0;
  std::size_t depth_k = 8;  // nearest-in-depth contributors kept per pixel
  double tau = 1e-2;        // depth softmin temperature
};

// Per-pixel contributor list with normalized weights; the weights are
// constants for differentiation purposes.
struct SplatPixel {
  std::uint32_t x = 0;
  std::uint32_t y = 0;
  std::vector<std::pair<std::uint32_t, double>> contributors;  // (point, weight)
};

struct SplatPlan {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t point_count = 0;
  std::vector<SplatPixel> pixels;
};

// Soft point splatting of normals: every point covers pixels within radius_px
// of its projection; pixel values average the depth_k nearest-in-depth
// contributors with weight (1 - (d/r)^2) * exp(-(depth - depth_min)/tau).
NormalImage splat_point_normals(const PointSet& points, const Camera& cam,
                                const SplatOptions& options, SplatPlan* plan_out = nullptr);

// Mean over all pixels of the squared difference between the two images.
double image_normal_loss(const NormalImage& gt, const NormalImage& pred);

// Tape expression of image_normal_loss(gt, splat(normals)) for a fixed plan;
// differentiable with respect to the normals only.
Tensor splat_image_loss_tensor(Tape& tape, const SplatPlan& plan, Tensor normals,
                               const NormalImage& gt);

// 8-bit RGB PNG with values mapped from [-1,1] to [0,255].
void write_normal_image_png(const NormalImage& image, const std::string& path);

}  // namespace dpf
