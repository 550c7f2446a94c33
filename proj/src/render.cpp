#include "render.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "error.hpp"
#include "normals.hpp"
#include "rng.hpp"

namespace dpf {

CameraFrame make_frame(const Camera& cam) {
  require(cam.width > 0 && cam.height > 0, ErrorCode::InvalidArgument, "empty camera resolution");
  require(cam.view_half_extent > 0.0, ErrorCode::InvalidArgument, "view extent must be positive");
  const Vec3 gaze = cam.target - cam.position;
  require(norm(gaze) > 1e-12, ErrorCode::DegenerateBounds, "camera position equals its target");
  const Vec3 forward = normalized(gaze);

  Vec3 hint = cam.up_hint;
  if (norm(hint) < 1e-12 || std::abs(dot(normalized(hint), forward)) > 0.999) hint = Vec3{0, 1, 0};
  if (std::abs(dot(normalized(hint), forward)) > 0.999) hint = Vec3{1, 0, 0};

  const Vec3 back = -forward;
  const Vec3 right = normalized(cross(hint, back));
  const Vec3 up = cross(back, right);
  return CameraFrame{cam.position, right, up, forward, cam.width, cam.height, cam.view_half_extent};
}

void CameraFrame::project(const Vec3& p, double& px, double& py, double& depth) const {
  const Vec3 d = p - origin;
  const double u = dot(d, right);
  const double v = dot(d, up);
  depth = dot(d, forward);
  px = (u / (2.0 * view_half_extent) + 0.5) * static_cast<double>(width);
  py = (0.5 - v / (2.0 * view_half_extent)) * static_cast<double>(height);
}

Vec3 CameraFrame::to_camera(const Vec3& v) const {
  return {dot(v, right), dot(v, up), dot(v, -forward)};
}

Camera sample_camera(std::uint64_t seed, const Aabb& bounds, std::size_t resolution) {
  const double r = bounds.radius();
  require(std::isfinite(r) && r > 0.0, ErrorCode::DegenerateBounds,
          "scene bounds have zero or non-finite radius");
  Rng rng(derive_seed(seed, 0x63616Dull));
  const Vec3 dir = rng.unit_vector();
  Camera cam;
  cam.position = bounds.center() + dir * (1.5 * r);
  cam.target = bounds.center();
  cam.width = cam.height = resolution;
  cam.view_half_extent = 1.1 * r;
  return cam;
}

NormalImage rasterize_mesh_normals(const TriMesh& mesh, const Camera& cam) {
  require(!mesh.faces.empty(), ErrorCode::EmptyMesh, "cannot rasterize a mesh without faces");
  const CameraFrame frame = make_frame(cam);

  const std::vector<Vec3>& normals =
      mesh.has_vertex_normals() ? mesh.vertex_normals : vertex_normals(mesh);

  const std::size_t v = mesh.vertices.size();
  std::vector<double> px(v), py(v), depth(v);
  std::vector<Vec3> cam_normals(v);
  for (std::size_t i = 0; i < v; ++i) {
    frame.project(mesh.vertices[i], px[i], py[i], depth[i]);
    cam_normals[i] = frame.to_camera(normals[i]);
  }

  NormalImage img;
  img.width = cam.width;
  img.height = cam.height;
  img.data.assign(3 * img.width * img.height, 0.0);
  img.mask.assign(img.width * img.height, 0);
  std::vector<double> zbuf(img.width * img.height, std::numeric_limits<double>::infinity());

  for (const Face& f : mesh.faces) {
    const double x0 = px[f[0]], y0 = py[f[0]];
    const double x1 = px[f[1]], y1 = py[f[1]];
    const double x2 = px[f[2]], y2 = py[f[2]];
    const double area = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0);
    if (area == 0.0) continue;

    const int min_x = std::max(0, static_cast<int>(std::floor(std::min({x0, x1, x2}) - 0.5)));
    const int max_x = std::min(static_cast<int>(img.width) - 1,
                               static_cast<int>(std::ceil(std::max({x0, x1, x2}) - 0.5)));
    const int min_y = std::max(0, static_cast<int>(std::floor(std::min({y0, y1, y2}) - 0.5)));
    const int max_y = std::min(static_cast<int>(img.height) - 1,
                               static_cast<int>(std::ceil(std::max({y0, y1, y2}) - 0.5)));

    for (int iy = min_y; iy <= max_y; ++iy) {
      for (int ix = min_x; ix <= max_x; ++ix) {
        const double cx = ix + 0.5;
        const double cy = iy + 0.5;
        const double w0 = ((x1 - cx) * (y2 - cy) - (x2 - cx) * (y1 - cy)) / area;
        const double w1 = ((x2 - cx) * (y0 - cy) - (x0 - cx) * (y2 - cy)) / area;
        const double w2 = 1.0 - w0 - w1;
        if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) continue;

        const double z = w0 * depth[f[0]] + w1 * depth[f[1]] + w2 * depth[f[2]];
        const std::size_t at = static_cast<std::size_t>(iy) * img.width + ix;
        if (z < zbuf[at]) {
          zbuf[at] = z;
          Vec3 n = cam_normals[f[0]] * w0 + cam_normals[f[1]] * w1 + cam_normals[f[2]] * w2;
          const double len = norm(n);
          if (len > 1e-12) n = n / len;
          img.set_pixel(ix, iy, n);
          img.mask[at] = 1;
        }
      }
    }
  }
  return img;
}

namespace {

struct SplatEntry {
  std::uint64_t pixel;
  double depth;
  std::uint32_t point;
  double weight;
};

}  // namespace

NormalImage splat_point_normals(const PointSet& points, const Camera& cam,
                                const SplatOptions& options, SplatPlan* plan_out) {
  require(options.radius_px >= 0.5, ErrorCode::InvalidArgument, "splat radius must be >= 0.5 px");
  require(options.tau > 0.0, ErrorCode::InvalidArgument, "softmin temperature must be positive");
  require(options.depth_k >= 1, ErrorCode::InvalidArgument, "depth_k must be >= 1");
  const CameraFrame frame = make_frame(cam);

  NormalImage img;
  img.width = cam.width;
  img.height = cam.height;
  img.data.assign(3 * img.width * img.height, 0.0);
  img.mask.assign(img.width * img.height, 0);
  if (plan_out) {
    plan_out->width = img.width;
    plan_out->height = img.height;
    plan_out->point_count = points.size();
    plan_out->pixels.clear();
  }

  std::vector<SplatEntry> entries;
  const double r = options.radius_px;
  for (std::size_t i = 0; i < points.size(); ++i) {
    double px, py, depth;
    frame.project(points.positions[i], px, py, depth);
    const int min_x = std::max(0, static_cast<int>(std::floor(px - r - 0.5)));
    const int max_x = std::min(static_cast<int>(img.width) - 1, static_cast<int>(std::ceil(px + r - 0.5)));
    const int min_y = std::max(0, static_cast<int>(std::floor(py - r - 0.5)));
    const int max_y = std::min(static_cast<int>(img.height) - 1, static_cast<int>(std::ceil(py + r - 0.5)));
    for (int iy = min_y; iy <= max_y; ++iy) {
      for (int ix = min_x; ix <= max_x; ++ix) {
        const double dx = (ix + 0.5) - px;
        const double dy = (iy + 0.5) - py;
        const double d2 = dx * dx + dy * dy;
        if (d2 > r * r) continue;
        const double w = 1.0 - d2 / (r * r);
        if (w <= 0.0) continue;
        entries.push_back(SplatEntry{static_cast<std::uint64_t>(iy) * img.width + ix, depth,
                                     static_cast<std::uint32_t>(i), w});
      }
    }
  }

  // Ordering on (pixel, depth, position, normal) keeps the result invariant
  // under permutation of the input points.
  std::sort(entries.begin(), entries.end(), [&](const SplatEntry& a, const SplatEntry& b) {
    if (a.pixel != b.pixel) return a.pixel < b.pixel;
    if (a.depth != b.depth) return a.depth < b.depth;
    const Vec3& pa = points.positions[a.point];
    const Vec3& pb = points.positions[b.point];
    if (pa.x != pb.x) return pa.x < pb.x;
    if (pa.y != pb.y) return pa.y < pb.y;
    if (pa.z != pb.z) return pa.z < pb.z;
    const Vec3& na = points.normals[a.point];
    const Vec3& nb = points.normals[b.point];
    if (na.x != nb.x) return na.x < nb.x;
    if (na.y != nb.y) return na.y < nb.y;
    return na.z < nb.z;
  });

  std::size_t begin = 0;
  while (begin < entries.size()) {
    std::size_t end = begin;
    while (end < entries.size() && entries[end].pixel == entries[begin].pixel) ++end;

    const std::size_t take = std::min(options.depth_k, end - begin);
    const double depth_min = entries[begin].depth;
    double total = 0.0;
    for (std::size_t i = begin; i < begin + take; ++i) {
      total += entries[i].weight * std::exp(-(entries[i].depth - depth_min) / options.tau);
    }
    if (total > 0.0) {
      const std::size_t pixel = entries[begin].pixel;
      SplatPixel plan_pixel;
      plan_pixel.x = static_cast<std::uint32_t>(pixel % img.width);
      plan_pixel.y = static_cast<std::uint32_t>(pixel / img.width);
      Vec3 value{0, 0, 0};
      for (std::size_t i = begin; i < begin + take; ++i) {
        const double w =
            entries[i].weight * std::exp(-(entries[i].depth - depth_min) / options.tau) / total;
        value += points.normals[entries[i].point] * w;
        plan_pixel.contributors.emplace_back(entries[i].point, w);
      }
      img.set_pixel(plan_pixel.x, plan_pixel.y, value);
      img.mask[pixel] = 1;
      if (plan_out) plan_out->pixels.push_back(std::move(plan_pixel));
    }
    begin = end;
  }
  return img;
}

double image_normal_loss(const NormalImage& gt, const NormalImage& pred) {
  require(gt.width == pred.width && gt.height == pred.height, ErrorCode::ResolutionMismatch,
          "image resolutions differ: " + std::to_string(gt.width) + "x" + std::to_string(gt.height) +
              " vs " + std::to_string(pred.width) + "x" + std::to_string(pred.height));
  const std::size_t pixels = gt.width * gt.height;
  require(pixels > 0, ErrorCode::InvalidArgument, "empty images");
  double acc = 0.0;
  for (std::size_t i = 0; i < 3 * pixels; ++i) {
    const double d = gt.data[i] - pred.data[i];
    acc += d * d;
  }
  return acc / static_cast<double>(pixels);
}

Tensor splat_image_loss_tensor(Tape& tape, const SplatPlan& plan, Tensor normals,
                               const NormalImage& gt) {
  require(gt.width == plan.width && gt.height == plan.height, ErrorCode::ResolutionMismatch,
          "plan and image resolutions differ");
  require(tape.shape(normals) == Shape({plan.point_count, 3}), ErrorCode::ShapeMismatch,
          "normals tensor does not match the splat plan");

  const std::size_t p = plan.pixels.size();
  const std::size_t total_pixels = plan.width * plan.height;

  // Constant part: pixels the splat never touches compare against zero.
  std::vector<char> covered(total_pixels, 0);
  for (const SplatPixel& px : plan.pixels) covered[px.y * plan.width + px.x] = 1;
  double background = 0.0;
  for (std::size_t i = 0; i < total_pixels; ++i) {
    if (covered[i]) continue;
    for (int c = 0; c < 3; ++c) background += gt.data[3 * i + c] * gt.data[3 * i + c];
  }

  if (p == 0) return tape.scalar_constant(background / static_cast<double>(total_pixels));

  std::size_t max_slots = 0;
  for (const SplatPixel& px : plan.pixels) max_slots = std::max(max_slots, px.contributors.size());

  Tensor pred{};
  for (std::size_t s = 0; s < max_slots; ++s) {
    std::vector<std::uint32_t> idx(p, 0);
    std::vector<double> w(3 * p, 0.0);
    for (std::size_t i = 0; i < p; ++i) {
      if (s < plan.pixels[i].contributors.size()) {
        idx[i] = plan.pixels[i].contributors[s].first;
        const double wi = plan.pixels[i].contributors[s].second;
        w[3 * i] = w[3 * i + 1] = w[3 * i + 2] = wi;
      }
    }
    Tensor term = tape.mul(tape.gather_rows(normals, std::move(idx)),
                           tape.constant({p, 3}, std::move(w)));
    pred = pred.valid() ? tape.add(pred, term) : term;
  }

  std::vector<double> gt_fg(3 * p);
  for (std::size_t i = 0; i < p; ++i) {
    const Vec3 v = gt.pixel(plan.pixels[i].x, plan.pixels[i].y);
    gt_fg[3 * i] = v.x;
    gt_fg[3 * i + 1] = v.y;
    gt_fg[3 * i + 2] = v.z;
  }
  const Tensor diff = tape.sub(tape.constant({p, 3}, std::move(gt_fg)), pred);
  const Tensor fg = tape.smul(tape.sum(tape.square(diff)), 1.0 / static_cast<double>(total_pixels));
  return tape.add(fg, tape.scalar_constant(background / static_cast<double>(total_pixels)));
}

}  // namespace dpf
