#pragma once

#include <string>
#include <vector>

#include "config.hpp"
#include "field.hpp"
#include "losses.hpp"
#include "types.hpp"

namespace dpf {

// Uniform scale plus translation mapping a scene into a unit bounding box
// centered at the origin. Fitting runs in local coordinates; results are
// mapped back, with displacements scaled rather than positions re-rounded so
// an identity field reproduces its input bitwise.
struct SceneTransform {
  Vec3 center{0, 0, 0};
  double scale = 1.0;

  Vec3 to_local(const Vec3& p) const { return (p - center) * scale; }
  Vec3 to_world(const Vec3& p) const { return p * (1.0 / scale) + center; }
  Vec3 displacement_to_world(const Vec3& d) const { return d * (1.0 / scale); }
};

// Derived from the canonical geometry alone so every consumer of a fitted
// field can reconstruct the exact transform from the same input file.
SceneTransform fit_transform(const std::vector<Vec3>& points, bool enabled);

// Optimizes positions and normals of an area-uniform sample of `gt` against
// the surface objective with a fresh ground-truth sample and camera per step.
PointSet fit_static(const TriMesh& gt, std::size_t n_points, const FitConfig& config,
                    const std::string& log_path = "");

// Fits one residual deformation field from the canonical set to the target
// frame. With correspondences the surface term is off for the first half of
// the steps and ramps in over the following quarter; without them the
// keypoint term is dropped and the surface term is active throughout.
DeformationField fit_deformation(const PointSet& canonical, const Frame& target,
                                 const CorrespondenceSet* correspondences, const FitConfig& config,
                                 const std::string& log_path = "");

// One dedicated field per target frame, all fitted from frame 0.
DynamicFieldSet fit_sequence(const DynamicScene& scene,
                             const std::vector<CorrespondenceSet>& correspondences,
                             const FitConfig& config);

// Deforms a scan to the pose encoded by the body correspondences, using only
// the keypoint and isometry terms, then transfers normals through the scan's
// own connectivity.
TriMesh animate(const TriMesh& canonical_scan, const CorrespondenceSet& body_pairs,
                const FitConfig& config, const std::string& log_path = "");

// Index of the training body closest to the target by mean vertex distance;
// ties go to the lowest index.
std::size_t nearest_canonical_frame(const std::vector<Vec3>& target_body,
                                    const std::vector<std::vector<Vec3>>& training_bodies);

struct InterpolationReport {
  std::vector<double> gammas;
  std::vector<std::vector<Vec3>> positions;  // world coordinates, one array per gamma
  std::vector<double> iso;                   // isometry loss per gamma (diagnostic)
};

// Partially applies a fitted field at each gamma.
InterpolationReport interpolate_sequence(const DeformationField& field, const PointSet& canonical,
                                         const std::vector<double>& gammas,
                                         const FitConfig& config);

// Applies a fitted field to world-space canonical positions, rederiving the
// fit-time normalization from the canonical bounds.
std::vector<Vec3> apply_field_world(const DeformationField& field,
                                    const std::vector<Vec3>& canonical_world, double gamma,
                                    bool normalize);

PointSet frame_as_pointset(const Frame& frame);

}  // namespace dpf
