#pragma once

#include <optional>
#include <vector>

#include "field.hpp"
#include "render.hpp"
#include "tape.hpp"
#include "types.hpp"

namespace dpf {

struct LossWeights {
  double lambda_cd = 1e4;
  double lambda_n = 1.0;
  double lambda_ni = 10.0;
  double lambda_s = 1.0;
  double lambda_iso = 0.1;
  // Late-phase keypoint weight. Guided fits start at 1 and ramp here; the
  // anchor has to outweigh the Chamfer coverage noise once the surface term
  // is active, otherwise symmetric shapes drift along their isometry group.
  double lambda_v = 1e3;

  void validate() const;
};

struct Correspondence {
  Vec3 source;  // canonical-frame keypoint
  Vec3 target;  // matching target-frame keypoint
};

struct CorrespondenceSet {
  std::vector<Correspondence> pairs;

  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }
  void validate() const;
};

// ---------------------------------------------------------------------------
// Chamfer + normal consistency

struct ChamferValue {
  double cd = 0.0;  // sum of the two directional means of squared distances
  double n = 0.0;   // pooled mean of 1 - |cos| over both directions
};

// Symmetric Chamfer discrepancy plus orientation-agnostic normal consistency.
ChamferValue chamfer_loss(const PointSet& x, const PointSet& y);

struct ChamferTensors {
  Tensor cd;
  Tensor n;
};

// Tape variant: gradients flow to x positions (through nearest-neighbor
// assignments held fixed per evaluation) and to x normals; y is constant.
// x_nrm may be invalid to skip the normal term.
ChamferTensors chamfer_loss_tensor(Tape& tape, Tensor x_pos, Tensor x_nrm, const PointSet& y);

// ---------------------------------------------------------------------------
// As-isometric-as-possible regularizer

// Neighbor index lists over the canonical set: the k nearest neighbors of each
// point, excluding the point itself.
std::vector<std::vector<std::uint32_t>> build_neighborhoods(const std::vector<Vec3>& canonical,
                                                            std::size_t k);

// Flattened (i, j) pairs with frozen canonical distances. Distances use
// sqrt(d^2 + 1e-12), matching the tape's sqrt floor.
struct IsoPairs {
  std::vector<std::uint32_t> src;
  std::vector<std::uint32_t> dst;
  std::vector<double> canonical_distance;

  std::size_t size() const { return src.size(); }
};

IsoPairs build_iso_pairs(const std::vector<Vec3>& canonical,
                         const std::vector<std::vector<std::uint32_t>>& neighbor_lists);
IsoPairs build_iso_pairs(const std::vector<Vec3>& canonical, std::size_t k);

// Mean absolute change of neighbor distances between canonical and deformed.
double iso_loss(const IsoPairs& pairs, const std::vector<Vec3>& deformed);
double iso_loss(const std::vector<Vec3>& canonical, const std::vector<Vec3>& deformed,
                const std::vector<std::vector<std::uint32_t>>& neighbor_lists);
Tensor iso_loss_tensor(Tape& tape, const IsoPairs& pairs, Tensor deformed_pos);

// Mean over gammas of the isometric loss at partially applied deformations
// x + gamma * g(x).
double iso_loss_gamma(const DeformationField& field, const std::vector<Vec3>& canonical,
                      const std::vector<std::vector<std::uint32_t>>& neighbor_lists,
                      const std::vector<double>& gammas);
Tensor iso_loss_gamma_tensor(Tape& tape, const IsoPairs& pairs, Tensor canonical_const,
                             Tensor residual, const std::vector<double>& gammas);

// ---------------------------------------------------------------------------
// Keypoint guidance

// Mean L1 distance between warped sources and their targets.
double keypoint_loss(const DeformationField& field, const CorrespondenceSet& correspondences);
Tensor keypoint_loss_tensor(Tape& tape, const FieldParams& params, double omega0,
                            const CorrespondenceSet& correspondences);

// ---------------------------------------------------------------------------
// Surface loss (Chamfer + normals + image-space normals)

struct SurfaceLossOptions {
  std::uint64_t sample_seed = 0;
  std::size_t sample_count = 10000;
  std::uint64_t camera_seed = 0;
  std::size_t resolution = 256;
  SplatOptions splat;
};

struct SurfaceLossTensors {
  Tensor total;
  Tensor cd;
  Tensor n;
  Tensor ni;  // invalid when the image term is off
};

// Weighted Chamfer + normal + image-normal objective against a fresh sample of
// the ground-truth mesh. `use_renderer` gates the image term; requesting
// lambda_ni > 0 without it is an error.
SurfaceLossTensors surface_loss_tensor(Tape& tape, Tensor x_pos, Tensor x_nrm, const TriMesh& gt,
                                       const LossWeights& weights, bool use_renderer,
                                       const SurfaceLossOptions& options);

// Same objective against a fixed target point set (no resampling, image term off).
SurfaceLossTensors surface_loss_tensor(Tape& tape, Tensor x_pos, Tensor x_nrm,
                                       const PointSet& target, const LossWeights& weights);

struct SurfaceLossValue {
  double total = 0.0, cd = 0.0, n = 0.0, ni = 0.0;
};

SurfaceLossValue surface_loss(const PointSet& x, const TriMesh& gt, const LossWeights& weights,
                              bool use_renderer, const SurfaceLossOptions& options);

// ---------------------------------------------------------------------------
// Combined objective over a deformation field

struct CombinedLossOptions {
  std::size_t iso_k = 5;
  SurfaceLossOptions surface;
};

struct CombinedLossTensors {
  Tensor total;
  double cd = 0.0, n = 0.0, ni = 0.0, iso = 0.0, v = 0.0;
};

// lambda_s * surface + lambda_iso * iso + lambda_v * keypoint, evaluated on the
// warped canonical set. The canonical normals ride along as constants.
CombinedLossTensors combined_loss_tensor(Tape& tape, const FieldParams& params, double omega0,
                                         const PointSet& canonical, const Frame& target,
                                         const CorrespondenceSet* correspondences,
                                         const LossWeights& weights, const IsoPairs& iso_pairs,
                                         const CombinedLossOptions& options);

struct CombinedLossValue {
  double total = 0.0, cd = 0.0, n = 0.0, ni = 0.0, iso = 0.0, v = 0.0;
};

CombinedLossValue combined_loss(const DeformationField& field, const PointSet& canonical,
                                const Frame& target, const CorrespondenceSet* correspondences,
                                const LossWeights& weights, const CombinedLossOptions& options);

}  // namespace dpf
