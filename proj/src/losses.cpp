#include "losses.hpp"

#include <cmath>

#include "kdtree.hpp"
#include "sampling.hpp"

namespace dpf {

namespace {

std::vector<std::uint32_t> nearest_indices(const SpatialIndex& index,
                                           const std::vector<Vec3>& queries) {
  std::vector<std::uint32_t> out(queries.size());
  std::vector<Neighbor> hit;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    index.query(queries[i], 1, hit);
    out[i] = static_cast<std::uint32_t>(hit[0].index);
  }
  return out;
}

}  // namespace

void LossWeights::validate() const {
  for (double v : {lambda_cd, lambda_n, lambda_ni, lambda_s, lambda_iso, lambda_v}) {
    require(std::isfinite(v) && v >= 0.0, ErrorCode::InvalidArgument,
            "loss weights must be finite and non-negative");
  }
}

void CorrespondenceSet::validate() const {
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    require(is_finite(pairs[i].source) && is_finite(pairs[i].target), ErrorCode::NonFiniteValue,
            "non-finite correspondence at index " + std::to_string(i));
  }
}

// ---------------------------------------------------------------------------

ChamferValue chamfer_loss(const PointSet& x, const PointSet& y) {
  require(!x.empty() && !y.empty(), ErrorCode::EmptySet, "chamfer needs two non-empty sets");
  const SpatialIndex index_x(x.positions);
  const SpatialIndex index_y(y.positions);
  const std::vector<std::uint32_t> nn_xy = nearest_indices(index_y, x.positions);
  const std::vector<std::uint32_t> nn_yx = nearest_indices(index_x, y.positions);

  // Orientation-agnostic normal discrepancy: half the squared distance to the
  // better-signed neighbor normal. For unit normals this equals 1 - |cos| and
  // is exactly zero for identical vectors.
  double cd_x = 0.0, n_x = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    cd_x += squared_distance(x.positions[i], y.positions[nn_xy[i]]);
    const Vec3& nb = y.normals[nn_xy[i]];
    const double s = dot(x.normals[i], nb) < 0.0 ? -1.0 : 1.0;
    n_x += 0.5 * squared_distance(x.normals[i], nb * s);
  }
  double cd_y = 0.0, n_y = 0.0;
  for (std::size_t j = 0; j < y.size(); ++j) {
    cd_y += squared_distance(y.positions[j], x.positions[nn_yx[j]]);
    const Vec3& nb = x.normals[nn_yx[j]];
    const double s = dot(y.normals[j], nb) < 0.0 ? -1.0 : 1.0;
    n_y += 0.5 * squared_distance(y.normals[j], nb * s);
  }

  ChamferValue out;
  out.cd = cd_x / static_cast<double>(x.size()) + cd_y / static_cast<double>(y.size());
  out.n = (n_x + n_y) / static_cast<double>(x.size() + y.size());
  return out;
}

ChamferTensors chamfer_loss_tensor(Tape& tape, Tensor x_pos, Tensor x_nrm, const PointSet& y) {
  require(!y.empty(), ErrorCode::EmptySet, "chamfer target set is empty");
  const Shape& xs = tape.shape(x_pos);
  require(xs.size() == 2 && xs[1] == 3 && xs[0] > 0, ErrorCode::ShapeMismatch,
          "x positions must be [n,3] with n > 0");

  const std::vector<Vec3> x_now = unflatten(tape.value(x_pos));
  const SpatialIndex index_x(x_now);
  const SpatialIndex index_y(y.positions);
  std::vector<std::uint32_t> nn_xy = nearest_indices(index_y, x_now);
  std::vector<std::uint32_t> nn_yx = nearest_indices(index_x, y.positions);

  const std::size_t nx = x_now.size();
  const std::size_t ny = y.size();
  const Tensor y_pos = tape.constant({ny, 3}, flatten(y.positions));

  const Tensor fwd = tape.squared_row_distance(x_pos, tape.gather_rows(y_pos, nn_xy));
  const Tensor bwd = tape.squared_row_distance(tape.gather_rows(x_pos, nn_yx), y_pos);
  const Tensor cd = tape.add(tape.mean(fwd), tape.mean(bwd));

  ChamferTensors out;
  out.cd = cd;
  if (x_nrm.valid()) {
    // Same discrepancy as the plain path: half squared distance to the
    // better-signed neighbor normal, with the orientation signs held fixed per
    // evaluation like the nearest-neighbor assignments.
    const std::vector<Vec3> x_normals_now = unflatten(tape.value(x_nrm));
    std::vector<double> signed_xy(3 * nx);
    for (std::size_t i = 0; i < nx; ++i) {
      const Vec3& nb = y.normals[nn_xy[i]];
      const double s = dot(x_normals_now[i], nb) < 0.0 ? -1.0 : 1.0;
      signed_xy[3 * i] = s * nb.x;
      signed_xy[3 * i + 1] = s * nb.y;
      signed_xy[3 * i + 2] = s * nb.z;
    }
    std::vector<double> signed_yx(3 * ny);
    for (std::size_t j = 0; j < ny; ++j) {
      const double s = dot(y.normals[j], x_normals_now[nn_yx[j]]) < 0.0 ? -1.0 : 1.0;
      signed_yx[3 * j] = s * y.normals[j].x;
      signed_yx[3 * j + 1] = s * y.normals[j].y;
      signed_yx[3 * j + 2] = s * y.normals[j].z;
    }
    const Tensor term_x = tape.squared_row_distance(
        x_nrm, tape.constant({nx, 3}, std::move(signed_xy)));
    const Tensor term_y = tape.squared_row_distance(
        tape.gather_rows(x_nrm, std::move(nn_yx)), tape.constant({ny, 3}, std::move(signed_yx)));
    out.n = tape.smul(tape.add(tape.sum(term_x), tape.sum(term_y)),
                      0.5 / static_cast<double>(nx + ny));
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<std::vector<std::uint32_t>> build_neighborhoods(const std::vector<Vec3>& canonical,
                                                            std::size_t k) {
  require(k >= 1, ErrorCode::InvalidArgument, "neighborhood size must be >= 1");
  require(canonical.size() >= 2, ErrorCode::EmptyNeighborhood,
          "need at least two points to build neighborhoods");
  const SpatialIndex index(canonical);
  const std::size_t want = std::min(k, canonical.size() - 1);

  std::vector<std::vector<std::uint32_t>> lists(canonical.size());
  std::vector<Neighbor> hits;
  for (std::size_t i = 0; i < canonical.size(); ++i) {
    index.query(canonical[i], want + 1, hits);
    auto& list = lists[i];
    list.reserve(want);
    for (const Neighbor& h : hits) {
      if (h.index == i) continue;
      if (list.size() == want) break;
      list.push_back(static_cast<std::uint32_t>(h.index));
    }
  }
  return lists;
}

IsoPairs build_iso_pairs(const std::vector<Vec3>& canonical,
                         const std::vector<std::vector<std::uint32_t>>& neighbor_lists) {
  require(neighbor_lists.size() == canonical.size(), ErrorCode::LengthMismatch,
          "neighbor list count does not match point count");
  IsoPairs pairs;
  for (std::size_t i = 0; i < neighbor_lists.size(); ++i) {
    for (std::uint32_t j : neighbor_lists[i]) {
      require(j < canonical.size(), ErrorCode::IndexOutOfRange, "neighbor index out of range");
      pairs.src.push_back(static_cast<std::uint32_t>(i));
      pairs.dst.push_back(j);
      pairs.canonical_distance.push_back(
          std::sqrt(squared_distance(canonical[i], canonical[j]) + Tape::kSqrtEpsilon));
    }
  }
  require(!pairs.src.empty(), ErrorCode::EmptyNeighborhood, "no neighbor pairs");
  return pairs;
}

IsoPairs build_iso_pairs(const std::vector<Vec3>& canonical, std::size_t k) {
  return build_iso_pairs(canonical, build_neighborhoods(canonical, k));
}

double iso_loss(const IsoPairs& pairs, const std::vector<Vec3>& deformed) {
  require(pairs.size() > 0, ErrorCode::EmptyNeighborhood, "no neighbor pairs");
  double acc = 0.0;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    require(pairs.src[p] < deformed.size() && pairs.dst[p] < deformed.size(),
            ErrorCode::LengthMismatch, "deformed set smaller than the neighbor index range");
    const double d = std::sqrt(
        squared_distance(deformed[pairs.src[p]], deformed[pairs.dst[p]]) + Tape::kSqrtEpsilon);
    acc += std::abs(pairs.canonical_distance[p] - d);
  }
  return acc / static_cast<double>(pairs.size());
}

double iso_loss(const std::vector<Vec3>& canonical, const std::vector<Vec3>& deformed,
                const std::vector<std::vector<std::uint32_t>>& neighbor_lists) {
  require(canonical.size() == deformed.size(), ErrorCode::LengthMismatch,
          "canonical and deformed sizes differ");
  return iso_loss(build_iso_pairs(canonical, neighbor_lists), deformed);
}

Tensor iso_loss_tensor(Tape& tape, const IsoPairs& pairs, Tensor deformed_pos) {
  require(pairs.size() > 0, ErrorCode::EmptyNeighborhood, "no neighbor pairs");
  const Tensor a = tape.gather_rows(deformed_pos, pairs.src);
  const Tensor b = tape.gather_rows(deformed_pos, pairs.dst);
  const Tensor d = tape.sqrt_eps(tape.squared_row_distance(a, b));
  const Tensor ref = tape.constant({pairs.size()}, pairs.canonical_distance);
  return tape.mean(tape.abs(tape.sub(ref, d)));
}

double iso_loss_gamma(const DeformationField& field, const std::vector<Vec3>& canonical,
                      const std::vector<std::vector<std::uint32_t>>& neighbor_lists,
                      const std::vector<double>& gammas) {
  require(!gammas.empty(), ErrorCode::InvalidArgument, "gamma list is empty");
  const IsoPairs pairs = build_iso_pairs(canonical, neighbor_lists);
  const std::vector<Vec3> residuals = field_residuals(field, canonical);
  double acc = 0.0;
  std::vector<Vec3> moved(canonical.size());
  for (double gamma : gammas) {
    require(std::isfinite(gamma), ErrorCode::NonFiniteInput, "gamma must be finite");
    for (std::size_t i = 0; i < canonical.size(); ++i) moved[i] = canonical[i] + residuals[i] * gamma;
    acc += iso_loss(pairs, moved);
  }
  return acc / static_cast<double>(gammas.size());
}

Tensor iso_loss_gamma_tensor(Tape& tape, const IsoPairs& pairs, Tensor canonical_const,
                             Tensor residual, const std::vector<double>& gammas) {
  require(!gammas.empty(), ErrorCode::InvalidArgument, "gamma list is empty");
  Tensor acc{};
  for (double gamma : gammas) {
    require(std::isfinite(gamma), ErrorCode::NonFiniteInput, "gamma must be finite");
    const Tensor moved = tape.add(canonical_const, tape.smul(residual, gamma));
    const Tensor term = iso_loss_tensor(tape, pairs, moved);
    acc = acc.valid() ? tape.add(acc, term) : term;
  }
  return tape.smul(acc, 1.0 / static_cast<double>(gammas.size()));
}

// ---------------------------------------------------------------------------

double keypoint_loss(const DeformationField& field, const CorrespondenceSet& correspondences) {
  require(!correspondences.empty(), ErrorCode::EmptyCorrespondences, "no correspondence pairs");
  std::vector<Vec3> sources(correspondences.size());
  for (std::size_t i = 0; i < sources.size(); ++i) sources[i] = correspondences.pairs[i].source;
  const std::vector<Vec3> moved = deform(field, sources);
  double acc = 0.0;
  for (std::size_t i = 0; i < moved.size(); ++i) {
    const Vec3 d = correspondences.pairs[i].target - moved[i];
    acc += std::abs(d.x) + std::abs(d.y) + std::abs(d.z);
  }
  return acc / static_cast<double>(correspondences.size());
}

Tensor keypoint_loss_tensor(Tape& tape, const FieldParams& params, double omega0,
                            const CorrespondenceSet& correspondences) {
  require(!correspondences.empty(), ErrorCode::EmptyCorrespondences, "no correspondence pairs");
  const std::size_t n = correspondences.size();
  std::vector<double> src(3 * n), dst(3 * n);
  for (std::size_t i = 0; i < n; ++i) {
    const Correspondence& c = correspondences.pairs[i];
    src[3 * i] = c.source.x;
    src[3 * i + 1] = c.source.y;
    src[3 * i + 2] = c.source.z;
    dst[3 * i] = c.target.x;
    dst[3 * i + 1] = c.target.y;
    dst[3 * i + 2] = c.target.z;
  }
  const Tensor sources = tape.constant({n, 3}, std::move(src));
  const Tensor targets = tape.constant({n, 3}, std::move(dst));
  const Tensor pred = tape.add(sources, field_residual_tensor(tape, params, sources, omega0));
  return tape.smul(tape.sum(tape.abs(tape.sub(targets, pred))), 1.0 / static_cast<double>(n));
}

// ---------------------------------------------------------------------------

SurfaceLossTensors surface_loss_tensor(Tape& tape, Tensor x_pos, Tensor x_nrm, const TriMesh& gt,
                                       const LossWeights& weights, bool use_renderer,
                                       const SurfaceLossOptions& options) {
  weights.validate();
  require(!gt.faces.empty(), ErrorCode::EmptyMesh, "ground-truth mesh has no faces");
  require(weights.lambda_ni == 0.0 || use_renderer, ErrorCode::MissingRenderer,
          "image normal term requested without a renderer");

  const PointSet gt_sample = sample_surface(gt, options.sample_count, options.sample_seed);
  const ChamferTensors chamfer = chamfer_loss_tensor(tape, x_pos, x_nrm, gt_sample);

  SurfaceLossTensors out;
  out.cd = chamfer.cd;
  out.n = chamfer.n;
  Tensor total = tape.smul(chamfer.cd, weights.lambda_cd);
  if (chamfer.n.valid()) total = tape.add(total, tape.smul(chamfer.n, weights.lambda_n));

  if (weights.lambda_ni > 0.0) {
    const Camera cam = sample_camera(options.camera_seed, bounds_of(gt.vertices), options.resolution);
    const NormalImage gt_image = rasterize_mesh_normals(gt, cam);

    PointSet current;
    const std::vector<double>& pos = tape.value(x_pos);
    const std::vector<double>& nrm = tape.value(x_nrm);
    current.positions = unflatten(pos);
    current.normals = unflatten(nrm);

    SplatPlan plan;
    splat_point_normals(current, cam, options.splat, &plan);
    out.ni = splat_image_loss_tensor(tape, plan, x_nrm, gt_image);
    total = tape.add(total, tape.smul(out.ni, weights.lambda_ni));
  }
  out.total = total;
  return out;
}

SurfaceLossTensors surface_loss_tensor(Tape& tape, Tensor x_pos, Tensor x_nrm,
                                       const PointSet& target, const LossWeights& weights) {
  weights.validate();
  const ChamferTensors chamfer = chamfer_loss_tensor(tape, x_pos, x_nrm, target);
  SurfaceLossTensors out;
  out.cd = chamfer.cd;
  out.n = chamfer.n;
  Tensor total = tape.smul(chamfer.cd, weights.lambda_cd);
  if (chamfer.n.valid()) total = tape.add(total, tape.smul(chamfer.n, weights.lambda_n));
  out.total = total;
  return out;
}

SurfaceLossValue surface_loss(const PointSet& x, const TriMesh& gt, const LossWeights& weights,
                              bool use_renderer, const SurfaceLossOptions& options) {
  require(!x.empty(), ErrorCode::EmptySet, "point set is empty");
  Tape tape;
  const Tensor pos = tape.constant({x.size(), 3}, flatten(x.positions));
  const Tensor nrm = tape.constant({x.size(), 3}, flatten(x.normals));
  const SurfaceLossTensors t = surface_loss_tensor(tape, pos, nrm, gt, weights, use_renderer, options);
  SurfaceLossValue v;
  v.total = tape.scalar_value(t.total);
  v.cd = tape.scalar_value(t.cd);
  v.n = t.n.valid() ? tape.scalar_value(t.n) : 0.0;
  v.ni = t.ni.valid() ? tape.scalar_value(t.ni) : 0.0;
  return v;
}

// ---------------------------------------------------------------------------

CombinedLossTensors combined_loss_tensor(Tape& tape, const FieldParams& params, double omega0,
                                         const PointSet& canonical, const Frame& target,
                                         const CorrespondenceSet* correspondences,
                                         const LossWeights& weights, const IsoPairs& iso_pairs,
                                         const CombinedLossOptions& options) {
  weights.validate();
  require(!canonical.empty(), ErrorCode::EmptySet, "canonical set is empty");
  require(weights.lambda_s > 0.0 || weights.lambda_iso > 0.0 || weights.lambda_v > 0.0,
          ErrorCode::AtLeastOneTerm, "all loss weights are zero");
  if (weights.lambda_v > 0.0) {
    require(correspondences != nullptr && !correspondences->empty(),
            ErrorCode::MissingCorrespondences,
            "keypoint term requested without correspondences");
  }

  const std::size_t n = canonical.size();
  const Tensor canon_pos = tape.constant({n, 3}, flatten(canonical.positions));
  const Tensor residual = field_residual_tensor(tape, params, canon_pos, omega0);
  const Tensor warped = tape.add(canon_pos, residual);

  CombinedLossTensors out;
  Tensor total{};

  if (weights.lambda_s > 0.0) {
    // Warped normals are carried over from the canonical set and treated as
    // constants; position gradients come from the Chamfer term.
    const Tensor warped_nrm = tape.constant({n, 3}, flatten(canonical.normals));
    SurfaceLossTensors surface;
    if (const TriMesh* mesh = std::get_if<TriMesh>(&target)) {
      surface = surface_loss_tensor(tape, warped, warped_nrm, *mesh, weights, true, options.surface);
    } else {
      LossWeights w = weights;
      w.lambda_ni = 0.0;  // no mesh, no ground-truth image
      surface = surface_loss_tensor(tape, warped, warped_nrm, std::get<PointSet>(target), w);
    }
    out.cd = tape.scalar_value(surface.cd);
    out.n = surface.n.valid() ? tape.scalar_value(surface.n) : 0.0;
    out.ni = surface.ni.valid() ? tape.scalar_value(surface.ni) : 0.0;
    const Tensor term = tape.smul(surface.total, weights.lambda_s);
    total = total.valid() ? tape.add(total, term) : term;
  }

  if (weights.lambda_iso > 0.0) {
    const Tensor iso = iso_loss_tensor(tape, iso_pairs, warped);
    out.iso = tape.scalar_value(iso);
    const Tensor term = tape.smul(iso, weights.lambda_iso);
    total = total.valid() ? tape.add(total, term) : term;
  }

  if (weights.lambda_v > 0.0) {
    const Tensor kp = keypoint_loss_tensor(tape, params, omega0, *correspondences);
    out.v = tape.scalar_value(kp);
    const Tensor term = tape.smul(kp, weights.lambda_v);
    total = total.valid() ? tape.add(total, term) : term;
  }

  out.total = total;
  return out;
}

CombinedLossValue combined_loss(const DeformationField& field, const PointSet& canonical,
                                const Frame& target, const CorrespondenceSet* correspondences,
                                const LossWeights& weights, const CombinedLossOptions& options) {
  Tape tape;
  const FieldParams params = field_parameters(tape, field);
  const IsoPairs iso_pairs = weights.lambda_iso > 0.0
                                 ? build_iso_pairs(canonical.positions, options.iso_k)
                                 : IsoPairs{};
  const CombinedLossTensors t = combined_loss_tensor(tape, params, field.omega0, canonical, target,
                                                     correspondences, weights, iso_pairs, options);
  CombinedLossValue v;
  v.total = tape.scalar_value(t.total);
  v.cd = t.cd;
  v.n = t.n;
  v.ni = t.ni;
  v.iso = t.iso;
  v.v = t.v;
  return v;
}

}  // namespace dpf
