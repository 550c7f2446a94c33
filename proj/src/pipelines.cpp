#include "pipelines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "fsutil.hpp"
#include "normals.hpp"
#include "optim.hpp"
#include "rng.hpp"
#include "sampling.hpp"

namespace dpf {

namespace {

constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kSampleStream = 2;
constexpr std::uint64_t kCameraStream = 3;
constexpr std::uint64_t kSubsetStream = 4;

struct StepLogger {
  std::string path;
  std::ostringstream rows;

  explicit StepLogger(std::string p) : path(std::move(p)) {
    if (!path.empty()) rows << "step,lr,total,cd,n,ni,iso,v\n";
  }
  void log(std::size_t step, double lr, double total, double cd, double n, double ni, double iso,
           double v) {
    if (path.empty()) return;
    rows << step << ',' << format_double(lr) << ',' << format_double(total) << ','
         << format_double(cd) << ',' << format_double(n) << ',' << format_double(ni) << ','
         << format_double(iso) << ',' << format_double(v) << '\n';
  }
  void flush() {
    if (!path.empty()) write_file_atomic(path, rows.str());
  }
};

void renormalize_rows(std::vector<double>& flat) {
  for (std::size_t i = 0; i + 2 < flat.size(); i += 3) {
    const double len =
        std::sqrt(flat[i] * flat[i] + flat[i + 1] * flat[i + 1] + flat[i + 2] * flat[i + 2]);
    if (len > 1e-12) {
      flat[i] /= len;
      flat[i + 1] /= len;
      flat[i + 2] /= len;
    }
  }
}

PointSet to_local(const PointSet& points, const SceneTransform& xf) {
  PointSet out;
  out.positions.reserve(points.size());
  for (const Vec3& p : points.positions) out.positions.push_back(xf.to_local(p));
  out.normals = points.normals;  // directions survive translation + uniform scale
  return out;
}

TriMesh to_local(const TriMesh& mesh, const SceneTransform& xf) {
  TriMesh out;
  out.vertices.reserve(mesh.vertices.size());
  for (const Vec3& v : mesh.vertices) out.vertices.push_back(xf.to_local(v));
  out.faces = mesh.faces;
  out.vertex_normals = mesh.vertex_normals;
  return out;
}

Frame to_local(const Frame& frame, const SceneTransform& xf) {
  if (const PointSet* ps = std::get_if<PointSet>(&frame)) return to_local(*ps, xf);
  return to_local(std::get<TriMesh>(frame), xf);
}

// Fixed seeded subset of at most `cap` points; identity when the set is small.
PointSet working_subset(const PointSet& points, std::size_t cap, std::uint64_t seed) {
  if (points.size() <= cap) return points;
  std::vector<std::uint32_t> order(points.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<std::uint32_t>(i);
  Rng rng(derive_seed(seed, kSubsetStream));
  for (std::size_t i = 0; i < cap; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(order.size() - i));
    std::swap(order[i], order[j]);
  }
  order.resize(cap);
  std::sort(order.begin(), order.end());
  PointSet out;
  out.positions.reserve(cap);
  out.normals.reserve(cap);
  for (std::uint32_t idx : order) {
    out.positions.push_back(points.positions[idx]);
    out.normals.push_back(points.normals[idx]);
  }
  return out;
}

struct FieldFitSpec {
  const PointSet* canonical = nullptr;  // local coordinates
  const Frame* target = nullptr;        // may be null when lambda_s is always 0
  const CorrespondenceSet* correspondences = nullptr;
  const FitConfig* config = nullptr;
  bool schedule_lambda_s = false;  // guided phase/ramp schedule
  StepLogger* logger = nullptr;
};

DeformationField run_field_fit(const FieldFitSpec& spec) {
  const FitConfig& config = *spec.config;
  const PointSet& canonical = *spec.canonical;

  const bool has_iso = config.weights.lambda_iso > 0.0;
  const IsoPairs iso_pairs =
      has_iso ? build_iso_pairs(canonical.positions, config.k) : IsoPairs{};

  DeformationField field = init_field(config.seed, config.omega0);
  Adam adam(config.lr);
  adam.add_parameters("field.w1", &field.w1);
  adam.add_parameters("field.b1", &field.b1);
  adam.add_parameters("field.w2", &field.w2);
  adam.add_parameters("field.b2", &field.b2);
  adam.add_parameters("field.w3", &field.w3);
  adam.add_parameters("field.b3", &field.b3);
  adam.add_parameters("field.w4", &field.w4);
  adam.add_parameters("field.b4", &field.b4);
  PlateauSchedule schedule(config.lr, config.patience, config.lr_factor, config.lr_min);

  const std::size_t phase1_end =
      spec.schedule_lambda_s
          ? static_cast<std::size_t>(std::floor(config.phase1_frac * static_cast<double>(config.steps)))
          : 0;
  const std::size_t ramp_len =
      spec.schedule_lambda_s
          ? static_cast<std::size_t>(std::floor(config.ramp_frac * static_cast<double>(config.steps)))
          : 0;
  const std::size_t ramp_end = phase1_end + ramp_len;
  // A plateau policy only makes sense once the objective stops changing shape.
  const std::size_t plateau_from = spec.schedule_lambda_s ? ramp_end + 1 : 1;

  CombinedLossOptions options;
  options.iso_k = config.k;
  options.surface.sample_count = config.sample_count;
  options.surface.resolution = config.resolution;
  options.surface.splat = SplatOptions{config.radius_px, config.splat_k, config.tau};

  // Guided schedule: a keypoint-dominated first phase, then a linear ramp of
  // every weight toward its configured value.
  const LossWeights early{config.weights.lambda_cd, config.weights.lambda_n,
                          config.weights.lambda_ni, 0.0, 0.1, 1.0};

  const Frame empty_frame = PointSet{};
  for (std::size_t step = 1; step <= config.steps; ++step) {
    LossWeights weights = config.weights;
    if (spec.correspondences == nullptr) {
      weights.lambda_v = 0.0;
    } else if (spec.schedule_lambda_s) {
      if (step <= phase1_end) {
        weights.lambda_s = early.lambda_s;
        weights.lambda_iso = early.lambda_iso;
        weights.lambda_v = early.lambda_v;
      } else if (step <= ramp_end && ramp_len > 0) {
        const double t = static_cast<double>(step - phase1_end) / static_cast<double>(ramp_len);
        weights.lambda_s = early.lambda_s + t * (config.weights.lambda_s - early.lambda_s);
        weights.lambda_iso = early.lambda_iso + t * (config.weights.lambda_iso - early.lambda_iso);
        weights.lambda_v = early.lambda_v + t * (config.weights.lambda_v - early.lambda_v);
      }
    }

    options.surface.sample_seed = derive_seed(config.seed, kSampleStream * 0x10000 + step);
    options.surface.camera_seed = derive_seed(config.seed, kCameraStream * 0x10000 + step);

    Tape tape;
    const FieldParams params = field_parameters(tape, field);
    const Frame& target = spec.target ? *spec.target : empty_frame;
    const CombinedLossTensors loss =
        combined_loss_tensor(tape, params, config.omega0, canonical, target, spec.correspondences,
                             weights, iso_pairs, options);
    tape.backward(loss.total);
    adam.step(field_gradients(tape, params));

    const double total = tape.scalar_value(loss.total);
    if (spec.logger) {
      spec.logger->log(step, adam.learning_rate(), total, loss.cd, loss.n, loss.ni, loss.iso,
                       loss.v);
    }
    if (step >= plateau_from) adam.set_learning_rate(schedule.update(total));
  }
  return field;
}

}  // namespace

SceneTransform fit_transform(const std::vector<Vec3>& points, bool enabled) {
  SceneTransform xf;
  if (!enabled || points.empty()) return xf;
  const Aabb box = bounds_of(points);
  const Vec3 ext = box.extent();
  const double max_extent = std::max({ext.x, ext.y, ext.z});
  xf.center = box.center();
  xf.scale = max_extent > 0.0 ? 1.0 / max_extent : 1.0;
  return xf;
}

PointSet frame_as_pointset(const Frame& frame) {
  if (const PointSet* ps = std::get_if<PointSet>(&frame)) return *ps;
  const TriMesh& mesh = std::get<TriMesh>(frame);
  PointSet out;
  out.positions = mesh.vertices;
  out.normals = mesh.has_vertex_normals() ? mesh.vertex_normals : vertex_normals(mesh);
  return out;
}

PointSet fit_static(const TriMesh& gt, std::size_t n_points, const FitConfig& config,
                    const std::string& log_path) {
  config.validate();
  gt.validate();
  require(n_points >= 1, ErrorCode::InvalidArgument, "point count must be >= 1");
  require(!gt.faces.empty(), ErrorCode::EmptyMesh, "ground-truth mesh has no faces");

  const SceneTransform xf = fit_transform(gt.vertices, config.normalize);
  const TriMesh local = to_local(gt, xf);

  const PointSet init = sample_surface(local, n_points, derive_seed(config.seed, kInitStream));
  std::vector<double> positions = flatten(init.positions);
  std::vector<double> normals = flatten(init.normals);

  Adam adam(config.lr);
  adam.add_parameters("positions", &positions);
  adam.add_parameters("normals", &normals);
  PlateauSchedule schedule(config.lr, config.patience, config.lr_factor, config.lr_min);
  StepLogger logger(log_path);

  SurfaceLossOptions options;
  options.sample_count = config.sample_count;
  options.resolution = config.resolution;
  options.splat = SplatOptions{config.radius_px, config.splat_k, config.tau};

  for (std::size_t step = 1; step <= config.steps; ++step) {
    options.sample_seed = derive_seed(config.seed, kSampleStream * 0x10000 + step);
    options.camera_seed = derive_seed(config.seed, kCameraStream * 0x10000 + step);

    Tape tape;
    const Tensor pos = tape.parameter({n_points, 3}, positions);
    const Tensor nrm = tape.parameter({n_points, 3}, normals);
    const SurfaceLossTensors loss =
        surface_loss_tensor(tape, pos, nrm, local, config.weights, true, options);
    tape.backward(loss.total);
    adam.step({tape.grad(pos), tape.grad(nrm)});
    renormalize_rows(normals);

    const double total = tape.scalar_value(loss.total);
    logger.log(step, adam.learning_rate(), total, tape.scalar_value(loss.cd),
               loss.n.valid() ? tape.scalar_value(loss.n) : 0.0,
               loss.ni.valid() ? tape.scalar_value(loss.ni) : 0.0, 0.0, 0.0);
    adam.set_learning_rate(schedule.update(total));
  }
  logger.flush();

  PointSet out;
  out.positions.reserve(n_points);
  const std::vector<Vec3> local_positions = unflatten(positions);
  for (const Vec3& p : local_positions) out.positions.push_back(xf.to_world(p));
  out.normals = unflatten(normals);
  return out;
}

DeformationField fit_deformation(const PointSet& canonical, const Frame& target,
                                 const CorrespondenceSet* correspondences, const FitConfig& config,
                                 const std::string& log_path) {
  config.validate();
  canonical.validate();
  require(!canonical.empty(), ErrorCode::EmptySet, "canonical set is empty");

  const bool guided =
      correspondences != nullptr && !correspondences->empty() && config.weights.lambda_v > 0.0;
  if (config.weights.lambda_v > 0.0 && !guided) {
    require(correspondences == nullptr, ErrorCode::MissingCorrespondences,
            "keypoint weight is positive but the correspondence set is empty");
  }

  const SceneTransform xf = fit_transform(canonical.positions, config.normalize);
  const PointSet canon_local = to_local(canonical, xf);
  const Frame target_local = to_local(target, xf);
  CorrespondenceSet corr_local;
  if (guided) {
    corr_local.pairs.reserve(correspondences->size());
    for (const Correspondence& c : correspondences->pairs) {
      corr_local.pairs.push_back(Correspondence{xf.to_local(c.source), xf.to_local(c.target)});
    }
  }

  const PointSet working = working_subset(canon_local, config.sample_count, config.seed);

  StepLogger logger(log_path);
  FieldFitSpec spec;
  spec.canonical = &working;
  spec.target = &target_local;
  spec.correspondences = guided ? &corr_local : nullptr;
  spec.config = &config;
  spec.schedule_lambda_s = guided && config.weights.lambda_s > 0.0;
  spec.logger = &logger;
  DeformationField field = run_field_fit(spec);
  logger.flush();
  return field;
}

DynamicFieldSet fit_sequence(const DynamicScene& scene,
                             const std::vector<CorrespondenceSet>& correspondences,
                             const FitConfig& config) {
  scene.validate();
  require(scene.size() >= 2, ErrorCode::InvalidArgument, "scene needs at least two frames");
  require(correspondences.empty() || correspondences.size() == scene.size() - 1,
          ErrorCode::LengthMismatch,
          "need one correspondence set per target frame (or none at all)");

  const PointSet canonical = frame_as_pointset(scene.frames[0]);
  DynamicFieldSet fields;
  fields.fields.reserve(scene.size() - 1);
  for (std::size_t t = 1; t < scene.size(); ++t) {
    const CorrespondenceSet* corr =
        correspondences.empty() || correspondences[t - 1].empty() ? nullptr
                                                                  : &correspondences[t - 1];
    fields.fields.push_back(fit_deformation(canonical, scene.frames[t], corr, config));
  }
  return fields;
}

TriMesh animate(const TriMesh& canonical_scan, const CorrespondenceSet& body_pairs,
                const FitConfig& config_in, const std::string& log_path) {
  canonical_scan.validate();
  require(!canonical_scan.faces.empty(), ErrorCode::EmptyMesh, "scan has no faces");
  require(!body_pairs.empty(), ErrorCode::MissingCorrespondences, "no body correspondences");
  body_pairs.validate();

  const FitConfig config = animation_defaults(config_in);
  config.validate();

  const SceneTransform xf = fit_transform(canonical_scan.vertices, config.normalize);

  PointSet scan_points;
  scan_points.positions.reserve(canonical_scan.vertices.size());
  for (const Vec3& v : canonical_scan.vertices) scan_points.positions.push_back(xf.to_local(v));
  scan_points.normals = canonical_scan.has_vertex_normals() ? canonical_scan.vertex_normals
                                                            : vertex_normals(canonical_scan);

  CorrespondenceSet pairs_local;
  pairs_local.pairs.reserve(body_pairs.size());
  for (const Correspondence& c : body_pairs.pairs) {
    pairs_local.pairs.push_back(Correspondence{xf.to_local(c.source), xf.to_local(c.target)});
  }

  const PointSet working = working_subset(scan_points, config.sample_count, config.seed);

  StepLogger logger(log_path);
  FieldFitSpec spec;
  spec.canonical = &working;
  spec.target = nullptr;  // surface term is off
  spec.correspondences = &pairs_local;
  spec.config = &config;
  spec.schedule_lambda_s = false;
  spec.logger = &logger;
  const DeformationField field = run_field_fit(spec);
  logger.flush();

  std::vector<Vec3> local_vertices;
  local_vertices.reserve(canonical_scan.vertices.size());
  for (const Vec3& v : canonical_scan.vertices) local_vertices.push_back(xf.to_local(v));
  const std::vector<Vec3> deformed_local = deform(field, local_vertices);

  TriMesh out;
  out.vertices.reserve(deformed_local.size());
  for (const Vec3& v : deformed_local) out.vertices.push_back(xf.to_world(v));
  out.faces = canonical_scan.faces;
  out.vertex_normals = transfer_normals(canonical_scan, out.vertices);
  return out;
}

std::size_t nearest_canonical_frame(const std::vector<Vec3>& target_body,
                                    const std::vector<std::vector<Vec3>>& training_bodies) {
  require(!training_bodies.empty(), ErrorCode::InvalidArgument, "no training bodies");
  std::size_t best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t f = 0; f < training_bodies.size(); ++f) {
    require(training_bodies[f].size() == target_body.size(), ErrorCode::LengthMismatch,
            "training body " + std::to_string(f) + " has " +
                std::to_string(training_bodies[f].size()) + " vertices, target has " +
                std::to_string(target_body.size()));
    double acc = 0.0;
    for (std::size_t i = 0; i < target_body.size(); ++i) {
      acc += norm(target_body[i] - training_bodies[f][i]);
    }
    const double mean = acc / static_cast<double>(std::max<std::size_t>(target_body.size(), 1));
    if (mean < best_dist) {
      best_dist = mean;
      best = f;
    }
  }
  return best;
}

std::vector<Vec3> apply_field_world(const DeformationField& field,
                                    const std::vector<Vec3>& canonical_world, double gamma,
                                    bool normalize) {
  require(std::isfinite(gamma), ErrorCode::NonFiniteInput, "gamma must be finite");
  const SceneTransform xf = fit_transform(canonical_world, normalize);
  std::vector<Vec3> local;
  local.reserve(canonical_world.size());
  for (const Vec3& p : canonical_world) local.push_back(xf.to_local(p));
  const std::vector<Vec3> residuals = field_residuals(field, local);
  std::vector<Vec3> out(canonical_world.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = canonical_world[i] + xf.displacement_to_world(residuals[i] * gamma);
  }
  return out;
}

InterpolationReport interpolate_sequence(const DeformationField& field, const PointSet& canonical,
                                         const std::vector<double>& gammas,
                                         const FitConfig& config) {
  require(!gammas.empty(), ErrorCode::InvalidArgument, "gamma list is empty");
  for (std::size_t i = 0; i < gammas.size(); ++i) {
    require(std::isfinite(gammas[i]), ErrorCode::NonFiniteInput, "gamma must be finite");
    require(i == 0 || gammas[i - 1] <= gammas[i], ErrorCode::InvalidArgument,
            "gamma list must be sorted ascending");
  }
  canonical.validate();
  require(!canonical.empty(), ErrorCode::EmptySet, "canonical set is empty");

  InterpolationReport report;
  report.gammas = gammas;
  const IsoPairs pairs = canonical.size() >= 2
                             ? build_iso_pairs(canonical.positions, config.k)
                             : IsoPairs{};
  for (double gamma : gammas) {
    std::vector<Vec3> moved = apply_field_world(field, canonical.positions, gamma, config.normalize);
    report.iso.push_back(pairs.size() > 0 ? iso_loss(pairs, moved) : 0.0);
    report.positions.push_back(std::move(moved));
  }
  return report;
}

}  // namespace dpf
