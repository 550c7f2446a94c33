#include "dpf/dpf.h"

#include <cstdio>
#include <cstring>
#include <exception>
#include <filesystem>
#include <memory>
#include <string>

#include "benchgen.hpp"
#include "config.hpp"
#include "csvio.hpp"
#include "error.hpp"
#include "field.hpp"
#include "fsutil.hpp"
#include "losses.hpp"
#include "meshio.hpp"
#include "metrics.hpp"
#include "pipelines.hpp"
#include "render.hpp"
#include "sampling.hpp"
#include "types.hpp"

struct dpf_mesh {
  dpf::TriMesh value;
};
struct dpf_pointset {
  dpf::PointSet value;
};
struct dpf_field {
  dpf::DeformationField value;
};
struct dpf_correspondences {
  dpf::CorrespondenceSet value;
};
struct dpf_config {
  dpf::FitConfig value;
};

namespace {

thread_local std::string g_last_error;

dpf_status map_code(dpf::ErrorCode code) {
  using dpf::ErrorCode;
  switch (code) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::AtLeastOneTerm:
    case ErrorCode::BadResolution:
      return DPF_ERROR_INVALID_ARGUMENT;
    case ErrorCode::EmptyMesh:
    case ErrorCode::EmptyIndex:
    case ErrorCode::EmptySet:
    case ErrorCode::EmptyFlow:
    case ErrorCode::EmptyCorrespondences:
    case ErrorCode::EmptyNeighborhood:
      return DPF_ERROR_EMPTY_INPUT;
    case ErrorCode::LengthMismatch:
    case ErrorCode::ShapeMismatch:
    case ErrorCode::ResolutionMismatch:
      return DPF_ERROR_MISMATCH;
    case ErrorCode::IndexOutOfRange:
      return DPF_ERROR_OUT_OF_RANGE;
    case ErrorCode::NonScalarOutput:
    case ErrorCode::NonFiniteValue:
    case ErrorCode::NonFiniteInput:
    case ErrorCode::NonFiniteGradient:
    case ErrorCode::NonFiniteLoss:
      return DPF_ERROR_NUMERIC;
    case ErrorCode::DegenerateNeighborhood:
    case ErrorCode::DegenerateBounds:
    case ErrorCode::IsolatedVertex:
      return DPF_ERROR_DEGENERATE;
    case ErrorCode::MissingRenderer:
    case ErrorCode::MissingCorrespondences:
      return DPF_ERROR_MISSING_INPUT;
    case ErrorCode::Io:
      return DPF_ERROR_IO;
    case ErrorCode::Parse:
    case ErrorCode::UnknownKey:
      return DPF_ERROR_PARSE;
    case ErrorCode::Format:
      return DPF_ERROR_FORMAT;
    case ErrorCode::UnsupportedFeature:
      return DPF_ERROR_UNSUPPORTED;
  }
  return DPF_ERROR_INTERNAL;
}

template <typename Fn>
dpf_status guarded(Fn&& fn) {
  try {
    fn();
    return DPF_OK;
  } catch (const dpf::Error& e) {
    g_last_error = e.what();
    return map_code(e.code());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return DPF_ERROR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return DPF_ERROR_INTERNAL;
  }
}

void check_arg(bool ok, const char* message) {
  dpf::require(ok, dpf::ErrorCode::InvalidArgument, message);
}

dpf::FitConfig config_or_default(const dpf_config* config) {
  return config ? config->value : dpf::FitConfig{};
}

void fill_eval(const dpf::PointSet& pred, const dpf::PointSet& gt, const char* flow_csv,
               dpf_eval_result* out) {
  const dpf::ChamferValue chamfer = dpf::chamfer_loss(pred, gt);
  dpf_eval_result result{};
  result.chamfer = chamfer.cd * 1e4;
  result.normal_consistency = chamfer.n;
  result.has_flow = 0;
  if (flow_csv != nullptr) {
    const dpf::FlowFile flow = dpf::read_flow(flow_csv);
    dpf::require(flow.size() == pred.size(), dpf::ErrorCode::LengthMismatch,
                 "flow rows (" + std::to_string(flow.size()) + ") do not match predicted points (" +
                     std::to_string(pred.size()) + ")");
    dpf::FlowField field;
    field.predicted.reserve(flow.size());
    for (std::size_t i = 0; i < flow.size(); ++i) {
      field.predicted.push_back(pred.positions[i] - flow.base[i]);
    }
    field.ground_truth = flow.displacement;
    result.epe = dpf::epe(field);
    result.acc_strict = dpf::acc_strict(field);
    result.acc_relaxed = dpf::acc_relaxed(field);
    result.has_flow = 1;
  }
  *out = result;
}

}  // namespace

extern "C" {

const char* dpf_status_name(dpf_status status) {
  switch (status) {
    case DPF_OK: return "ok";
    case DPF_ERROR_INVALID_ARGUMENT: return "invalid argument";
    case DPF_ERROR_IO: return "io error";
    case DPF_ERROR_PARSE: return "parse error";
    case DPF_ERROR_FORMAT: return "format error";
    case DPF_ERROR_EMPTY_INPUT: return "empty input";
    case DPF_ERROR_MISMATCH: return "size mismatch";
    case DPF_ERROR_DEGENERATE: return "degenerate input";
    case DPF_ERROR_UNSUPPORTED: return "unsupported feature";
    case DPF_ERROR_OUT_OF_RANGE: return "index out of range";
    case DPF_ERROR_NUMERIC: return "numeric error";
    case DPF_ERROR_MISSING_INPUT: return "missing input";
    case DPF_ERROR_INTERNAL: return "internal error";
  }
  return "unknown";
}

const char* dpf_last_error(void) { return g_last_error.c_str(); }

const char* dpf_version(void) { return "0.1.0"; }

/* ---- meshes ---------------------------------------------------------- */

dpf_status dpf_mesh_load(const char* path, dpf_mesh** out) {
  return guarded([&] {
    check_arg(path && out, "path and out must not be null");
    auto handle = std::make_unique<dpf_mesh>();
    handle->value = dpf::read_mesh(path);
    *out = handle.release();
  });
}

dpf_status dpf_mesh_save(const dpf_mesh* mesh, const char* path) {
  return guarded([&] {
    check_arg(mesh && path, "mesh and path must not be null");
    dpf::write_mesh(mesh->value, path);
  });
}

dpf_status dpf_mesh_primitive(const char* kind, dpf_mesh** out) {
  return guarded([&] {
    check_arg(kind && out, "kind and out must not be null");
    auto handle = std::make_unique<dpf_mesh>();
    handle->value = dpf::make_primitive(kind);
    *out = handle.release();
  });
}

dpf_status dpf_mesh_vertex_count(const dpf_mesh* mesh, size_t* out) {
  return guarded([&] {
    check_arg(mesh && out, "mesh and out must not be null");
    *out = mesh->value.vertices.size();
  });
}

dpf_status dpf_mesh_face_count(const dpf_mesh* mesh, size_t* out) {
  return guarded([&] {
    check_arg(mesh && out, "mesh and out must not be null");
    *out = mesh->value.faces.size();
  });
}

dpf_status dpf_mesh_vertices(const dpf_mesh* mesh, double* out) {
  return guarded([&] {
    check_arg(mesh && out, "mesh and out must not be null");
    const std::vector<double> flat = dpf::flatten(mesh->value.vertices);
    std::memcpy(out, flat.data(), flat.size() * sizeof(double));
  });
}

void dpf_mesh_free(dpf_mesh* mesh) { delete mesh; }

/* ---- point sets ------------------------------------------------------ */

dpf_status dpf_pointset_load(const char* path, dpf_pointset** out) {
  return guarded([&] {
    check_arg(path && out, "path and out must not be null");
    auto handle = std::make_unique<dpf_pointset>();
    handle->value = dpf::read_pointset(path);
    *out = handle.release();
  });
}

dpf_status dpf_pointset_save(const dpf_pointset* points, const char* path) {
  return guarded([&] {
    check_arg(points && path, "points and path must not be null");
    dpf::write_pointset(points->value, path);
  });
}

dpf_status dpf_pointset_create(const double* positions, const double* normals, size_t count,
                               dpf_pointset** out) {
  return guarded([&] {
    check_arg(positions && normals && out, "positions, normals and out must not be null");
    auto handle = std::make_unique<dpf_pointset>();
    handle->value.positions = dpf::unflatten(std::vector<double>(positions, positions + 3 * count));
    handle->value.normals = dpf::unflatten(std::vector<double>(normals, normals + 3 * count));
    handle->value.validate();
    *out = handle.release();
  });
}

dpf_status dpf_pointset_count(const dpf_pointset* points, size_t* out) {
  return guarded([&] {
    check_arg(points && out, "points and out must not be null");
    *out = points->value.size();
  });
}

dpf_status dpf_pointset_positions(const dpf_pointset* points, double* out) {
  return guarded([&] {
    check_arg(points && out, "points and out must not be null");
    const std::vector<double> flat = dpf::flatten(points->value.positions);
    std::memcpy(out, flat.data(), flat.size() * sizeof(double));
  });
}

dpf_status dpf_pointset_normals(const dpf_pointset* points, double* out) {
  return guarded([&] {
    check_arg(points && out, "points and out must not be null");
    const std::vector<double> flat = dpf::flatten(points->value.normals);
    std::memcpy(out, flat.data(), flat.size() * sizeof(double));
  });
}

void dpf_pointset_free(dpf_pointset* points) { delete points; }

/* ---- correspondences -------------------------------------------------- */

dpf_status dpf_correspondences_load(const char* path, dpf_correspondences** out) {
  return guarded([&] {
    check_arg(path && out, "path and out must not be null");
    auto handle = std::make_unique<dpf_correspondences>();
    handle->value = dpf::read_correspondences(path);
    *out = handle.release();
  });
}

dpf_status dpf_correspondences_save(const dpf_correspondences* pairs, const char* path) {
  return guarded([&] {
    check_arg(pairs && path, "pairs and path must not be null");
    dpf::write_correspondences(pairs->value, path);
  });
}

dpf_status dpf_correspondences_create(const double* sources, const double* targets, size_t count,
                                      dpf_correspondences** out) {
  return guarded([&] {
    check_arg(sources && targets && out, "sources, targets and out must not be null");
    auto handle = std::make_unique<dpf_correspondences>();
    handle->value.pairs.reserve(count);
    for (size_t i = 0; i < count; ++i) {
      handle->value.pairs.push_back(dpf::Correspondence{
          dpf::Vec3{sources[3 * i], sources[3 * i + 1], sources[3 * i + 2]},
          dpf::Vec3{targets[3 * i], targets[3 * i + 1], targets[3 * i + 2]}});
    }
    handle->value.validate();
    *out = handle.release();
  });
}

dpf_status dpf_correspondences_count(const dpf_correspondences* pairs, size_t* out) {
  return guarded([&] {
    check_arg(pairs && out, "pairs and out must not be null");
    *out = pairs->value.size();
  });
}

void dpf_correspondences_free(dpf_correspondences* pairs) { delete pairs; }

/* ---- configuration ---------------------------------------------------- */

dpf_status dpf_config_create(dpf_config** out) {
  return guarded([&] {
    check_arg(out != nullptr, "out must not be null");
    *out = new dpf_config();
  });
}

dpf_status dpf_config_load(const char* path, dpf_config** out) {
  return guarded([&] {
    check_arg(path && out, "path and out must not be null");
    auto handle = std::make_unique<dpf_config>();
    handle->value = dpf::read_config(path);
    *out = handle.release();
  });
}

dpf_status dpf_config_set(dpf_config* config, const char* key, const char* value) {
  return guarded([&] {
    check_arg(config && key && value, "config, key and value must not be null");
    dpf::FitConfig updated = config->value;
    updated.set(key, value);
    updated.validate();
    config->value = std::move(updated);
  });
}

dpf_status dpf_config_describe(const dpf_config* config, char** out) {
  return guarded([&] {
    check_arg(config && out, "config and out must not be null");
    const std::string text = config->value.to_string();
    char* copy = new char[text.size() + 1];
    std::memcpy(copy, text.c_str(), text.size() + 1);
    *out = copy;
  });
}

void dpf_config_free(dpf_config* config) { delete config; }

void dpf_string_free(char* text) { delete[] text; }

/* ---- deformation fields ----------------------------------------------- */

dpf_status dpf_field_load(const char* path, dpf_field** out) {
  return guarded([&] {
    check_arg(path && out, "path and out must not be null");
    auto handle = std::make_unique<dpf_field>();
    handle->value = dpf::load_field(path);
    *out = handle.release();
  });
}

dpf_status dpf_field_save(const dpf_field* field, const char* path) {
  return guarded([&] {
    check_arg(field && path, "field and path must not be null");
    dpf::save_field(field->value, path);
  });
}

dpf_status dpf_field_parameter_count(const dpf_field* field, size_t* out) {
  return guarded([&] {
    check_arg(field && out, "field and out must not be null");
    *out = dpf::DeformationField::parameter_count();
  });
}

dpf_status dpf_field_apply(const dpf_field* field, const double* positions, size_t count,
                           double gamma, int normalize, double* out_positions) {
  return guarded([&] {
    check_arg(field && positions && out_positions, "field, positions and out must not be null");
    check_arg(count > 0, "count must be positive");
    const std::vector<dpf::Vec3> pts =
        dpf::unflatten(std::vector<double>(positions, positions + 3 * count));
    const std::vector<dpf::Vec3> moved =
        dpf::apply_field_world(field->value, pts, gamma, normalize != 0);
    const std::vector<double> flat = dpf::flatten(moved);
    std::memcpy(out_positions, flat.data(), flat.size() * sizeof(double));
  });
}

void dpf_field_free(dpf_field* field) { delete field; }

/* ---- pipelines --------------------------------------------------------- */

dpf_status dpf_fit_static(const dpf_mesh* gt, size_t n_points, const dpf_config* config,
                          const char* log_csv, dpf_pointset** out) {
  return guarded([&] {
    check_arg(gt && out, "gt and out must not be null");
    auto handle = std::make_unique<dpf_pointset>();
    handle->value = dpf::fit_static(gt->value, n_points, config_or_default(config),
                                    log_csv ? log_csv : "");
    *out = handle.release();
  });
}

dpf_status dpf_fit_deform(const dpf_pointset* canonical, const dpf_mesh* target_mesh,
                          const dpf_pointset* target_points, const dpf_correspondences* corr,
                          const dpf_config* config, const char* log_csv, dpf_field** out) {
  return guarded([&] {
    check_arg(canonical && out, "canonical and out must not be null");
    check_arg((target_mesh != nullptr) != (target_points != nullptr),
              "exactly one of target_mesh / target_points must be set");
    dpf::Frame target;
    if (target_mesh)
      target = target_mesh->value;
    else
      target = target_points->value;
    auto handle = std::make_unique<dpf_field>();
    handle->value =
        dpf::fit_deformation(canonical->value, target, corr ? &corr->value : nullptr,
                             config_or_default(config), log_csv ? log_csv : "");
    *out = handle.release();
  });
}

dpf_status dpf_animate(const dpf_mesh* scan, const dpf_correspondences* body_pairs,
                       const dpf_config* config, const char* log_csv, dpf_mesh** out) {
  return guarded([&] {
    check_arg(scan && body_pairs && out, "scan, body_pairs and out must not be null");
    auto handle = std::make_unique<dpf_mesh>();
    handle->value = dpf::animate(scan->value, body_pairs->value, config_or_default(config),
                                 log_csv ? log_csv : "");
    *out = handle.release();
  });
}

dpf_status dpf_interpolate(const dpf_pointset* canonical, const dpf_field* field,
                           const double* gammas, size_t n_gammas, const dpf_config* config,
                           const char* out_dir, const char* prefix, const char* report_csv) {
  return guarded([&] {
    check_arg(canonical && field && gammas && out_dir, "canonical, field, gammas and out_dir");
    check_arg(n_gammas > 0, "need at least one gamma");
    const dpf::FitConfig cfg = config_or_default(config);
    const dpf::InterpolationReport report = dpf::interpolate_sequence(
        field->value, canonical->value, std::vector<double>(gammas, gammas + n_gammas), cfg);

    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    dpf::require(!ec, dpf::ErrorCode::Io, std::string("cannot create ") + out_dir);
    const std::string stem = prefix ? prefix : "interp_";
    for (std::size_t i = 0; i < report.positions.size(); ++i) {
      char suffix[32];
      std::snprintf(suffix, sizeof(suffix), "%03zu.ply", i);
      dpf::TriMesh cloud;
      cloud.vertices = report.positions[i];
      dpf::write_mesh(cloud, (std::filesystem::path(out_dir) / (stem + suffix)).string());
    }
    if (report_csv) {
      std::string text = "gamma,iso\n";
      for (std::size_t i = 0; i < report.gammas.size(); ++i) {
        text += dpf::format_double(report.gammas[i]) + "," + dpf::format_double(report.iso[i]) +
                "\n";
      }
      dpf::write_file_atomic(report_csv, text);
    }
  });
}

/* ---- evaluation -------------------------------------------------------- */

dpf_status dpf_eval_pointsets(const dpf_pointset* pred, const dpf_pointset* gt,
                              const char* flow_csv, dpf_eval_result* out) {
  return guarded([&] {
    check_arg(pred && gt && out, "pred, gt and out must not be null");
    fill_eval(pred->value, gt->value, flow_csv, out);
  });
}

dpf_status dpf_eval_vs_mesh(const dpf_pointset* pred, const dpf_mesh* gt, size_t samples,
                            uint64_t seed, const char* flow_csv, dpf_eval_result* out) {
  return guarded([&] {
    check_arg(pred && gt && out, "pred, gt and out must not be null");
    const dpf::PointSet gt_sample = dpf::sample_surface(gt->value, samples, seed);
    fill_eval(pred->value, gt_sample, flow_csv, out);
  });
}

/* ---- synthetic benchmarks ---------------------------------------------- */

dpf_status dpf_benchgen_case(const char* out_dir, const char* name, const char* primitive,
                             const char* warp, double noise_sigma, uint64_t seed) {
  return guarded([&] {
    check_arg(out_dir && name && primitive && warp, "out_dir, name, primitive and warp");
    dpf::BenchCaseSpec spec;
    spec.name = name;
    spec.primitive = primitive;
    spec.warp = warp;
    spec.noise_sigma = noise_sigma;
    spec.seed = seed;
    dpf::emit_case(spec, out_dir);
  });
}

dpf_status dpf_benchgen_suite(const char* out_dir, uint64_t seed, size_t* cases_out) {
  return guarded([&] {
    check_arg(out_dir != nullptr, "out_dir must not be null");
    const std::vector<dpf::BenchCaseSpec> cases = dpf::default_suite(seed);
    for (const dpf::BenchCaseSpec& spec : cases) dpf::emit_case(spec, out_dir);
    if (cases_out) *cases_out = cases.size();
  });
}

/* ---- rendering ---------------------------------------------------------- */

dpf_status dpf_render_mesh(const dpf_mesh* mesh, uint64_t camera_seed, size_t resolution,
                           const char* png_path) {
  return guarded([&] {
    check_arg(mesh && png_path, "mesh and png_path must not be null");
    const dpf::Camera cam =
        dpf::sample_camera(camera_seed, dpf::bounds_of(mesh->value.vertices), resolution);
    dpf::write_normal_image_png(dpf::rasterize_mesh_normals(mesh->value, cam), png_path);
  });
}

dpf_status dpf_render_pointset(const dpf_pointset* points, uint64_t camera_seed, size_t resolution,
                               double radius_px, const char* png_path) {
  return guarded([&] {
    check_arg(points && png_path, "points and png_path must not be null");
    const dpf::Camera cam =
        dpf::sample_camera(camera_seed, dpf::bounds_of(points->value.positions), resolution);
    dpf::SplatOptions options;
    options.radius_px = radius_px;
    dpf::write_normal_image_png(dpf::splat_point_normals(points->value, cam, options), png_path);
  });
}

}  // extern "C"
