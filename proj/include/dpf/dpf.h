/* Dynamic point fields: C API for the core library.
 *
 * All objects are opaque handles created and destroyed by this API. Functions
 * return DPF_OK on success or an error code; dpf_last_error() describes the
 * most recent failure on the calling thread. Output parameters are written
 * only on success.
 */
#ifndef DPF_DPF_H
#define DPF_DPF_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define DPF_API __declspec(dllexport)
#else
#define DPF_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dpf_status {
  DPF_OK = 0,
  DPF_ERROR_INVALID_ARGUMENT = 1,
  DPF_ERROR_IO = 2,
  DPF_ERROR_PARSE = 3,
  DPF_ERROR_FORMAT = 4,
  DPF_ERROR_EMPTY_INPUT = 5,
  DPF_ERROR_MISMATCH = 6,
  DPF_ERROR_DEGENERATE = 7,
  DPF_ERROR_UNSUPPORTED = 8,
  DPF_ERROR_OUT_OF_RANGE = 9,
  DPF_ERROR_NUMERIC = 10,
  DPF_ERROR_MISSING_INPUT = 11,
  DPF_ERROR_INTERNAL = 12
} dpf_status;

DPF_API const char* dpf_status_name(dpf_status status);
DPF_API const char* dpf_last_error(void);
DPF_API const char* dpf_version(void);

typedef struct dpf_mesh dpf_mesh;
typedef struct dpf_pointset dpf_pointset;
typedef struct dpf_field dpf_field;
typedef struct dpf_correspondences dpf_correspondences;
typedef struct dpf_config dpf_config;

/* ---- meshes ---------------------------------------------------------- */

DPF_API dpf_status dpf_mesh_load(const char* path, dpf_mesh** out);
DPF_API dpf_status dpf_mesh_save(const dpf_mesh* mesh, const char* path);
/* kind: "icosphere:3", "cylinder:12:24", "torus:32:16", "grid:8" */
DPF_API dpf_status dpf_mesh_primitive(const char* kind, dpf_mesh** out);
DPF_API dpf_status dpf_mesh_vertex_count(const dpf_mesh* mesh, size_t* out);
DPF_API dpf_status dpf_mesh_face_count(const dpf_mesh* mesh, size_t* out);
/* Writes 3*vertex_count doubles. */
DPF_API dpf_status dpf_mesh_vertices(const dpf_mesh* mesh, double* out);
DPF_API void dpf_mesh_free(dpf_mesh* mesh);

/* ---- point sets ------------------------------------------------------ */

DPF_API dpf_status dpf_pointset_load(const char* path, dpf_pointset** out);
DPF_API dpf_status dpf_pointset_save(const dpf_pointset* points, const char* path);
DPF_API dpf_status dpf_pointset_create(const double* positions, const double* normals, size_t count,
                                       dpf_pointset** out);
DPF_API dpf_status dpf_pointset_count(const dpf_pointset* points, size_t* out);
DPF_API dpf_status dpf_pointset_positions(const dpf_pointset* points, double* out);
DPF_API dpf_status dpf_pointset_normals(const dpf_pointset* points, double* out);
DPF_API void dpf_pointset_free(dpf_pointset* points);

/* ---- correspondences -------------------------------------------------- */

DPF_API dpf_status dpf_correspondences_load(const char* path, dpf_correspondences** out);
DPF_API dpf_status dpf_correspondences_save(const dpf_correspondences* pairs, const char* path);
DPF_API dpf_status dpf_correspondences_create(const double* sources, const double* targets,
                                              size_t count, dpf_correspondences** out);
DPF_API dpf_status dpf_correspondences_count(const dpf_correspondences* pairs, size_t* out);
DPF_API void dpf_correspondences_free(dpf_correspondences* pairs);

/* ---- configuration ---------------------------------------------------- */

DPF_API dpf_status dpf_config_create(dpf_config** out);
DPF_API dpf_status dpf_config_load(const char* path, dpf_config** out);
DPF_API dpf_status dpf_config_set(dpf_config* config, const char* key, const char* value);
/* Resolved configuration as sorted key=value lines; caller frees with
 * dpf_string_free. */
DPF_API dpf_status dpf_config_describe(const dpf_config* config, char** out);
DPF_API void dpf_config_free(dpf_config* config);
DPF_API void dpf_string_free(char* text);

/* ---- deformation fields ----------------------------------------------- */

DPF_API dpf_status dpf_field_load(const char* path, dpf_field** out);
DPF_API dpf_status dpf_field_save(const dpf_field* field, const char* path);
DPF_API dpf_status dpf_field_parameter_count(const dpf_field* field, size_t* out);
/* out_positions receives 3*count doubles: positions + gamma * residual.
 * normalize rederives the fit-time unit-box transform from the inputs. */
DPF_API dpf_status dpf_field_apply(const dpf_field* field, const double* positions, size_t count,
                                   double gamma, int normalize, double* out_positions);
DPF_API void dpf_field_free(dpf_field* field);

/* ---- pipelines --------------------------------------------------------- */

/* log_csv may be NULL; when set, a per-step metrics log is written there. */
DPF_API dpf_status dpf_fit_static(const dpf_mesh* gt, size_t n_points, const dpf_config* config,
                                  const char* log_csv, dpf_pointset** out);

/* Exactly one of target_mesh / target_points must be non-NULL; corr may be
 * NULL for unsupervised fitting. */
DPF_API dpf_status dpf_fit_deform(const dpf_pointset* canonical, const dpf_mesh* target_mesh,
                                  const dpf_pointset* target_points,
                                  const dpf_correspondences* corr, const dpf_config* config,
                                  const char* log_csv, dpf_field** out);

DPF_API dpf_status dpf_animate(const dpf_mesh* scan, const dpf_correspondences* body_pairs,
                               const dpf_config* config, const char* log_csv, dpf_mesh** out);

/* Applies the field at each gamma; writes one point set per gamma into
 * out_dir as <prefix><index>.ply (positions only) and, when report_csv is not
 * NULL, a gamma/iso diagnostic table. */
DPF_API dpf_status dpf_interpolate(const dpf_pointset* canonical, const dpf_field* field,
                                   const double* gammas, size_t n_gammas,
                                   const dpf_config* config, const char* out_dir,
                                   const char* prefix, const char* report_csv);

/* ---- evaluation -------------------------------------------------------- */

typedef struct dpf_eval_result {
  double chamfer;            /* Chamfer distance x 1e4 */
  double normal_consistency; /* pooled mean of 1 - |cos| */
  double epe;
  double acc_strict;  /* percent */
  double acc_relaxed; /* percent */
  int has_flow;       /* nonzero when flow metrics are present */
} dpf_eval_result;

/* Compares a predicted point set against a ground-truth point set. When
 * flow_csv is non-NULL the predicted displacement of row i is
 * pred[i] - flow.base[i], measured against the recorded displacements. */
DPF_API dpf_status dpf_eval_pointsets(const dpf_pointset* pred, const dpf_pointset* gt,
                                      const char* flow_csv, dpf_eval_result* out);

/* Samples `samples` points from the ground-truth mesh first. */
DPF_API dpf_status dpf_eval_vs_mesh(const dpf_pointset* pred, const dpf_mesh* gt, size_t samples,
                                    uint64_t seed, const char* flow_csv, dpf_eval_result* out);

/* ---- synthetic benchmarks ---------------------------------------------- */

/* Emits canonical.ply, target.ply, flow.csv, corr.csv and manifest.txt under
 * out_dir/name/. primitive and warp use the spec strings documented in the
 * README ("icosphere:3", "rigid:z:30", "twist:z:0.6", ...). */
DPF_API dpf_status dpf_benchgen_case(const char* out_dir, const char* name, const char* primitive,
                                     const char* warp, double noise_sigma, uint64_t seed);

/* The eight-case default suite; returns the number of cases emitted. */
DPF_API dpf_status dpf_benchgen_suite(const char* out_dir, uint64_t seed, size_t* cases_out);

/* ---- rendering ---------------------------------------------------------- */

DPF_API dpf_status dpf_render_mesh(const dpf_mesh* mesh, uint64_t camera_seed, size_t resolution,
                                   const char* png_path);
DPF_API dpf_status dpf_render_pointset(const dpf_pointset* points, uint64_t camera_seed,
                                       size_t resolution, double radius_px, const char* png_path);

#ifdef __cplusplus
}
#endif

#endif /* DPF_DPF_H */
