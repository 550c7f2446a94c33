// Command-line front end for the dynamic point field library. Everything goes
// through the public C API in dpf/dpf.h.

#include <cstdint>
#include <cstdio>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dpf/dpf.h"

namespace {

struct MeshDeleter {
  void operator()(dpf_mesh* m) const { dpf_mesh_free(m); }
};
struct PointsDeleter {
  void operator()(dpf_pointset* p) const { dpf_pointset_free(p); }
};
struct FieldDeleter {
  void operator()(dpf_field* f) const { dpf_field_free(f); }
};
struct CorrDeleter {
  void operator()(dpf_correspondences* c) const { dpf_correspondences_free(c); }
};
struct ConfigDeleter {
  void operator()(dpf_config* c) const { dpf_config_free(c); }
};

using MeshPtr = std::unique_ptr<dpf_mesh, MeshDeleter>;
using PointsPtr = std::unique_ptr<dpf_pointset, PointsDeleter>;
using FieldPtr = std::unique_ptr<dpf_field, FieldDeleter>;
using CorrPtr = std::unique_ptr<dpf_correspondences, CorrDeleter>;
using ConfigPtr = std::unique_ptr<dpf_config, ConfigDeleter>;

// Runtime failure: report and signal exit code 1.
struct RuntimeFailure {
  std::string message;
};

void check(dpf_status status, const std::string& context) {
  if (status == DPF_OK) return;
  throw RuntimeFailure{context + ": " + dpf_status_name(status) + " (" + dpf_last_error() + ")"};
}

struct ConfigArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::int64_t seed = -1;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "flat key=value configuration file");
    cmd->add_option("--set", overrides, "override a config key, e.g. --set steps=500");
    cmd->add_option("--seed", seed, "random seed (overrides the config file)");
  }

  ConfigPtr resolve() const {
    dpf_config* raw = nullptr;
    if (config_path.empty()) {
      check(dpf_config_create(&raw), "config");
    } else {
      check(dpf_config_load(config_path.c_str(), &raw), "config " + config_path);
    }
    ConfigPtr config(raw);
    for (const std::string& kv : overrides) {
      const std::size_t eq = kv.find('=');
      if (eq == std::string::npos) {
        throw RuntimeFailure{"--set expects key=value, got '" + kv + "'"};
      }
      check(dpf_config_set(config.get(), kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()),
            "config override " + kv);
    }
    if (seed >= 0) {
      check(dpf_config_set(config.get(), "seed", std::to_string(seed).c_str()), "seed override");
    }
    return config;
  }
};

void print_config(const ConfigPtr& config) {
  char* text = nullptr;
  check(dpf_config_describe(config.get(), &text), "config describe");
  std::cout << "resolved configuration:\n" << text;
  dpf_string_free(text);
}

MeshPtr load_mesh(const std::string& path) {
  dpf_mesh* raw = nullptr;
  check(dpf_mesh_load(path.c_str(), &raw), "mesh " + path);
  return MeshPtr(raw);
}

PointsPtr load_points(const std::string& path) {
  dpf_pointset* raw = nullptr;
  check(dpf_pointset_load(path.c_str(), &raw), "point set " + path);
  return PointsPtr(raw);
}

CorrPtr load_corr(const std::string& path) {
  dpf_correspondences* raw = nullptr;
  check(dpf_correspondences_load(path.c_str(), &raw), "correspondences " + path);
  return CorrPtr(raw);
}

// A file is treated as a mesh when it parses as one and has faces.
MeshPtr try_load_mesh_with_faces(const std::string& path) {
  dpf_mesh* raw = nullptr;
  if (dpf_mesh_load(path.c_str(), &raw) != DPF_OK) return nullptr;
  MeshPtr mesh(raw);
  size_t faces = 0;
  check(dpf_mesh_face_count(mesh.get(), &faces), "face count");
  if (faces == 0) return nullptr;
  return mesh;
}

std::vector<double> parse_gamma_list(const std::string& text) {
  std::vector<double> out;
  std::size_t begin = 0;
  while (begin <= text.size()) {
    std::size_t end = text.find(',', begin);
    const std::string item = text.substr(begin, end == std::string::npos ? std::string::npos
                                                                         : end - begin);
    if (!item.empty()) {
      try {
        out.push_back(std::stod(item));
      } catch (const std::exception&) {
        throw RuntimeFailure{"bad gamma value '" + item + "'"};
      }
    }
    if (end == std::string::npos) break;
    begin = end + 1;
  }
  if (out.empty()) throw RuntimeFailure{"--gamma-list is empty"};
  return out;
}

std::string format_metric(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dynamic point fields: point-set surfaces with per-frame deformation networks"};
  app.require_subcommand(1);

  // fit-static ------------------------------------------------------------
  auto* fit_static = app.add_subcommand("fit-static", "optimize a point set against a mesh");
  std::string fs_input, fs_out, fs_log;
  std::size_t fs_points = 10000;
  ConfigArgs fs_config;
  fit_static->add_option("--input", fs_input, "ground-truth mesh (.ply/.obj)")->required();
  fit_static->add_option("--out", fs_out, "output point set (.ply/.obj)")->required();
  fit_static->add_option("--n", fs_points, "number of points (default 10000)");
  fit_static->add_option("--log", fs_log, "per-step metrics CSV");
  fs_config.attach(fit_static);

  // fit-deform ------------------------------------------------------------
  auto* fit_deform = app.add_subcommand("fit-deform", "fit a deformation field to a target frame");
  std::string fd_canonical, fd_target, fd_corr, fd_out, fd_log;
  ConfigArgs fd_config;
  fit_deform->add_option("--canonical", fd_canonical, "canonical point set")->required();
  fit_deform->add_option("--target", fd_target, "target frame (mesh or point set)")->required();
  fit_deform->add_option("--corr", fd_corr, "correspondence CSV for guided fitting");
  fit_deform->add_option("--out", fd_out, "output checkpoint (.dpf)")->required();
  fit_deform->add_option("--log", fd_log, "per-step metrics CSV");
  fd_config.attach(fit_deform);

  // fit-sequence ----------------------------------------------------------
  auto* fit_sequence = app.add_subcommand("fit-sequence", "fit one field per target frame");
  std::vector<std::string> sq_frames, sq_corrs;
  std::string sq_out_dir;
  ConfigArgs sq_config;
  fit_sequence->add_option("--frames", sq_frames, "frame files; index 0 is canonical")
      ->required()
      ->expected(-2);
  fit_sequence->add_option("--corr", sq_corrs, "one correspondence CSV per target frame");
  fit_sequence->add_option("--out-dir", sq_out_dir, "directory for field_###.dpf")->required();
  sq_config.attach(fit_sequence);

  // animate -----------------------------------------------------------------
  auto* animate = app.add_subcommand("animate", "deform a scan using body correspondences");
  std::string an_scan, an_corr, an_out, an_log;
  ConfigArgs an_config;
  animate->add_option("--scan", an_scan, "canonical scan mesh")->required();
  animate->add_option("--corr", an_corr, "body correspondence CSV")->required();
  animate->add_option("--out", an_out, "deformed mesh output")->required();
  animate->add_option("--log", an_log, "per-step metrics CSV");
  an_config.attach(animate);

  // interpolate ---------------------------------------------------------------
  auto* interpolate = app.add_subcommand("interpolate", "apply a field at partial magnitudes");
  std::string in_canonical, in_field, in_gammas, in_out_dir, in_prefix = "interp_", in_report;
  ConfigArgs in_config;
  interpolate->add_option("--canonical", in_canonical, "canonical point set")->required();
  interpolate->add_option("--field", in_field, "fitted checkpoint (.dpf)")->required();
  interpolate->add_option("--gamma-list", in_gammas, "comma-separated gammas, e.g. 0,0.5,1")
      ->required();
  interpolate->add_option("--out-dir", in_out_dir, "output directory")->required();
  interpolate->add_option("--prefix", in_prefix, "output file prefix (default interp_)");
  interpolate->add_option("--report", in_report, "gamma/iso diagnostics CSV");
  in_config.attach(interpolate);

  // eval ---------------------------------------------------------------------
  auto* eval = app.add_subcommand("eval", "registration and reconstruction metrics");
  std::string ev_pred, ev_gt, ev_flow, ev_out;
  std::size_t ev_samples = 100000;
  std::int64_t ev_seed = 0;
  eval->add_option("--pred", ev_pred, "predicted point set")->required();
  eval->add_option("--gt", ev_gt, "ground truth (mesh or point set)")->required();
  eval->add_option("--flow", ev_flow, "ground-truth flow CSV for EPE/accuracy");
  eval->add_option("--samples", ev_samples, "mesh sample count (default 100000)");
  eval->add_option("--seed", ev_seed, "mesh sampling seed");
  eval->add_option("--out", ev_out, "write metrics CSV here (otherwise stdout only)");

  // benchgen -------------------------------------------------------------------
  auto* benchgen = app.add_subcommand("benchgen", "emit synthetic benchmark cases");
  std::string bg_out_dir, bg_suite, bg_name, bg_primitive, bg_warp;
  double bg_noise = 0.0;
  std::int64_t bg_seed = 0;
  benchgen->add_option("--out-dir", bg_out_dir, "output directory")->required();
  benchgen->add_option("--suite", bg_suite, "emit a named suite (default)");
  benchgen->add_option("--name", bg_name, "single case name");
  benchgen->add_option("--primitive", bg_primitive, "primitive spec, e.g. icosphere:3");
  benchgen->add_option("--warp", bg_warp, "warp spec, e.g. twist:z:0.6");
  benchgen->add_option("--noise", bg_noise, "gaussian noise sigma on the target");
  benchgen->add_option("--seed", bg_seed, "generator seed");

  // render ------------------------------------------------------------------
  auto* render = app.add_subcommand("render", "render normals to a PNG");
  std::string rd_input, rd_out;
  std::size_t rd_res = 256;
  double rd_radius = 2.0;
  std::int64_t rd_seed = 0;
  render->add_option("--input", rd_input, "mesh or point set")->required();
  render->add_option("--out", rd_out, "output PNG")->required();
  render->add_option("--res", rd_res, "image resolution (default 256)");
  render->add_option("--radius", rd_radius, "splat radius in pixels (default 2)");
  render->add_option("--seed", rd_seed, "camera seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (fit_static->parsed()) {
      const ConfigPtr config = fs_config.resolve();
      print_config(config);
      const MeshPtr mesh = load_mesh(fs_input);
      dpf_pointset* out = nullptr;
      check(dpf_fit_static(mesh.get(), fs_points, config.get(),
                           fs_log.empty() ? nullptr : fs_log.c_str(), &out),
            "fit-static");
      PointsPtr points(out);
      check(dpf_pointset_save(points.get(), fs_out.c_str()), "save " + fs_out);
      std::cout << "wrote " << fs_out << "\n";
    } else if (fit_deform->parsed()) {
      const ConfigPtr config = fd_config.resolve();
      print_config(config);
      const PointsPtr canonical = load_points(fd_canonical);
      MeshPtr target_mesh = try_load_mesh_with_faces(fd_target);
      PointsPtr target_points;
      if (!target_mesh) target_points = load_points(fd_target);
      CorrPtr corr;
      if (!fd_corr.empty()) corr = load_corr(fd_corr);
      dpf_field* out = nullptr;
      check(dpf_fit_deform(canonical.get(), target_mesh.get(), target_points.get(), corr.get(),
                           config.get(), fd_log.empty() ? nullptr : fd_log.c_str(), &out),
            "fit-deform");
      FieldPtr field(out);
      check(dpf_field_save(field.get(), fd_out.c_str()), "save " + fd_out);
      std::cout << "wrote " << fd_out << "\n";
    } else if (fit_sequence->parsed()) {
      const ConfigPtr config = sq_config.resolve();
      print_config(config);
      if (!sq_corrs.empty() && sq_corrs.size() != sq_frames.size() - 1) {
        throw RuntimeFailure{"--corr needs one file per target frame"};
      }
      const PointsPtr canonical = load_points(sq_frames[0]);
      for (std::size_t t = 1; t < sq_frames.size(); ++t) {
        MeshPtr target_mesh = try_load_mesh_with_faces(sq_frames[t]);
        PointsPtr target_points;
        if (!target_mesh) target_points = load_points(sq_frames[t]);
        CorrPtr corr;
        if (!sq_corrs.empty()) corr = load_corr(sq_corrs[t - 1]);
        dpf_field* out = nullptr;
        check(dpf_fit_deform(canonical.get(), target_mesh.get(), target_points.get(), corr.get(),
                             config.get(), nullptr, &out),
              "fit-sequence frame " + std::to_string(t));
        FieldPtr field(out);
        char name[32];
        std::snprintf(name, sizeof(name), "field_%03zu.dpf", t);
        const std::string path = sq_out_dir + "/" + name;
        check(dpf_field_save(field.get(), path.c_str()), "save " + path);
        std::cout << "wrote " << path << "\n";
      }
    } else if (animate->parsed()) {
      const ConfigPtr config = an_config.resolve();
      print_config(config);
      const MeshPtr scan = load_mesh(an_scan);
      const CorrPtr corr = load_corr(an_corr);
      dpf_mesh* out = nullptr;
      check(dpf_animate(scan.get(), corr.get(), config.get(),
                        an_log.empty() ? nullptr : an_log.c_str(), &out),
            "animate");
      MeshPtr deformed(out);
      check(dpf_mesh_save(deformed.get(), an_out.c_str()), "save " + an_out);
      std::cout << "wrote " << an_out << "\n";
    } else if (interpolate->parsed()) {
      const ConfigPtr config = in_config.resolve();
      print_config(config);
      const PointsPtr canonical = load_points(in_canonical);
      dpf_field* raw = nullptr;
      check(dpf_field_load(in_field.c_str(), &raw), "field " + in_field);
      FieldPtr field(raw);
      const std::vector<double> gammas = parse_gamma_list(in_gammas);
      check(dpf_interpolate(canonical.get(), field.get(), gammas.data(), gammas.size(),
                            config.get(), in_out_dir.c_str(), in_prefix.c_str(),
                            in_report.empty() ? nullptr : in_report.c_str()),
            "interpolate");
      std::cout << "wrote " << gammas.size() << " frames to " << in_out_dir << "\n";
    } else if (eval->parsed()) {
      std::cout << "seed=" << ev_seed << "\n";
      const PointsPtr pred = load_points(ev_pred);
      dpf_eval_result result{};
      MeshPtr gt_mesh = try_load_mesh_with_faces(ev_gt);
      if (gt_mesh) {
        check(dpf_eval_vs_mesh(pred.get(), gt_mesh.get(), ev_samples,
                               static_cast<uint64_t>(ev_seed),
                               ev_flow.empty() ? nullptr : ev_flow.c_str(), &result),
              "eval");
      } else {
        const PointsPtr gt = load_points(ev_gt);
        check(dpf_eval_pointsets(pred.get(), gt.get(), ev_flow.empty() ? nullptr : ev_flow.c_str(),
                                 &result),
              "eval");
      }
      std::string csv = "cd,n,epe,acc_s,acc_r\n";
      csv += format_metric(result.chamfer) + "," + format_metric(result.normal_consistency) + ",";
      if (result.has_flow) {
        csv += format_metric(result.epe) + "," + format_metric(result.acc_strict) + "," +
               format_metric(result.acc_relaxed);
      } else {
        csv += ",,";
      }
      csv += "\n";
      std::cout << csv;
      if (!ev_out.empty()) {
        // Temp file + rename so a failed run never leaves partial output.
        FILE* f = std::fopen((ev_out + ".tmp").c_str(), "wb");
        if (!f) throw RuntimeFailure{"cannot open " + ev_out};
        std::fwrite(csv.data(), 1, csv.size(), f);
        std::fclose(f);
        if (std::rename((ev_out + ".tmp").c_str(), ev_out.c_str()) != 0) {
          throw RuntimeFailure{"cannot rename into " + ev_out};
        }
        std::cout << "wrote " << ev_out << "\n";
      }
    } else if (benchgen->parsed()) {
      std::cout << "seed=" << bg_seed << "\n";
      if (!bg_suite.empty()) {
        if (bg_suite != "default") throw RuntimeFailure{"unknown suite '" + bg_suite + "'"};
        size_t cases = 0;
        check(dpf_benchgen_suite(bg_out_dir.c_str(), static_cast<uint64_t>(bg_seed), &cases),
              "benchgen suite");
        std::cout << "wrote " << cases << " cases to " << bg_out_dir << "\n";
      } else {
        if (bg_name.empty() || bg_primitive.empty() || bg_warp.empty()) {
          throw RuntimeFailure{"either --suite or all of --name/--primitive/--warp are required"};
        }
        check(dpf_benchgen_case(bg_out_dir.c_str(), bg_name.c_str(), bg_primitive.c_str(),
                                bg_warp.c_str(), bg_noise, static_cast<uint64_t>(bg_seed)),
              "benchgen case");
        std::cout << "wrote case " << bg_name << " to " << bg_out_dir << "\n";
      }
    } else if (render->parsed()) {
      std::cout << "seed=" << rd_seed << "\n";
      MeshPtr mesh = try_load_mesh_with_faces(rd_input);
      if (mesh) {
        check(dpf_render_mesh(mesh.get(), static_cast<uint64_t>(rd_seed), rd_res, rd_out.c_str()),
              "render");
      } else {
        const PointsPtr points = load_points(rd_input);
        check(dpf_render_pointset(points.get(), static_cast<uint64_t>(rd_seed), rd_res, rd_radius,
                                  rd_out.c_str()),
              "render");
      }
      std::cout << "wrote " << rd_out << "\n";
    }
  } catch (const RuntimeFailure& e) {
    std::cerr << "error: " << e.message << "\n";
    return 1;
  }
  return 0;
}
