#pragma once

#include <cstdint>
#include <set>
#include <string>

#include "losses.hpp"

namespace dpf {

// Fitting configuration shared by all pipelines. Files use flat `key=value`
// lines; `#` starts a comment; unknown keys are rejected.
struct FitConfig {
  std::size_t steps = 2000;
  std::size_t sample_count = 10000;
  double lr = 1e-4;
  std::uint64_t seed = 0;
  std::size_t k = 5;  // isometric neighborhood size
  bool normalize = true;
  LossWeights weights;

  // Guided weight schedule: lambda_s is zero for the first phase1_frac of the
  // steps, ramps linearly over ramp_frac, then holds.
  double phase1_frac = 0.5;
  double ramp_frac = 0.25;

  // Deformation network
  double omega0 = 30.0;

  // Renderer
  std::size_t resolution = 256;
  double radius_px = 2.0;
  double tau = 0.01;
  std::size_t splat_k = 8;

  // Learning-rate plateau policy
  std::size_t patience = 200;
  double lr_factor = 0.1;
  double lr_min = 1e-8;

  // Keys explicitly present in the parsed file; pipelines with different
  // defaults (animation) only override keys the user left unset.
  std::set<std::string> explicit_keys;

  bool is_set(const std::string& key) const { return explicit_keys.count(key) > 0; }

  void validate() const;
  void set(const std::string& key, const std::string& value);
  std::string to_string() const;  // sorted key=value lines
};

FitConfig parse_config(const std::string& text);
FitConfig read_config(const std::string& path);

// Scan-animation defaults: a much stronger keypoint/isometry weighting and no
// surface term, applied only where the user did not choose values.
FitConfig animation_defaults(FitConfig config);

std::string format_double(double v);  // shortest round-trip decimal form

}  // namespace dpf
