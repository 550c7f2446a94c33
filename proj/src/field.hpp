#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tape.hpp"
#include "types.hpp"
#include "vec.hpp"

namespace dpf {

// Residual warp network: three sine-activated hidden layers of width 128 and a
// linear output head. Weights are row-major [in x out]. The output head starts
// at exactly zero so a freshly initialized field is the identity warp.
struct DeformationField {
  static constexpr std::size_t kInput = 3;
  static constexpr std::size_t kHidden = 128;
  static constexpr std::size_t kOutput = 3;

  double omega0 = 30.0;
  std::vector<double> w1, b1;  // [3 x 128], [128]
  std::vector<double> w2, b2;  // [128 x 128], [128]
  std::vector<double> w3, b3;  // [128 x 128], [128]
  std::vector<double> w4, b4;  // [128 x 3], [3]

  static std::size_t parameter_count();
};

// One dedicated field per target frame.
struct DynamicFieldSet {
  std::vector<DeformationField> fields;
};

DeformationField init_field(std::uint64_t seed, double omega0 = 30.0);

// Residual g(x) for every point.
std::vector<Vec3> field_residuals(const DeformationField& field, const std::vector<Vec3>& points);

// x + g(x), pointwise.
std::vector<Vec3> deform(const DeformationField& field, const std::vector<Vec3>& points);
PointSet deform(const DeformationField& field, const PointSet& points);

// x + gamma * g(x); gamma in [0,1] interpolates, gamma > 1 extrapolates.
std::vector<Vec3> deform_partial(const DeformationField& field, const std::vector<Vec3>& points,
                                 double gamma);

// Tape-recorded counterpart used inside optimization.
struct FieldParams {
  Tensor w1, b1, w2, b2, w3, b3, w4, b4;
  std::vector<Tensor> all() const { return {w1, b1, w2, b2, w3, b3, w4, b4}; }
};

// Registers the eight parameter tensors on the tape.
FieldParams field_parameters(Tape& tape, const DeformationField& field);

// Residual tensor g(X) for constant positions [n x 3].
Tensor field_residual_tensor(Tape& tape, const FieldParams& params, Tensor positions,
                             double omega0);

// Reads gradients accumulated on the tape back into a flat per-array list
// ordered like FieldParams::all().
std::vector<std::vector<double>> field_gradients(const Tape& tape, const FieldParams& params);

void save_field(const DeformationField& field, const std::string& path);
DeformationField load_field(const std::string& path);

// In-memory codec used by save/load and the tamper tests.
std::string encode_field(const DeformationField& field);
DeformationField decode_field(const std::string& bytes);

}  // namespace dpf
