#include "field.hpp"

#include <zlib.h>

#include <bit>
#include <cmath>
#include <cstring>

#include "fsutil.hpp"
#include "rng.hpp"

namespace dpf {

namespace {

constexpr std::size_t kIn = DeformationField::kInput;
constexpr std::size_t kHidden = DeformationField::kHidden;
constexpr std::size_t kOut = DeformationField::kOutput;
constexpr std::uint32_t kDims[5] = {3, 128, 128, 128, 3};
constexpr char kMagic[4] = {'D', 'P', 'F', '1'};

void append_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void append_f64(std::string& out, double v) {
  const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

std::uint32_t read_u32(const std::string& bytes, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[at + i])) << (8 * i);
  return v;
}

double read_f64(const std::string& bytes, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[at + i])) << (8 * i);
  return std::bit_cast<double>(v);
}

// Dense layer: out[n x co] = in[n x ci] * w + b, written with plain loops so a
// batch equals a point-at-a-time evaluation bit for bit.
void dense(const std::vector<double>& in, std::size_t n, std::size_t ci, std::size_t co,
           const std::vector<double>& w, const std::vector<double>& b, std::vector<double>& out) {
  out.assign(n * co, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    const double* row = in.data() + r * ci;
    double* dst = out.data() + r * co;
    for (std::size_t c = 0; c < co; ++c) dst[c] = b[c];
    for (std::size_t k = 0; k < ci; ++k) {
      const double x = row[k];
      const double* wrow = w.data() + k * co;
      for (std::size_t c = 0; c < co; ++c) dst[c] += x * wrow[c];
    }
  }
}

void sine_inplace(std::vector<double>& v, double omega0) {
  for (double& x : v) x = std::sin(omega0 * x);
}

}  // namespace

std::size_t DeformationField::parameter_count() {
  return kIn * kHidden + kHidden + 2 * (kHidden * kHidden + kHidden) + kHidden * kOut + kOut;
}

DeformationField init_field(std::uint64_t seed, double omega0) {
  require(omega0 > 0.0, ErrorCode::InvalidArgument, "omega0 must be positive");
  DeformationField f;
  f.omega0 = omega0;
  Rng rng(derive_seed(seed, 0x6669656C64ull));

  const double first = 1.0 / static_cast<double>(kIn);
  const double hidden = std::sqrt(6.0 / static_cast<double>(kHidden)) / omega0;

  f.w1.resize(kIn * kHidden);
  for (double& v : f.w1) v = rng.uniform(-first, first);
  f.b1.assign(kHidden, 0.0);
  f.w2.resize(kHidden * kHidden);
  for (double& v : f.w2) v = rng.uniform(-hidden, hidden);
  f.b2.assign(kHidden, 0.0);
  f.w3.resize(kHidden * kHidden);
  for (double& v : f.w3) v = rng.uniform(-hidden, hidden);
  f.b3.assign(kHidden, 0.0);
  // Zero output head: the initial warp is the identity.
  f.w4.assign(kHidden * kOut, 0.0);
  f.b4.assign(kOut, 0.0);
  return f;
}

std::vector<Vec3> field_residuals(const DeformationField& field, const std::vector<Vec3>& points) {
  const std::size_t n = points.size();
  std::vector<double> x(n * 3);
  for (std::size_t i = 0; i < n; ++i) {
    require(is_finite(points[i]), ErrorCode::NonFiniteInput,
            "non-finite input point at index " + std::to_string(i));
    x[3 * i] = points[i].x;
    x[3 * i + 1] = points[i].y;
    x[3 * i + 2] = points[i].z;
  }
  std::vector<double> h1, h2, h3, y;
  dense(x, n, kIn, kHidden, field.w1, field.b1, h1);
  sine_inplace(h1, field.omega0);
  dense(h1, n, kHidden, kHidden, field.w2, field.b2, h2);
  sine_inplace(h2, field.omega0);
  dense(h2, n, kHidden, kHidden, field.w3, field.b3, h3);
  sine_inplace(h3, field.omega0);
  dense(h3, n, kHidden, kOut, field.w4, field.b4, y);

  std::vector<Vec3> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = Vec3{y[3 * i], y[3 * i + 1], y[3 * i + 2]};
  return out;
}

std::vector<Vec3> deform(const DeformationField& field, const std::vector<Vec3>& points) {
  std::vector<Vec3> out = field_residuals(field, points);
  for (std::size_t i = 0; i < points.size(); ++i) out[i] += points[i];
  return out;
}

PointSet deform(const DeformationField& field, const PointSet& points) {
  PointSet out;
  out.positions = deform(field, points.positions);
  out.normals = points.normals;
  return out;
}

std::vector<Vec3> deform_partial(const DeformationField& field, const std::vector<Vec3>& points,
                                 double gamma) {
  require(std::isfinite(gamma), ErrorCode::NonFiniteInput, "gamma must be finite");
  std::vector<Vec3> res = field_residuals(field, points);
  std::vector<Vec3> out(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) out[i] = points[i] + res[i] * gamma;
  return out;
}

FieldParams field_parameters(Tape& tape, const DeformationField& field) {
  FieldParams p;
  p.w1 = tape.parameter({kIn, kHidden}, field.w1);
  p.b1 = tape.parameter({kHidden}, field.b1);
  p.w2 = tape.parameter({kHidden, kHidden}, field.w2);
  p.b2 = tape.parameter({kHidden}, field.b2);
  p.w3 = tape.parameter({kHidden, kHidden}, field.w3);
  p.b3 = tape.parameter({kHidden}, field.b3);
  p.w4 = tape.parameter({kHidden, kOut}, field.w4);
  p.b4 = tape.parameter({kOut}, field.b4);
  return p;
}

Tensor field_residual_tensor(Tape& tape, const FieldParams& params, Tensor positions,
                             double omega0) {
  Tensor h = tape.sine(tape.smul(tape.bias_add(tape.matmul(positions, params.w1), params.b1), omega0));
  h = tape.sine(tape.smul(tape.bias_add(tape.matmul(h, params.w2), params.b2), omega0));
  h = tape.sine(tape.smul(tape.bias_add(tape.matmul(h, params.w3), params.b3), omega0));
  return tape.bias_add(tape.matmul(h, params.w4), params.b4);
}

std::vector<std::vector<double>> field_gradients(const Tape& tape, const FieldParams& params) {
  std::vector<std::vector<double>> out;
  for (const Tensor& t : params.all()) out.push_back(tape.grad(t));
  return out;
}

std::string encode_field(const DeformationField& field) {
  std::string payload;
  append_u32(payload, 5);
  for (std::uint32_t d : kDims) append_u32(payload, d);
  append_f64(payload, field.omega0);
  for (const std::vector<double>* arr :
       {&field.w1, &field.b1, &field.w2, &field.b2, &field.w3, &field.b3, &field.w4, &field.b4}) {
    for (double v : *arr) append_f64(payload, v);
  }
  const std::uint32_t crc = static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(payload.data()), static_cast<uInt>(payload.size())));

  std::string bytes(kMagic, 4);
  bytes += payload;
  append_u32(bytes, crc);
  return bytes;
}

DeformationField decode_field(const std::string& bytes) {
  require(bytes.size() >= 4 && std::memcmp(bytes.data(), kMagic, 4) == 0, ErrorCode::Format,
          "bad checkpoint magic");
  const std::size_t expected_params = DeformationField::parameter_count();
  const std::size_t expected_size = 4 + 4 + 5 * 4 + 8 + expected_params * 8 + 4;

  // Dims are validated before the size so a wrong-architecture file reports
  // its dimensions instead of a generic truncation error.
  require(bytes.size() >= 4 + 4 + 5 * 4, ErrorCode::Format, "truncated checkpoint header");
  const std::uint32_t ndims = read_u32(bytes, 4);
  require(ndims == 5, ErrorCode::Format,
          "checkpoint declares " + std::to_string(ndims) + " dims, expected 5");
  for (int i = 0; i < 5; ++i) {
    const std::uint32_t got = read_u32(bytes, 8 + 4 * i);
    require(got == kDims[i], ErrorCode::Format,
            "checkpoint layer dim " + std::to_string(i) + " is " + std::to_string(got) +
                ", expected " + std::to_string(kDims[i]));
  }
  require(bytes.size() == expected_size, ErrorCode::Format,
          "checkpoint is " + std::to_string(bytes.size()) + " bytes, expected " +
              std::to_string(expected_size));

  const std::string payload = bytes.substr(4, bytes.size() - 8);
  const std::uint32_t stored_crc = read_u32(bytes, bytes.size() - 4);
  const std::uint32_t crc = static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(payload.data()), static_cast<uInt>(payload.size())));
  require(crc == stored_crc, ErrorCode::Format, "checkpoint checksum mismatch");

  DeformationField f;
  std::size_t at = 4 + 4 + 5 * 4;
  f.omega0 = read_f64(bytes, at);
  at += 8;
  require(f.omega0 > 0.0 && std::isfinite(f.omega0), ErrorCode::Format,
          "checkpoint omega0 is invalid");
  auto take = [&](std::vector<double>& arr, std::size_t count) {
    arr.resize(count);
    for (std::size_t i = 0; i < count; ++i, at += 8) arr[i] = read_f64(bytes, at);
  };
  take(f.w1, kIn * kHidden);
  take(f.b1, kHidden);
  take(f.w2, kHidden * kHidden);
  take(f.b2, kHidden);
  take(f.w3, kHidden * kHidden);
  take(f.b3, kHidden);
  take(f.w4, kHidden * kOut);
  take(f.b4, kOut);
  return f;
}

void save_field(const DeformationField& field, const std::string& path) {
  write_file_atomic(path, encode_field(field));
}

DeformationField load_field(const std::string& path) { return decode_field(read_file(path)); }

}  // namespace dpf
