#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "error.hpp"
#include "field.hpp"
#include "fsutil.hpp"
#include "rng.hpp"

using namespace dpf;

namespace {

std::vector<Vec3> random_points(Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::vector<Vec3> pts(n);
  for (Vec3& p : pts) p = Vec3{rng.uniform(lo, hi), rng.uniform(lo, hi), rng.uniform(lo, hi)};
  return pts;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("init_field: identity warp at initialization for any seed") {
  Rng rng(1);
  for (std::uint64_t seed : {0ull, 1ull, 42ull, 31337ull}) {
    const DeformationField field = init_field(seed);
    const std::vector<Vec3> pts = random_points(rng, 50, -5.0, 5.0);
    const std::vector<Vec3> moved = deform(field, pts);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      CHECK(moved[i] == pts[i]);  // exact: zero output head
    }
  }
}

TEST_CASE("init_field: seeded determinism and seed separation") {
  const DeformationField a = init_field(7);
  const DeformationField b = init_field(7);
  const DeformationField c = init_field(8);
  CHECK(a.w1 == b.w1);
  CHECK(a.w2 == b.w2);
  CHECK(a.w3 == b.w3);
  CHECK(a.w1 != c.w1);
  CHECK(a.omega0 == 30.0);
}

TEST_CASE("init_field: initialization ranges") {
  const DeformationField f = init_field(123, 30.0);
  const double first = 1.0 / 3.0;
  for (double v : f.w1) CHECK(std::abs(v) <= first);
  const double hidden = std::sqrt(6.0 / 128.0) / 30.0;
  for (double v : f.w2) CHECK(std::abs(v) <= hidden);
  for (double v : f.w3) CHECK(std::abs(v) <= hidden);
  for (double v : f.w4) CHECK(v == 0.0);
  for (double v : f.b4) CHECK(v == 0.0);
  CHECK(f.parameter_count() == 3 * 128 + 128 + 2 * (128 * 128 + 128) + 128 * 3 + 3);
}

TEST_CASE("deform: single active unit matches the closed form") {
  DeformationField f = init_field(0, 30.0);
  // Zero everything, then wire one path: x -> unit 0 of each layer -> output y.
  std::fill(f.w1.begin(), f.w1.end(), 0.0);
  std::fill(f.w2.begin(), f.w2.end(), 0.0);
  std::fill(f.w3.begin(), f.w3.end(), 0.0);
  const double a = 0.37, c = 0.11, w2 = 0.8, w3 = -0.6, w4 = 1.9, b4 = 0.05;
  f.w1[0 * 128 + 0] = a;     // input x feeds unit 0
  f.b1[0] = c;
  f.w2[0 * 128 + 0] = w2;
  f.w3[0 * 128 + 0] = w3;
  f.w4[0 * 3 + 1] = w4;      // unit 0 drives output component y
  f.b4[1] = b4;

  const Vec3 p{0.83, -0.4, 0.9};
  const double h1 = std::sin(30.0 * (a * p.x + c));
  const double h2 = std::sin(30.0 * (w2 * h1));
  const double h3 = std::sin(30.0 * (w3 * h2));
  const Vec3 expected{p.x + 0.0, p.y + (w4 * h3 + b4), p.z + 0.0};

  const std::vector<Vec3> got = deform(f, {p});
  CHECK(got[0].x == doctest::Approx(expected.x).epsilon(1e-14));
  CHECK(got[0].y == doctest::Approx(expected.y).epsilon(1e-14));
  CHECK(got[0].z == doctest::Approx(expected.z).epsilon(1e-14));
}

TEST_CASE("deform: batch equals one point at a time") {
  Rng rng(5);
  DeformationField f = init_field(99);
  // Give the output head nonzero weights so the warp is nontrivial.
  for (std::size_t i = 0; i < f.w4.size(); ++i) f.w4[i] = rng.uniform(-0.02, 0.02);
  const std::vector<Vec3> pts = random_points(rng, 1000);
  const std::vector<Vec3> batch = deform(f, pts);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const std::vector<Vec3> one = deform(f, {pts[i]});
    CHECK(batch[i] == one[0]);  // bitwise: same per-point loops
  }
}

TEST_CASE("deform: non-finite input is rejected") {
  const DeformationField f = init_field(0);
  CHECK_THROWS_AS(deform(f, {Vec3{std::nan(""), 0, 0}}), Error);
}

TEST_CASE("deform_partial: gamma endpoints and exact linearity") {
  Rng rng(6);
  DeformationField f = init_field(4);
  for (std::size_t i = 0; i < f.w4.size(); ++i) f.w4[i] = rng.uniform(-0.05, 0.05);
  for (std::size_t i = 0; i < f.b4.size(); ++i) f.b4[i] = rng.uniform(-0.05, 0.05);
  const std::vector<Vec3> pts = random_points(rng, 200, -2.0, 2.0);

  const std::vector<Vec3> at0 = deform_partial(f, pts, 0.0);
  const std::vector<Vec3> at1 = deform_partial(f, pts, 1.0);
  const std::vector<Vec3> full = deform(f, pts);
  const std::vector<Vec3> at2 = deform_partial(f, pts, 2.0);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    CHECK(at0[i] == pts[i]);  // bitwise at gamma = 0
    CHECK(at1[i] == full[i]);
    const Vec3 d1 = at1[i] - pts[i];
    const Vec3 d2 = at2[i] - pts[i];
    CHECK(std::abs(d2.x - 2.0 * d1.x) <= 1e-12);
    CHECK(std::abs(d2.y - 2.0 * d1.y) <= 1e-12);
    CHECK(std::abs(d2.z - 2.0 * d1.z) <= 1e-12);
  }
}

TEST_CASE("field tape forward matches the plain evaluation") {
  Rng rng(8);
  DeformationField f = init_field(21);
  for (std::size_t i = 0; i < f.w4.size(); ++i) f.w4[i] = rng.uniform(-0.05, 0.05);
  const std::vector<Vec3> pts = random_points(rng, 64);

  Tape tape;
  const FieldParams params = field_parameters(tape, f);
  const Tensor input = tape.constant({pts.size(), 3}, flatten(pts));
  const Tensor residual = field_residual_tensor(tape, params, input, f.omega0);
  const std::vector<Vec3> plain = field_residuals(f, pts);
  const std::vector<double>& from_tape = tape.value(residual);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    CHECK(from_tape[3 * i] == doctest::Approx(plain[i].x).epsilon(1e-13));
    CHECK(from_tape[3 * i + 1] == doctest::Approx(plain[i].y).epsilon(1e-13));
    CHECK(from_tape[3 * i + 2] == doctest::Approx(plain[i].z).epsilon(1e-13));
  }
}

TEST_CASE("smoothness: bounded outputs over a wide box") {
  Rng rng(77);
  DeformationField f = init_field(55);
  for (std::size_t i = 0; i < f.w4.size(); ++i) f.w4[i] = rng.uniform(-0.1, 0.1);
  const std::vector<Vec3> pts = random_points(rng, 500, -10.0, 10.0);
  const std::vector<Vec3> out = deform(f, pts);
  for (const Vec3& p : out) {
    CHECK(is_finite(p));
  }
  // Sine layers keep activations in [-1,1]; the residual is bounded by the
  // output head's l1 norms.
  double bound = norm(Vec3{0, 0, 0});
  double w4_l1 = 0.0;
  for (double v : f.w4) w4_l1 += std::abs(v);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    CHECK(norm(out[i] - pts[i]) <= w4_l1 + 1e-12);
  }
  (void)bound;
}

TEST_CASE("save/load: bitwise round trip") {
  Rng rng(3);
  DeformationField f = init_field(17, 25.0);
  for (std::size_t i = 0; i < f.w4.size(); ++i) f.w4[i] = rng.uniform(-1, 1);
  const std::string path = temp_path("dpf_field_roundtrip.dpf");
  save_field(f, path);
  const DeformationField g = load_field(path);
  CHECK(f.omega0 == g.omega0);
  CHECK(f.w1 == g.w1);
  CHECK(f.b1 == g.b1);
  CHECK(f.w2 == g.w2);
  CHECK(f.w3 == g.w3);
  CHECK(f.w4 == g.w4);
  CHECK(f.b4 == g.b4);

  Rng prng(10);
  const std::vector<Vec3> pts = random_points(prng, 32);
  const std::vector<Vec3> a = deform(f, pts);
  const std::vector<Vec3> b = deform(g, pts);
  for (std::size_t i = 0; i < pts.size(); ++i) CHECK(a[i] == b[i]);
  std::remove(path.c_str());
}

TEST_CASE("load: truncated checkpoint is a format error") {
  const DeformationField f = init_field(2);
  const std::string bytes = encode_field(f);
  try {
    decode_field(bytes.substr(0, bytes.size() / 2));
    FAIL("expected Format");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Format);
  }
}

TEST_CASE("load: wrong hidden width names both dimensions") {
  const DeformationField f = init_field(2);
  std::string bytes = encode_field(f);
  // Patch the first hidden dimension from 128 to 64 (u32 LE at offset 12).
  bytes[12] = 64;
  try {
    decode_field(bytes);
    FAIL("expected Format");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Format);
    const std::string msg = e.what();
    CHECK(msg.find("64") != std::string::npos);
    CHECK(msg.find("128") != std::string::npos);
  }
}

TEST_CASE("load: single flipped payload byte fails the checksum") {
  const DeformationField f = init_field(5);
  std::string bytes = encode_field(f);
  bytes[bytes.size() / 2] = static_cast<char>(bytes[bytes.size() / 2] ^ 0x40);
  try {
    decode_field(bytes);
    FAIL("expected Format");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Format);
    CHECK(std::string(e.what()).find("checksum") != std::string::npos);
  }
}

TEST_CASE("load: bad magic") {
  try {
    decode_field("NOPE");
    FAIL("expected Format");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Format);
    CHECK(std::string(e.what()).find("magic") != std::string::npos);
  }
}
