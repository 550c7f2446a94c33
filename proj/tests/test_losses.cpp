#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "benchgen.hpp"
#include "error.hpp"
#include "losses.hpp"
#include "rng.hpp"
#include "sampling.hpp"

using namespace dpf;

namespace {

PointSet random_pointset(Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  PointSet out;
  for (std::size_t i = 0; i < n; ++i) {
    out.positions.push_back(Vec3{rng.uniform(lo, hi), rng.uniform(lo, hi), rng.uniform(lo, hi)});
    out.normals.push_back(rng.unit_vector());
  }
  return out;
}

PointSet cube_corners(const Vec3& shift, const Vec3& normal) {
  PointSet out;
  for (int x = 0; x <= 1; ++x)
    for (int y = 0; y <= 1; ++y)
      for (int z = 0; z <= 1; ++z) {
        out.positions.push_back(Vec3{double(x), double(y), double(z)} + shift);
        out.normals.push_back(normal);
      }
  return out;
}

// Brute-force chamfer oracle: full O(n*m) scans, same arithmetic.
ChamferValue brute_chamfer(const PointSet& x, const PointSet& y) {
  auto direction = [](const PointSet& a, const PointSet& b, double& cd_sum, double& n_sum) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      std::size_t best_j = 0;
      for (std::size_t j = 0; j < b.size(); ++j) {
        const double d2 = squared_distance(a.positions[i], b.positions[j]);
        if (d2 < best) {
          best = d2;
          best_j = j;
        }
      }
      cd_sum += best;
      const Vec3& nb = b.normals[best_j];
      const double sign = dot(a.normals[i], nb) < 0.0 ? -1.0 : 1.0;
      n_sum += 0.5 * squared_distance(a.normals[i], nb * sign);
    }
  };
  double cd_x = 0, cd_y = 0, n = 0;
  direction(x, y, cd_x, n);
  direction(y, x, cd_y, n);
  ChamferValue out;
  out.cd = cd_x / double(x.size()) + cd_y / double(y.size());
  out.n = n / double(x.size() + y.size());
  return out;
}

Vec3 rotate_z(const Vec3& v, double a) {
  return Vec3{v.x * std::cos(a) - v.y * std::sin(a), v.x * std::sin(a) + v.y * std::cos(a), v.z};
}

}  // namespace

TEST_CASE("chamfer: identical sets give zero") {
  Rng rng(1);
  const PointSet x = random_pointset(rng, 40);
  const ChamferValue v = chamfer_loss(x, x);
  CHECK(v.cd == 0.0);
  CHECK(v.n == 0.0);
}

TEST_CASE("chamfer: single pair squared distance in both directions") {
  PointSet x, y;
  x.positions = {{0, 0, 0}};
  x.normals = {{0, 0, 1}};
  y.positions = {{1, 0, 0}};
  y.normals = {{0, 0, 1}};
  const ChamferValue v = chamfer_loss(x, y);
  CHECK(v.cd == doctest::Approx(2.0));
  CHECK(v.n == doctest::Approx(0.0));
}

TEST_CASE("chamfer: shifted cube corners match the 64-pair brute force") {
  const PointSet x = cube_corners(Vec3{0, 0, 0}, Vec3{0, 0, 1});
  const PointSet y = cube_corners(Vec3{0.1, 0, 0}, Vec3{0, 0, 1});
  const ChamferValue got = chamfer_loss(x, y);
  const ChamferValue want = brute_chamfer(x, y);
  CHECK(got.cd == want.cd);
  CHECK(got.cd == doctest::Approx(0.02));
  CHECK(got.n == 0.0);
}

TEST_CASE("chamfer: symmetry and rigid invariance") {
  Rng rng(2);
  const PointSet x = random_pointset(rng, 33);
  const PointSet y = random_pointset(rng, 47);
  const ChamferValue xy = chamfer_loss(x, y);
  const ChamferValue yx = chamfer_loss(y, x);
  CHECK(xy.cd == yx.cd);
  CHECK(xy.n == yx.n);

  const double angle = 0.83;
  const Vec3 shift{0.4, -0.2, 0.9};
  auto moved = [&](const PointSet& p) {
    PointSet out;
    for (std::size_t i = 0; i < p.size(); ++i) {
      out.positions.push_back(rotate_z(p.positions[i], angle) + shift);
      out.normals.push_back(rotate_z(p.normals[i], angle));
    }
    return out;
  };
  const ChamferValue rigid = chamfer_loss(moved(x), moved(y));
  CHECK(std::abs(rigid.cd - xy.cd) < 1e-9);
  CHECK(std::abs(rigid.n - xy.n) < 1e-9);
}

TEST_CASE("chamfer: empty sets are rejected") {
  PointSet empty;
  Rng rng(3);
  const PointSet x = random_pointset(rng, 4);
  try {
    chamfer_loss(empty, x);
    FAIL("expected EmptySet");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptySet);
  }
}

TEST_CASE("chamfer tensor: values match the plain path and gradients flow to x only") {
  Rng rng(4);
  const PointSet x = random_pointset(rng, 12);
  const PointSet y = random_pointset(rng, 20);
  Tape tape;
  const Tensor xp = tape.parameter({x.size(), 3}, flatten(x.positions));
  const Tensor xn = tape.parameter({x.size(), 3}, flatten(x.normals));
  const ChamferTensors t = chamfer_loss_tensor(tape, xp, xn, y);
  const ChamferValue plain = chamfer_loss(x, y);
  CHECK(tape.scalar_value(t.cd) == doctest::Approx(plain.cd).epsilon(1e-12));
  CHECK(tape.scalar_value(t.n) == doctest::Approx(plain.n).epsilon(1e-12));

  tape.backward(tape.add(t.cd, t.n));
  CHECK(tape.grad(xp).size() == 3 * x.size());
  CHECK(tape.grad(xn).size() == 3 * x.size());
}

TEST_CASE("chamfer gradients pass a finite-difference check") {
  Rng rng(5);
  const PointSet x = random_pointset(rng, 10);
  const PointSet y = random_pointset(rng, 10);
  auto build = [&](Tape& tape, const std::vector<Tensor>& params) {
    const ChamferTensors t = chamfer_loss_tensor(tape, params[0], params[1], y);
    return tape.add(t.cd, t.n);
  };
  const double err =
      grad_check(build, {{x.size(), 3}, {x.size(), 3}}, {flatten(x.positions), flatten(x.normals)},
                 1e-5);
  CHECK(err < 1e-4);
}

TEST_CASE("iso: zero for identity and rigid motions") {
  Rng rng(6);
  const PointSet x = random_pointset(rng, 50);
  const auto lists = build_neighborhoods(x.positions, 5);
  CHECK(iso_loss(x.positions, x.positions, lists) == 0.0);

  std::vector<Vec3> moved;
  for (const Vec3& p : x.positions) moved.push_back(rotate_z(p, 1.2) + Vec3{3, -1, 2});
  CHECK(iso_loss(x.positions, moved, lists) < 1e-10);
}

TEST_CASE("iso: two points at distance 1 scaled by 2 give mean 1") {
  const std::vector<Vec3> canonical = {{0, 0, 0}, {1, 0, 0}};
  const std::vector<Vec3> scaled = {{0, 0, 0}, {2, 0, 0}};
  const auto lists = build_neighborhoods(canonical, 1);
  // Two ordered pairs, each |1 - 2| = 1.
  CHECK(iso_loss(canonical, scaled, lists) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("iso: strictly positive for non-unit uniform scaling") {
  Rng rng(7);
  const PointSet x = random_pointset(rng, 30);
  const auto lists = build_neighborhoods(x.positions, 5);
  for (double s : {0.5, 2.0, 1.3}) {
    std::vector<Vec3> scaled;
    for (const Vec3& p : x.positions) scaled.push_back(p * s);
    CHECK(iso_loss(x.positions, scaled, lists) > 1e-6);
  }
}

TEST_CASE("iso: length mismatch and empty neighborhoods") {
  const std::vector<Vec3> canonical = {{0, 0, 0}, {1, 0, 0}};
  const auto lists = build_neighborhoods(canonical, 1);
  CHECK_THROWS_AS(iso_loss(canonical, {{0, 0, 0}}, lists), Error);
  CHECK_THROWS_AS(build_neighborhoods({{0, 0, 0}}, 1), Error);
}

TEST_CASE("iso tensor matches the plain value bitwise") {
  Rng rng(8);
  const PointSet x = random_pointset(rng, 25);
  std::vector<Vec3> moved;
  for (const Vec3& p : x.positions) moved.push_back(p * 1.4 + Vec3{0.1, 0, 0});
  const IsoPairs pairs = build_iso_pairs(x.positions, 5);
  const double plain = iso_loss(pairs, moved);

  Tape tape;
  const Tensor d = tape.parameter({moved.size(), 3}, flatten(moved));
  const Tensor loss = iso_loss_tensor(tape, pairs, d);
  CHECK(tape.scalar_value(loss) == plain);
}

TEST_CASE("iso gradients pass a finite-difference check") {
  Rng rng(9);
  const PointSet x = random_pointset(rng, 10);
  const IsoPairs pairs = build_iso_pairs(x.positions, 3);
  std::vector<double> deformed = flatten(x.positions);
  for (double& v : deformed) v += rng.uniform(-0.05, 0.05);
  auto build = [&](Tape& tape, const std::vector<Tensor>& params) {
    return iso_loss_tensor(tape, pairs, params[0]);
  };
  const double err = grad_check(build, {{x.size(), 3}}, {deformed}, 1e-6);
  CHECK(err < 1e-4);
}

TEST_CASE("iso gamma: zero gamma, identity fields and translations all vanish") {
  Rng rng(10);
  const PointSet x = random_pointset(rng, 20);
  const auto lists = build_neighborhoods(x.positions, 4);

  const DeformationField identity = init_field(3);
  CHECK(iso_loss_gamma(identity, x.positions, lists, {0.0}) == 0.0);
  CHECK(iso_loss_gamma(identity, x.positions, lists, {0.0, 0.5, 1.0, 2.0}) == 0.0);

  // A constant-translation field: zero hidden wiring, bias-only output.
  DeformationField translation = init_field(4);
  std::fill(translation.w1.begin(), translation.w1.end(), 0.0);
  std::fill(translation.w2.begin(), translation.w2.end(), 0.0);
  std::fill(translation.w3.begin(), translation.w3.end(), 0.0);
  translation.b4 = {0.3, -0.2, 0.7};
  for (double gamma : {0.25, 1.0, 1.75}) {
    CHECK(iso_loss_gamma(translation, x.positions, lists, {gamma}) < 1e-12);
  }
}

TEST_CASE("keypoint: identity field measures the mean L1 displacement") {
  const DeformationField identity = init_field(11);

  CorrespondenceSet one;
  one.pairs = {{Vec3{0, 0, 0}, Vec3{1, 2, 3}}};
  CHECK(keypoint_loss(identity, one) == doctest::Approx(6.0));

  CorrespondenceSet two;
  two.pairs = {{Vec3{0, 0, 0}, Vec3{1, 0, 0}}, {Vec3{1, 1, 1}, Vec3{1, 1, 3}}};
  CHECK(keypoint_loss(identity, two) == doctest::Approx(1.5));
}

TEST_CASE("keypoint: exact reproduction gives zero") {
  // Translation field moving sources exactly onto targets.
  DeformationField f = init_field(12);
  std::fill(f.w1.begin(), f.w1.end(), 0.0);
  std::fill(f.w2.begin(), f.w2.end(), 0.0);
  std::fill(f.w3.begin(), f.w3.end(), 0.0);
  f.b4 = {0.5, 0.0, -1.0};
  CorrespondenceSet pairs;
  pairs.pairs = {{Vec3{0, 0, 0}, Vec3{0.5, 0, -1}}, {Vec3{1, 2, 3}, Vec3{1.5, 2, 2}}};
  CHECK(keypoint_loss(f, pairs) < 1e-12);
}

TEST_CASE("keypoint: empty set is rejected; tensor matches plain") {
  const DeformationField f = init_field(13);
  CorrespondenceSet empty;
  CHECK_THROWS_AS(keypoint_loss(f, empty), Error);

  CorrespondenceSet pairs;
  Rng rng(14);
  for (int i = 0; i < 7; ++i) {
    pairs.pairs.push_back(Correspondence{rng.unit_vector(), rng.unit_vector()});
  }
  Tape tape;
  const FieldParams params = field_parameters(tape, f);
  const Tensor loss = keypoint_loss_tensor(tape, params, f.omega0, pairs);
  CHECK(tape.scalar_value(loss) == doctest::Approx(keypoint_loss(f, pairs)).epsilon(1e-13));
}

TEST_CASE("keypoint gradients pass a finite-difference check") {
  Rng rng(15);
  CorrespondenceSet pairs;
  for (int i = 0; i < 6; ++i) {
    pairs.pairs.push_back(Correspondence{rng.unit_vector(), rng.unit_vector()});
  }
  DeformationField f = init_field(16);
  for (double& v : f.w4) v = rng.uniform(-0.05, 0.05);

  auto build = [&](Tape& tape, const std::vector<Tensor>& params) {
    FieldParams fp{params[0], params[1], params[2], params[3],
                   params[4], params[5], params[6], params[7]};
    return keypoint_loss_tensor(tape, fp, f.omega0, pairs);
  };
  const double err = grad_check(
      build,
      {{3, 128}, {128}, {128, 128}, {128}, {128, 128}, {128}, {128, 3}, {3}},
      {f.w1, f.b1, f.w2, f.b2, f.w3, f.b3, f.w4, f.b4}, 1e-5);
  CHECK(err < 1e-4);
}

TEST_CASE("surface loss: self-sampling with matching seed is near zero") {
  const TriMesh sphere = make_icosphere(2);
  SurfaceLossOptions options;
  options.sample_count = 2000;
  options.sample_seed = 99;
  const PointSet x = sample_surface(sphere, 2000, 99);  // same sample as internal
  LossWeights w;
  w.lambda_ni = 0.0;
  const SurfaceLossValue v = surface_loss(x, sphere, w, false, options);
  CHECK(v.cd == 0.0);
  CHECK(v.n == 0.0);
  CHECK(v.total == 0.0);
}

TEST_CASE("surface loss: all-zero weights give zero") {
  const TriMesh sphere = make_icosphere(1);
  const PointSet x = sample_surface(sphere, 100, 1);
  LossWeights w;
  w.lambda_cd = w.lambda_n = w.lambda_ni = 0.0;
  SurfaceLossOptions options;
  options.sample_count = 128;
  const SurfaceLossValue v = surface_loss(x, sphere, w, false, options);
  CHECK(v.total == 0.0);
}

TEST_CASE("surface loss: image term without a renderer is an error") {
  const TriMesh sphere = make_icosphere(1);
  const PointSet x = sample_surface(sphere, 64, 1);
  LossWeights w;  // default lambda_ni = 10
  SurfaceLossOptions options;
  options.sample_count = 64;
  try {
    surface_loss(x, sphere, w, false, options);
    FAIL("expected MissingRenderer");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingRenderer);
  }
}

TEST_CASE("surface loss: default weights from a fresh config") {
  const LossWeights w;
  CHECK(w.lambda_cd == 1e4);
  CHECK(w.lambda_n == 1.0);
  CHECK(w.lambda_ni == 10.0);
}

TEST_CASE("combined loss: identity field on matching geometry is exactly zero") {
  Rng rng(17);
  const PointSet x = random_pointset(rng, 30);
  const DeformationField identity = init_field(18);
  CorrespondenceSet pairs;
  for (int i = 0; i < 5; ++i) {
    const Vec3 p = x.positions[i];
    pairs.pairs.push_back(Correspondence{p, p});
  }
  LossWeights w;
  w.lambda_s = 1.0;
  w.lambda_iso = 0.1;
  w.lambda_v = 1.0;
  CombinedLossOptions options;
  const CombinedLossValue v = combined_loss(identity, x, Frame{x}, &pairs, w, options);
  CHECK(v.total == 0.0);
  CHECK(v.cd == 0.0);
  CHECK(v.iso == 0.0);
  CHECK(v.v == 0.0);
}

TEST_CASE("combined loss: all-zero weights raise AtLeastOneTerm") {
  Rng rng(19);
  const PointSet x = random_pointset(rng, 10);
  const DeformationField f = init_field(20);
  LossWeights w;
  w.lambda_s = w.lambda_iso = w.lambda_v = 0.0;
  try {
    combined_loss(f, x, Frame{x}, nullptr, w, {});
    FAIL("expected AtLeastOneTerm");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::AtLeastOneTerm);
  }
}

TEST_CASE("combined loss: keypoint term without pairs raises MissingCorrespondences") {
  Rng rng(21);
  const PointSet x = random_pointset(rng, 10);
  const DeformationField f = init_field(22);
  LossWeights w;
  w.lambda_s = 0.0;
  w.lambda_iso = 0.1;
  w.lambda_v = 1.0;
  try {
    combined_loss(f, x, Frame{x}, nullptr, w, {});
    FAIL("expected MissingCorrespondences");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingCorrespondences);
  }
}

TEST_CASE("combined loss gradients pass a finite-difference check on a 10-point scene") {
  Rng rng(23);
  const PointSet canonical = random_pointset(rng, 10);
  PointSet target = canonical;
  for (Vec3& p : target.positions) p += Vec3{rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1),
                                             rng.uniform(-0.1, 0.1)};
  CorrespondenceSet pairs;
  for (int i = 0; i < 4; ++i) {
    pairs.pairs.push_back(Correspondence{canonical.positions[i], target.positions[i]});
  }
  DeformationField f = init_field(24);
  for (double& v : f.w4) v = rng.uniform(-0.02, 0.02);

  LossWeights w;
  w.lambda_s = 1.0;
  w.lambda_cd = 10.0;
  w.lambda_n = 1.0;
  w.lambda_ni = 0.0;  // the image term is checked separately in the render tests
  w.lambda_iso = 0.5;
  w.lambda_v = 1.0;
  const IsoPairs iso_pairs = build_iso_pairs(canonical.positions, 3);
  CombinedLossOptions options;

  auto build = [&](Tape& tape, const std::vector<Tensor>& params) {
    FieldParams fp{params[0], params[1], params[2], params[3],
                   params[4], params[5], params[6], params[7]};
    return combined_loss_tensor(tape, fp, f.omega0, canonical, Frame{target}, &pairs, w, iso_pairs,
                                options)
        .total;
  };
  const double err = grad_check(
      build,
      {{3, 128}, {128}, {128, 128}, {128}, {128, 128}, {128}, {128, 3}, {3}},
      {f.w1, f.b1, f.w2, f.b2, f.w3, f.b3, f.w4, f.b4}, 1e-5);
  CHECK(err < 1e-4);
}
