#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>

#include "error.hpp"
#include "optim.hpp"
#include "rng.hpp"

using namespace dpf;

TEST_CASE("adam: first step moves by ~lr in the gradient's sign direction") {
  std::vector<double> params = {1.0, -2.0, 3.0};
  Adam adam(1e-3);
  adam.add_parameters("x", &params);
  const std::vector<double> grads = {0.5, -1.5, 2.0};
  adam.step({grads});
  // At t=1 the bias-corrected ratio is g/(|g| + eps') ~= sign(g).
  CHECK(params[0] == doctest::Approx(1.0 - 1e-3).epsilon(1e-6));
  CHECK(params[1] == doctest::Approx(-2.0 + 1e-3).epsilon(1e-6));
  CHECK(params[2] == doctest::Approx(3.0 - 1e-3).epsilon(1e-6));
}

TEST_CASE("adam: zero gradient leaves parameters in place") {
  std::vector<double> params = {0.25, -0.75};
  Adam adam(0.1);
  adam.add_parameters("x", &params);
  adam.step({{0.0, 0.0}});
  CHECK(params[0] == 0.25);
  CHECK(params[1] == -0.75);
  CHECK(adam.step_count() == 1);
}

TEST_CASE("adam: converges on a convex quadratic") {
  std::vector<double> x = {5.0, 5.0};
  Adam adam(0.1);
  adam.add_parameters("x", &x);
  for (int step = 0; step < 2000; ++step) {
    adam.step({{2.0 * x[0], 2.0 * x[1]}});
  }
  CHECK(std::sqrt(x[0] * x[0] + x[1] * x[1]) < 1e-3);
}

TEST_CASE("adam: non-finite gradients name the parameter and index") {
  std::vector<double> x = {1.0, 2.0};
  Adam adam(0.1);
  adam.add_parameters("weights.level1", &x);
  try {
    adam.step({{0.0, std::nan("")}});
    FAIL("expected NonFiniteGradient");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonFiniteGradient);
    const std::string msg = e.what();
    CHECK(msg.find("weights.level1") != std::string::npos);
    CHECK(msg.find("1") != std::string::npos);
  }
}

TEST_CASE("adam: deterministic trajectory") {
  auto run = []() {
    std::vector<double> x = {0.3, -0.7, 0.1};
    Adam adam(0.05);
    adam.add_parameters("x", &x);
    Rng rng(5);
    for (int step = 0; step < 100; ++step) {
      adam.step({{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)}});
    }
    return x;
  };
  const auto a = run();
  const auto b = run();
  CHECK(a == b);
}

TEST_CASE("plateau: constant loss reduces the rate exactly at the patience mark") {
  PlateauSchedule schedule(1e-4, 200, 0.1, 1e-8);
  double lr = 1e-4;
  for (int call = 1; call <= 200; ++call) {
    lr = schedule.update(1.0);
    if (call < 200) CHECK(lr == 1e-4);
  }
  CHECK(lr == doctest::Approx(1e-5).epsilon(1e-12));
}

TEST_CASE("plateau: strictly decreasing loss never reduces the rate") {
  PlateauSchedule schedule(1e-4, 200, 0.1, 1e-8);
  double loss = 10.0;
  for (int call = 0; call < 1000; ++call) {
    CHECK(schedule.update(loss) == 1e-4);
    loss *= 0.999;
  }
}

TEST_CASE("plateau: improvement at call 199 resets the counter") {
  PlateauSchedule schedule(1e-4, 200, 0.1, 1e-8);
  for (int call = 1; call <= 198; ++call) CHECK(schedule.update(1.0) == 1e-4);
  CHECK(schedule.update(0.5) == 1e-4);  // call 199: improvement
  // 199 more flat calls only reach a stale count of 199.
  for (int call = 1; call <= 199; ++call) CHECK(schedule.update(0.5) == 1e-4);
  CHECK(schedule.update(0.5) == doctest::Approx(1e-5));  // the 200th flat call
}

TEST_CASE("plateau: rate is monotone non-increasing and floored") {
  PlateauSchedule schedule(1e-4, 10, 0.1, 1e-8);
  double last = 1e-4;
  for (int call = 0; call < 1000; ++call) {
    const double lr = schedule.update(2.0);
    CHECK(lr <= last);
    CHECK(lr >= 1e-8);
    last = lr;
  }
  CHECK(last == doctest::Approx(1e-8));
}

TEST_CASE("plateau: non-finite loss is rejected") {
  PlateauSchedule schedule(1e-4, 10, 0.1, 1e-8);
  CHECK_THROWS_AS(schedule.update(std::numeric_limits<double>::infinity()), Error);
}

TEST_CASE("plateau: sub-threshold relative improvements do not reset the counter") {
  PlateauSchedule schedule(1.0, 5, 0.5, 1e-12);
  double loss = 1.0;
  for (int call = 1; call <= 5; ++call) {
    loss -= 1e-15;  // relative change ~1e-15 < 1e-12
    schedule.update(loss);
  }
  CHECK(schedule.learning_rate() == doctest::Approx(0.5));
}
