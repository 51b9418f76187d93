#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "aimix/optimize.hpp"

using namespace aimix;

namespace {

optimize::Objective quadratic(std::vector<double> center,
                              std::vector<double> curv) {
  return [center = std::move(center),
          curv = std::move(curv)](std::span<const double> x,
                                  std::span<double> g) {
    double f = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
      const double d = x[i] - center[i];
      f -= 0.5 * curv[i] * d * d;
      g[i] = -curv[i] * d;
    }
    return f;
  };
}

} // namespace

TEST_CASE("maximize: unconstrained interior optimum") {
  const optimize::Box box{{-10.0, -10.0, -10.0}, {10.0, 10.0, 10.0}};
  const auto res = optimize::maximize(quadratic({1.0, -2.0, 3.5}, {1.0, 4.0, 0.5}),
                                      {0.0, 0.0, 0.0}, box);
  REQUIRE(res.converged);
  CHECK(res.x[0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(res.x[1] == doctest::Approx(-2.0).epsilon(1e-6));
  CHECK(res.x[2] == doctest::Approx(3.5).epsilon(1e-6));
  CHECK(res.f == doctest::Approx(0.0).epsilon(1e-10));
}

TEST_CASE("maximize: optimum pinned at a bound") {
  const optimize::Box box{{0.0, 0.0}, {2.0, 2.0}};
  // unconstrained maximum at (3, 1); box clips the first coordinate
  const auto res =
      optimize::maximize(quadratic({3.0, 1.0}, {2.0, 2.0}), {1.0, 1.0}, box);
  REQUIRE(res.converged);
  CHECK(res.x[0] == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(res.x[1] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("maximize: ill-conditioned ridge (Rosenbrock-style)") {
  const optimize::Box box{{-5.0, -5.0}, {5.0, 5.0}};
  const auto res = optimize::maximize(
      [](std::span<const double> x, std::span<double> g) {
        const double a = 1.0 - x[0];
        const double b = x[1] - x[0] * x[0];
        g[0] = 2.0 * a + 400.0 * x[0] * b;
        g[1] = -200.0 * b;
        return -(a * a + 100.0 * b * b);
      },
      {-1.2, 1.0}, box, 1e-10, 20000);
  REQUIRE(res.converged);
  CHECK(res.x[0] == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(res.x[1] == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("maximize: deterministic") {
  const optimize::Box box{{-10.0, -10.0}, {10.0, 10.0}};
  const auto obj = quadratic({0.3, 0.7}, {3.0, 0.1});
  const auto a = optimize::maximize(obj, {5.0, -5.0}, box);
  const auto b = optimize::maximize(obj, {5.0, -5.0}, box);
  CHECK(a.x == b.x);
  CHECK(a.f == b.f);
  CHECK(a.n_evals == b.n_evals);
}

TEST_CASE("maximize_scalar: golden section") {
  const double x = optimize::maximize_scalar(
      [](double t) { return -(t - 0.3) * (t - 0.3); }, 0.0, 1.0);
  CHECK(x == doctest::Approx(0.3).epsilon(1e-7));
  const double edge = optimize::maximize_scalar(
      [](double t) { return t; }, 0.0, 1.0);
  CHECK(edge == doctest::Approx(1.0).epsilon(1e-7));
}
