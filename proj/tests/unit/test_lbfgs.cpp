#include <cmath>

#include "doctest.h"
#include "dsner/lbfgs.hpp"
#include "dsner/common.hpp"

using namespace dsner;

TEST_CASE("quadratic converges to its minimizer") {
  std::vector<double> target{1, -2, 3, 0.5};
  auto f = [&](const std::vector<double>& x, std::vector<double>& g) {
    double v = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double s = static_cast<double>(i + 1);
      v += s * (x[i] - target[i]) * (x[i] - target[i]);
      g[i] = 2 * s * (x[i] - target[i]);
    }
    return v;
  };
  std::vector<double> x(4, 0.0);
  auto r = lbfgs_minimize(f, x, {});
  CHECK(r.converged);
  for (std::size_t i = 0; i < 4; ++i) CHECK(x[i] == doctest::Approx(target[i]).epsilon(1e-5));
  for (std::size_t i = 1; i < r.history.size(); ++i) CHECK(r.history[i] <= r.history[i - 1]);
}

TEST_CASE("Rosenbrock") {
  auto f = [](const std::vector<double>& x, std::vector<double>& g) {
    const double a = 1 - x[0], b = x[1] - x[0] * x[0];
    g[0] = -2 * a - 400 * x[0] * b;
    g[1] = 200 * b;
    return a * a + 100 * b * b;
  };
  std::vector<double> x{-1.2, 1.0};
  LbfgsOptions o;
  o.max_iter = 500;
  o.tol = 1e-8;
  auto r = lbfgs_minimize(f, x, o);
  CHECK(x[0] == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(x[1] == doctest::Approx(1.0).epsilon(1e-4));
  for (std::size_t i = 1; i < r.history.size(); ++i) CHECK(r.history[i] <= r.history[i - 1]);
}

TEST_CASE("iteration limit and non-finite start") {
  auto f = [](const std::vector<double>& x, std::vector<double>& g) {
    g[0] = std::cos(x[0]) + 0.1 * x[0];
    return std::sin(x[0]) + 0.05 * x[0] * x[0];
  };
  std::vector<double> x{3.0};
  LbfgsOptions o;
  o.max_iter = 1;
  auto r = lbfgs_minimize(f, x, o);
  CHECK(r.iterations <= 1);
  auto bad = [](const std::vector<double>&, std::vector<double>& g) {
    g[0] = 0;
    return std::nan("");
  };
  std::vector<double> y{0.0};
  CHECK_THROWS_AS(lbfgs_minimize(bad, y, {}), Error);
}
