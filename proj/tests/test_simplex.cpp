#include "geocomp/errors.hpp"
#include "geocomp/simplex.hpp"

#include <doctest.h>

#include <array>
#include <cmath>
#include <numbers>
#include <random>

using namespace geocomp;

namespace {

double sum(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

Composition random_composition(std::mt19937_64& gen, std::size_t parts) {
  std::gamma_distribution<double> g(0.7, 1.0);
  std::vector<double> raw(parts);
  for (auto& r : raw) r = g(gen) + 1e-6;
  return closure(raw);
}

}  // namespace

TEST_CASE("closure normalizes") {
  const std::array<double, 3> raw{2, 1, 1};
  const Composition c = closure(raw);
  CHECK(c[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(c[1] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(c[2] == doctest::Approx(0.25).epsilon(1e-15));
  const std::array<double, 3> ones{1, 1, 1};
  const Composition u = closure(ones);
  for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(u[j] - 1.0 / 3.0) < 1e-15);
}

TEST_CASE("closure rejects a zero part and names it") {
  const std::array<double, 3> raw{0, 1, 1};
  try {
    closure(raw);
    FAIL("expected domain_error");
  } catch (const std::domain_error& e) {
    CHECK(std::string(e.what()).find('0') != std::string::npos);
  }
}

TEST_CASE("composition validation") {
  CHECK_THROWS_AS(Composition({1.0}, 0), std::domain_error);
  CHECK_THROWS_AS(Composition({0.5, 0.6}, 1), std::domain_error);
  CHECK_THROWS_AS(Composition({0.5, 0.5}, 2), std::domain_error);
  CHECK_THROWS_AS(Composition({-0.5, 1.5}, 1), std::domain_error);
  CHECK_NOTHROW(Composition({0.5, 0.5}, 0));
}

TEST_CASE("alr values") {
  const Composition eq({1.0 / 3, 1.0 / 3, 1.0 / 3}, 2);
  const AlrVector z = alr(eq);
  CHECK(z.values.size() == 2);
  CHECK(std::abs(z.values[0]) < 1e-15);
  CHECK(std::abs(z.values[1]) < 1e-15);

  const Composition x({0.5, 0.2, 0.3}, 2);
  const AlrVector y = alr(x);
  CHECK(std::abs(y.values[0] - std::log(0.5 / 0.3)) < 1e-15);
  CHECK(std::abs(y.values[1] - std::log(0.2 / 0.3)) < 1e-15);
  CHECK(std::abs(y.values[0] - 0.510826) < 1e-6);
  CHECK(std::abs(y.values[1] + 0.405465) < 1e-6);
}

TEST_CASE("alr skips an interior denominator") {
  const Composition x({0.5, 0.2, 0.3}, 0);
  const AlrVector y = alr(x);
  CHECK(std::abs(y.values[0] - std::log(0.2 / 0.5)) < 1e-15);
  CHECK(std::abs(y.values[1] - std::log(0.3 / 0.5)) < 1e-15);
  const Composition back = agl(y);
  for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(back[j] - x[j]) < 1e-15);
}

TEST_CASE("agl values") {
  Eigen::Vector2d z(0, 0);
  const Composition u = agl({z, 2});
  for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(u[j] - 1.0 / 3.0) < 1e-15);

  const Composition h = agl({Eigen::Vector2d(std::log(2.0), 0.0), 2});
  CHECK(std::abs(h[0] - 0.5) < 1e-15);
  CHECK(std::abs(h[1] - 0.25) < 1e-15);
  CHECK(std::abs(h[2] - 0.25) < 1e-15);

  const Composition big = agl({Eigen::Vector2d(50.0, 0.0), 2});
  CHECK(std::abs(sum(big.parts()) - 1.0) < 1e-12);
  CHECK(big[0] >= 1.0 - 1e-20);
  CHECK(std::abs(big[1] - std::exp(-50.0)) < 1e-35);
  CHECK(big[1] > 0.0);

  const Composition huge = agl({Eigen::Vector2d(700.0, 0.0), 2});
  CHECK(std::isfinite(huge[0]));
  CHECK(std::abs(sum(huge.parts()) - 1.0) < 1e-12);
}

TEST_CASE("round trips") {
  std::mt19937_64 gen(11);
  for (int k = 0; k < 2000; ++k) {
    const std::size_t parts = 2 + static_cast<std::size_t>(k % 5);
    const Composition x = random_composition(gen, parts);
    const Composition back = agl(alr(x));
    for (std::size_t j = 0; j < parts; ++j) REQUIRE(std::abs(back[j] - x[j]) < 1e-12);
    CHECK(std::abs(sum(back.parts()) - 1.0) < 1e-12);
  }
  std::normal_distribution<double> n(0.0, 3.0);
  for (int k = 0; k < 2000; ++k) {
    Eigen::VectorXd y(3);
    for (int r = 0; r < 3; ++r) y[r] = n(gen);
    const AlrVector back = alr(agl({y, 3}));
    REQUIRE((back.values - y).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("geometric mean") {
  const Composition a({0.5, 0.25, 0.25}, 2);
  const Composition b({0.25, 0.5, 0.25}, 2);
  const std::vector<Composition> one{a};
  const Composition g1 = geometric_mean(one);
  for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(g1[j] - a[j]) < 1e-15);

  const std::vector<Composition> two{a, b};
  const Composition g = geometric_mean(two);
  const double r = std::sqrt(0.125);
  const double total = 2 * r + 0.25;
  CHECK(std::abs(g[0] - r / total) < 1e-15);
  CHECK(std::abs(g[1] - r / total) < 1e-15);
  CHECK(std::abs(g[2] - 0.25 / total) < 1e-15);
  CHECK(std::abs(g[0] - 0.369398) < 1e-6);
  CHECK(std::abs(g[2] - 0.261204) < 1e-6);

  // Permuting parts permutes the mean.
  const std::vector<Composition> swapped{Composition({0.25, 0.5, 0.25}, 2), Composition({0.5, 0.25, 0.25}, 2)};
  const Composition gs = geometric_mean(swapped);
  CHECK(std::abs(gs[0] - g[1]) < 1e-15);
  CHECK(std::abs(gs[1] - g[0]) < 1e-15);

  CHECK_THROWS_AS(geometric_mean(std::vector<Composition>{}), std::domain_error);
  CHECK(most_abundant_part(two) == 0);
  const std::vector<Composition> clay{Composition({0.1, 0.3, 0.6}, 2), Composition({0.2, 0.2, 0.6}, 2)};
  CHECK(most_abundant_part(clay) == 2);
}

TEST_CASE("aln density at B = 2 matches the logistic-normal change of variables") {
  const double mu = 0.3, s2 = 0.7;
  for (double x1 : {0.1, 0.35, 0.5, 0.9}) {
    const Composition x({x1, 1 - x1}, 1);
    const double y = std::log(x1 / (1 - x1));
    // Density of x1 on (0,1): phi(y) / (x1 (1 - x1)).
    const double expected = -0.5 * std::log(2 * std::numbers::pi * s2) - 0.5 * (y - mu) * (y - mu) / s2 -
                            std::log(x1) - std::log(1 - x1);
    const double got = aln_log_density(x, {Eigen::VectorXd::Constant(1, mu), 1}, Eigen::MatrixXd::Constant(1, 1, s2));
    CHECK(std::abs(got - expected) < 1e-13);
  }
}

TEST_CASE("aln density integrates to one over the 3-part simplex") {
  // Uniform sampling on the simplex (density 2 on the x1,x2 triangle).
  Eigen::Vector2d mu(0.2, -0.1);
  Eigen::Matrix2d sig;
  sig << 0.4, 0.1, 0.1, 0.3;
  std::mt19937_64 gen(5);
  std::exponential_distribution<double> e(1.0);
  const int m = 400000;
  double s = 0.0, s2 = 0.0;
  for (int k = 0; k < m; ++k) {
    std::array<double, 3> raw{e(gen), e(gen), e(gen)};
    const Composition x = closure(raw);
    const double f = std::exp(aln_log_density(x, {mu, 2}, sig)) / 2.0;
    s += f;
    s2 += f * f;
  }
  const double mean = s / m;
  const double se = std::sqrt((s2 / m - mean * mean) / m);
  CHECK(std::abs(mean - 1.0) < 3 * se);
}

TEST_CASE("aln density rejects a non-PD covariance") {
  const Composition x({0.2, 0.3, 0.5}, 2);
  Eigen::Matrix2d bad;
  bad << 1, 2, 2, 1;
  CHECK_THROWS_AS(aln_log_density(x, {Eigen::Vector2d(0, 0), 2}, bad), NumericError);
}
