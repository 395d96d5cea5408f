#include "geocomp/errors.hpp"
#include "geocomp/spatial_cov.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace geocomp;

namespace {

CovarianceParams config1() {
  CovarianceParams p;
  p.sigma2 = Eigen::Vector2d(1.0, 2.25);
  p.tau2 = Eigen::Vector2d(0.09, 0.09);
  p.phi = 0.25;
  p.rho = Eigen::VectorXd::Constant(1, 0.9);
  return p;
}

SpatialLocations random_sites(int n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixX2d s(n, 2);
  for (int i = 0; i < n; ++i) s.row(i) << u(gen), u(gen);
  return SpatialLocations(s);
}

CovarianceParams random_params(std::mt19937_64& gen, std::size_t m) {
  std::uniform_real_distribution<double> v(0.2, 2.0), r(-0.5, 0.5);
  CovarianceParams p;
  p.sigma2.resize(static_cast<Eigen::Index>(m));
  p.tau2.resize(static_cast<Eigen::Index>(m));
  for (std::size_t k = 0; k < m; ++k) {
    p.sigma2[static_cast<Eigen::Index>(k)] = v(gen);
    p.tau2[static_cast<Eigen::Index>(k)] = v(gen);
  }
  p.phi = v(gen) * 0.3;
  p.rho.resize(static_cast<Eigen::Index>(m * (m - 1) / 2));
  for (Eigen::Index k = 0; k < p.rho.size(); ++k) p.rho[k] = r(gen);
  return p;
}

}  // namespace

TEST_CASE("correlation functions") {
  const CorrelationFamily exp_fam{CorrelationKind::exponential};
  const CorrelationFamily sph{CorrelationKind::spherical};
  CHECK(correlation(0.0, 2.0, exp_fam) == 1.0);
  CHECK(std::abs(correlation(2.0, 2.0, exp_fam) - std::exp(-1.0)) < 1e-15);
  CHECK(std::abs(correlation(2.0, 2.0, exp_fam) - 0.367879) < 1e-6);
  CHECK(correlation(2.0, 2.0, sph) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(correlation(4.0, 2.0, sph) == 0.0);
  CHECK(std::abs(correlation(1.0, 2.0, sph) - (1 - 0.75 + 0.0625)) < 1e-15);
  CHECK_THROWS_AS(correlation(1.0, 0.0, exp_fam), std::domain_error);
  CHECK_THROWS_AS(correlation(1.0, -1.0, sph), std::domain_error);

  // Matérn with smoothness 0.5 is the exponential; 1.5 has a closed form.
  const CorrelationFamily m05{CorrelationKind::matern, 0.5};
  const CorrelationFamily m15{CorrelationKind::matern, 1.5};
  for (double u : {0.0, 0.1, 0.7, 3.0}) {
    CHECK(std::abs(correlation(u, 0.6, m05) - std::exp(-u / 0.6)) < 1e-12);
    const double t = u / 0.6;
    CHECK(std::abs(correlation(u, 0.6, m15) - (1 + t) * std::exp(-t)) < 1e-12);
  }
  CHECK(CorrelationFamily::parse("spherical").kind == CorrelationKind::spherical);
  CHECK_THROWS_AS(CorrelationFamily::parse("gaussian"), std::domain_error);
}

TEST_CASE("correlation phi derivatives match finite differences") {
  for (const CorrelationFamily fam : {CorrelationFamily{CorrelationKind::exponential},
                                      CorrelationFamily{CorrelationKind::spherical},
                                      CorrelationFamily{CorrelationKind::matern, 1.5},
                                      CorrelationFamily{CorrelationKind::matern, 2.3}}) {
    for (double u : {0.05, 0.3, 0.9}) {
      const double phi = 0.7, h = 1e-6;
      const double fd = (fam(u, phi + h) - fam(u, phi - h)) / (2 * h);
      CHECK(std::abs(fam.d_phi(u, phi) - fd) < 1e-7 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST_CASE("distance matrix") {
  Eigen::MatrixX2d two(2, 2);
  two << 0, 0, 3, 4;
  const Eigen::MatrixXd d = distance_matrix(SpatialLocations(two));
  CHECK(d(0, 1) == 5.0);
  CHECK(d(1, 0) == 5.0);
  CHECK(d(0, 0) == 0.0);
  Eigen::MatrixX2d one(1, 2);
  one << 1, 2;
  const Eigen::MatrixXd d1 = distance_matrix(SpatialLocations(one));
  CHECK(d1.rows() == 1);
  CHECK(d1(0, 0) == 0.0);
  Eigen::MatrixX2d bad(1, 2);
  bad << 1, std::nan("");
  CHECK_THROWS_AS(SpatialLocations{bad}, std::domain_error);
}

TEST_CASE("covariance entries") {
  Eigen::MatrixX2d two(2, 2);
  two << 0, 0, 1, 0;
  const BlockCovariance s = build_sigma(SpatialLocations(two), config1(), {});
  const Eigen::MatrixXd& m = s.matrix();
  CHECK(std::abs(m(0, 0) - 1.09) < 1e-14);
  CHECK(std::abs(m(0, 2) - 1.581) < 1e-14);
  CHECK(std::abs(m(0, 1) - std::exp(-4.0)) < 1e-15);
  CHECK(std::abs(m(0, 1) - 0.0183156) < 1e-7);
  // Different sites, different components: spatial term only.
  CHECK(std::abs(m(0, 3) - 1.5 * std::exp(-4.0)) < 1e-15);
  CHECK((m - m.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("nugget is keyed on index identity, not distance") {
  Eigen::MatrixX2d dup(2, 2);
  dup << 0.5, 0.5, 0.5, 0.5;
  const BlockCovariance s = build_sigma(SpatialLocations(dup), config1(), {});
  CHECK(std::abs(s.matrix()(0, 1) - 1.0) < 1e-15);
  CHECK(std::abs(s.matrix()(0, 0) - 1.09) < 1e-15);
}

TEST_CASE("pure nugget model is diagonal per component") {
  CovarianceParams p = config1();
  p.sigma2.setZero();
  p.rho.setZero();
  const BlockCovariance s = build_sigma(random_sites(6, 4), p, {});
  const Eigen::MatrixXd off = s.matrix() - Eigen::MatrixXd(s.matrix().diagonal().asDiagonal());
  CHECK(off.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("non-PD covariance reports the pivot") {
  CovarianceParams p = config1();
  p.tau2.setZero();
  Eigen::MatrixX2d dup(2, 2);
  dup << 0, 0, 0, 0;
  try {
    build_sigma(SpatialLocations(dup), p, {});
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    REQUIRE(e.pivot().has_value());
    CHECK(*e.pivot() <= 3);
  }
}

TEST_CASE("parameter validation and packing") {
  CovarianceParams p = config1();
  CHECK_NOTHROW(p.validate());
  CHECK(p.size() == 6);
  const Eigen::VectorXd v = p.to_vector();
  CHECK(v[4] == 0.25);
  CHECK(v[5] == 0.9);
  const CovarianceParams q = CovarianceParams::from_vector(v, 2);
  CHECK((q.to_vector() - v).norm() == 0.0);
  p.rho[0] = 1.0;
  CHECK_THROWS_AS(p.validate(), std::domain_error);
  p = config1();
  p.phi = 0.0;
  CHECK_THROWS_AS(p.validate(), std::domain_error);
  p = config1();
  p.tau2[0] = -1e-3;
  CHECK_THROWS_AS(p.validate(), std::domain_error);

  // m = 3: C must be positive definite, not just |rho| < 1.
  CovarianceParams t;
  t.sigma2 = Eigen::Vector3d(1, 1, 1);
  t.tau2 = Eigen::Vector3d(1, 1, 1);
  t.phi = 1;
  t.rho = Eigen::Vector3d(0.9, -0.9, 0.9);
  CHECK_THROWS_AS(t.validate(), std::domain_error);

  CHECK(parameter_names(2) == std::vector<std::string>{"sigma2_1", "sigma2_2", "tau2_1", "tau2_2", "phi", "rho_12"});
  CHECK(parameter_names(3).back() == "rho_23");
  CHECK(rho_index(0, 1, 3) == 0);
  CHECK(rho_index(2, 0, 3) == 1);
  CHECK(rho_index(1, 2, 3) == 2);
  CHECK(parameter_index("phi", 2) == 4);
  CHECK_THROWS_AS(parameter_index("kappa", 2), std::domain_error);
}

TEST_CASE("site permutation permutes sigma") {
  const SpatialLocations locs = random_sites(5, 9);
  const std::vector<std::size_t> perm{3, 0, 4, 1, 2};
  const Eigen::MatrixXd a = build_sigma(locs, config1(), {}).matrix();
  const Eigen::MatrixXd b = build_sigma(locs.subset(perm), config1(), {}).matrix();
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t s = 0; s < 2; ++s)
      for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 5; ++j)
          CHECK(b(static_cast<Eigen::Index>(r * 5 + i), static_cast<Eigen::Index>(s * 5 + j)) ==
                a(static_cast<Eigen::Index>(r * 5 + perm[i]), static_cast<Eigen::Index>(s * 5 + perm[j])));
}

TEST_CASE("random valid parameters give positive definite sigma") {
  std::mt19937_64 gen(21);
  for (int k = 0; k < 50; ++k) {
    const std::size_t m = 1 + static_cast<std::size_t>(k % 3);
    const CovarianceParams p = random_params(gen, m);
    if (m > 2) {
      Eigen::LLT<Eigen::MatrixXd> llt(p.nugget_correlation());
      if (llt.info() != Eigen::Success) continue;
    }
    const CorrelationFamily fam{k % 2 ? CorrelationKind::spherical : CorrelationKind::exponential};
    CHECK_NOTHROW(build_sigma(random_sites(12, static_cast<std::uint64_t>(k)), p, fam));
  }
}

TEST_CASE("sigma derivatives: patterns") {
  const SpatialLocations locs = random_sites(4, 2);
  const CovarianceParams p = config1();
  const Eigen::MatrixXd dt = sigma_derivative(locs, p, {}, 2);
  for (Eigen::Index i = 0; i < 8; ++i)
    for (Eigen::Index j = 0; j < 8; ++j) {
      const bool same_site = i % 4 == j % 4;
      const bool c1 = i < 4, c2 = j < 4;
      double expected = 0.0;
      if (same_site && c1 && c2) expected = 1.0;
      if (same_site && c1 != c2) expected = 0.5 * (0.3 / 0.3) * 0.9;
      CHECK(std::abs(dt(i, j) - expected) < 1e-15);
    }
  const Eigen::MatrixXd dr = sigma_derivative(locs, p, {}, 5);
  for (Eigen::Index i = 0; i < 8; ++i)
    for (Eigen::Index j = 0; j < 8; ++j) {
      const bool cross_same = i % 4 == j % 4 && (i < 4) != (j < 4);
      CHECK(std::abs(dr(i, j) - (cross_same ? 0.09 : 0.0)) < 1e-15);
    }
  CHECK_THROWS_AS(sigma_derivative(locs, p, {}, 6), std::domain_error);
}

TEST_CASE("sigma derivatives match central differences") {
  std::mt19937_64 gen(3);
  const SpatialLocations locs = random_sites(6, 7);
  for (const CorrelationFamily fam : {CorrelationFamily{CorrelationKind::exponential},
                                      CorrelationFamily{CorrelationKind::spherical},
                                      CorrelationFamily{CorrelationKind::matern, 1.5}}) {
    for (std::size_t m : {2u, 3u}) {
      CovarianceParams p = random_params(gen, m);
      p.phi = 0.8;
      p.rho *= 0.5;
      const Eigen::VectorXd x = p.to_vector();
      for (std::size_t q = 0; q < p.size(); ++q) {
        const double h = 1e-6;
        Eigen::VectorXd xp = x, xm = x;
        xp[static_cast<Eigen::Index>(q)] += h;
        xm[static_cast<Eigen::Index>(q)] -= h;
        const Eigen::MatrixXd fd = (build_sigma(locs, CovarianceParams::from_vector(xp, m), fam).matrix() -
                                    build_sigma(locs, CovarianceParams::from_vector(xm, m), fam).matrix()) /
                                   (2 * h);
        const Eigen::MatrixXd an = sigma_derivative(locs, p, fam, q);
        CHECK((an - an.transpose()).cwiseAbs().maxCoeff() == 0.0);
        const double scale = std::max(1.0, an.cwiseAbs().maxCoeff());
        CHECK((an - fd).cwiseAbs().maxCoeff() / scale < 1e-6);
      }
    }
  }
}

TEST_CASE("cross covariance") {
  const SpatialLocations obs = random_sites(5, 13);
  CovarianceParams p = config1();

  SUBCASE("new equals obs without nugget reproduces sigma") {
    p.tau2.setZero();
    const CrossCovariance cc = cross_sigma(obs, obs, p, {});
    const Eigen::MatrixXd full = assemble_sigma(distance_matrix(obs), p, {});
    CHECK((cc.cross - full).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("coincident prediction site does not share the nugget") {
    const CrossCovariance cc = cross_sigma(obs, obs.subset({2}), p, {});
    CHECK(std::abs(cc.cross(0, 2) - 1.0) < 1e-15);
    CHECK(std::abs(cc.new_block(0, 0) - 1.09) < 1e-15);
    CHECK(std::abs(cc.new_block(0, 1) - 1.581) < 1e-15);
    const CrossCovariance signal = cross_sigma(obs, obs.subset({2}), p, {}, false);
    CHECK(std::abs(signal.new_block(0, 0) - 1.0) < 1e-15);
  }
  SUBCASE("joint assembly slice") {
    p.tau2.setZero();
    Eigen::MatrixX2d extra(2, 2);
    extra << 2.0, 2.0, -1.0, 0.5;
    const SpatialLocations fresh(extra);
    Eigen::MatrixX2d all(7, 2);
    all << obs.coords(), extra;
    const Eigen::MatrixXd joint = assemble_sigma(distance_matrix(SpatialLocations(all)), p, {});
    const CrossCovariance cc = cross_sigma(obs, fresh, p, {});
    for (Eigen::Index r = 0; r < 2; ++r)
      for (Eigen::Index s = 0; s < 2; ++s)
        for (Eigen::Index a = 0; a < 2; ++a) {
          for (Eigen::Index j = 0; j < 5; ++j)
            CHECK(std::abs(cc.cross(r * 2 + a, s * 5 + j) - joint(r * 7 + 5 + a, s * 7 + j)) < 1e-15);
          for (Eigen::Index b = 0; b < 2; ++b)
            CHECK(std::abs(cc.new_block(r * 2 + a, s * 2 + b) - joint(r * 7 + 5 + a, s * 7 + 5 + b)) < 1e-15);
        }
  }
  SUBCASE("distant site") {
    Eigen::MatrixX2d far(1, 2);
    far << 0.5, 0.5 + 0.6;
    const CrossCovariance cc = cross_sigma(obs.subset({0}), SpatialLocations(far), p, {});
    const double u = (far.row(0) - obs.coords().row(0)).norm();
    CHECK(std::abs(cc.cross(0, 0) - std::exp(-u / 0.25)) < 1e-15);
    CHECK(std::abs(cc.cross(1, 1) - 2.25 * std::exp(-u / 0.25)) < 1e-15);
  }
}
