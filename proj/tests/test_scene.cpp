#include <random>

#include "doctest.h"
#include "nvspade/scene.hpp"
#include "oracles.hpp"

using namespace nvspade;

namespace {

Positions random_positions(int k, std::mt19937_64& rng, double spread = 1.0) {
  std::uniform_real_distribution<double> u(-spread, spread);
  Positions r(k, 2);
  for (int i = 0; i < k; ++i) r.row(i) << u(rng), u(rng);
  return r;
}

Vec random_simplex(int k, std::mt19937_64& rng) {
  std::exponential_distribution<double> e(1.0);
  Vec b(k);
  for (int i = 0; i < k; ++i) b(i) = e(rng) + 1e-3;
  return b / b.sum();
}

}  // namespace

TEST_CASE("gram matrix of a single emitter is one") {
  Positions r(1, 2);
  r << 0.3, -0.2;
  CHECK(gram_matrix(r).entries(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("coincident emitters are rejected") {
  Positions r(2, 2);
  r << 0.1, 0.1, 0.1, 0.1;
  CHECK_THROWS_AS(gram_matrix(r), DegenerateGeometryError);
}

TEST_CASE("overlaps agree with quadrature of shifted PSFs") {
  const oracle::QuadGrid g(0.5, 0.0, 8.0, 1.0 / 32.0);
  const double unit = oracle::inner(g, oracle::gauss_field(g, 0, 0), oracle::gauss_field(g, 1, 0));
  Positions r(2, 2);
  r << 0.0, 0.0, 1.0, 0.0;
  CHECK(gram_matrix(r).entries(0, 1) == doctest::Approx(unit).epsilon(1e-9));
  CHECK(gram_matrix(r).entries(0, 1) == doctest::Approx(0.88250).epsilon(1e-5));

  Positions a(1, 2), b(1, 2);
  a << 0.0, 0.0;
  b << 1.2, 1.6;  // distance 2
  const double two = oracle::inner(g, oracle::gauss_field(g, 0, 0), oracle::gauss_field(g, 1.2, 1.6));
  CHECK(cross_gram(a, b)(0, 0) == doctest::Approx(two).epsilon(1e-9));
  CHECK(cross_gram(a, b)(0, 0) == doctest::Approx(0.60653).epsilon(1e-5));
}

TEST_CASE("cross gram limits") {
  std::mt19937_64 rng(4);
  const Positions r = random_positions(4, rng);
  CHECK((cross_gram(r, r) - gram_matrix(r).entries).norm() < 1e-15);
  Positions far = r;
  far.col(0).array() += 100.0;
  CHECK(cross_gram(r, far).maxCoeff() < 1e-100);
  CHECK_THROWS_AS(cross_gram(r, r, 0.0), InvalidArgument);
}

TEST_CASE("physical units are divided out") {
  Positions p(2, 2);
  p << 0.0, 0.0, 300e-9, 0.0;
  const auto e = EmitterEnsemble::from_physical(p, Vec::Constant(2, 0.5), 150e-9);
  CHECK(e.positions()(1, 0) == doctest::Approx(2.0));
  CHECK(e.physical_positions()(1, 0) == doctest::Approx(300e-9));
  CHECK_THROWS_AS(EmitterEnsemble(p, Vec::Constant(2, 0.7)), InvalidArgument);
  CHECK_THROWS_AS(EmitterEnsemble(p, Vec::Constant(3, 1.0 / 3.0)), InvalidArgument);
}

TEST_CASE("eigenbasis of orthogonal states") {
  GramMatrix g{Mat::Identity(3, 3)};
  const auto rep = eigenbasis_representation(g, Vec::Constant(3, 1.0 / 3.0));
  CHECK((rep.eigenvalues.array() - 1.0 / 3.0).abs().maxCoeff() < 1e-14);
  CHECK((rep.psi.adjoint() * rep.psi - CMat::Identity(3, 3)).norm() < 1e-12);
}

TEST_CASE("balanced pair eigenvalues") {
  for (double s : {0.05, 0.3, 1.0, 2.0}) {
    Positions r(2, 2);
    r << -s, 0.0, s, 0.0;
    const double phi = std::exp(-0.5 * s * s);
    const auto rep = eigenbasis_representation(gram_matrix(r), Vec::Constant(2, 0.5));
    CHECK(rep.eigenvalues(0) == doctest::Approx((1 + phi) / 2).epsilon(1e-12));
    CHECK(rep.eigenvalues(1) == doctest::Approx((1 - phi) / 2).epsilon(1e-12));
  }
}

TEST_CASE("eigenbasis identities on random instances") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> kd(1, 8);
  int checked = 0;
  for (int t = 0; t < 1000; ++t) {
    const int k = kd(rng);
    const Positions r = random_positions(k, rng, 1.5);
    if (k >= 2 && min_pairwise_separation(r) < 0.3) continue;
    const Vec b = random_simplex(k, rng);
    const GramMatrix g = gram_matrix(r);
    // symmetric positive definite
    CHECK(g.entries.llt().info() == Eigen::Success);
    const auto rep = eigenbasis_representation(g, b);
    const CMat gram = rep.psi.adjoint() * rep.psi;
    CHECK((gram - g.entries.cast<std::complex<double>>()).cwiseAbs().maxCoeff() < 1e-10);
    const CMat rho = rep.psi * b.cast<std::complex<double>>().asDiagonal() * rep.psi.adjoint();
    CHECK((rho - CMat(rep.eigenvalues.cast<std::complex<double>>().asDiagonal())).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(std::abs(rep.eigenvalues.sum() - 1.0) < 1e-12);
    ++checked;
  }
  CHECK(checked > 300);
}

TEST_CASE("minimum separation") {
  Positions r(2, 2);
  r << 0.0, 0.0, 0.1, 0.0;
  CHECK(min_pairwise_separation(r) == doctest::Approx(0.1));
  Positions tri(3, 2);
  tri << 0.0, 0.0, 0.7, 0.0, 0.35, 0.7 * std::sqrt(3.0) / 2.0;
  CHECK(min_pairwise_separation(tri) == doctest::Approx(0.7));

  std::mt19937_64 rng(5);
  const Positions p = random_positions(5, rng);
  double brute = INFINITY;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j)
      if (i != j) brute = std::min(brute, (p.row(i) - p.row(j)).norm());
  CHECK(min_pairwise_separation(p) == brute);
}
