#include <random>

#include "doctest.h"
#include "nvspade/estimation.hpp"
#include "nvspade/protocol.hpp"
#include "oracles.hpp"

using namespace nvspade;

namespace {

Positions pair(double s) {
  Positions r(2, 2);
  r << -s, 0.0, s, 0.0;
  return r;
}

Vec counts_as_vec(const Counts& c) { return c.cast<double>(); }

}  // namespace

TEST_CASE("centroid") {
  Positions x(2, 2);
  x << -1.0, 0.0, 1.0, 0.0;
  CHECK(estimate_centroid(x).norm() < 1e-15);
  Positions one(1, 2);
  one << 0.3, -0.7;
  CHECK((estimate_centroid(one) - Point(0.3, -0.7)).norm() < 1e-15);
  CHECK_THROWS_AS(estimate_centroid(Positions(0, 2)), InvalidArgument);

  Rng rng(2);
  const Positions d = sample_direct_imaging(EmitterEnsemble::uniform(pair(0.25)), 100'000, rng);
  CHECK(estimate_centroid(d).norm() < 5.0 / std::sqrt(1e5));
}

TEST_CASE("detector binning") {
  Rng rng(4);
  const Positions d = sample_direct_imaging(EmitterEnsemble::uniform(pair(0.3)), 5000, rng);
  const DetectorImage img = bin_detector(d);
  CHECK(img.photons() == 5000.0);
  CHECK(img.col.size() == img.row.size());
  for (size_t i = 0; i < img.col.size(); ++i) {
    CHECK(img.col[i] >= 0);
    CHECK(img.col[i] < img.cols);
  }
  CHECK(bin_detector(Positions(0, 2)).empty());
  CHECK_THROWS_AS(bin_detector(d, 0.0), InvalidArgument);
}

TEST_CASE("calibration likelihood gradient") {
  Rng rng(5);
  Positions r(3, 2);
  r << 0.1, 0.0, -0.15, 0.2, 0.05, -0.2;
  const Positions d = sample_direct_imaging(EmitterEnsemble::uniform(r), 3000, rng);
  PadSpadeConfig pad;
  pad.origin = estimate_centroid(d);
  const Vec counts = counts_as_vec(sample_multinomial(pad_probabilities(r, Vec::Constant(3, 1.0 / 3), pad), 2000, rng));
  Positions at = r;
  at(0, 0) += 0.03;
  Vec g;
  calibration_log_likelihood(at, d, counts, pad, &g);
  const double h = 1e-6;
  for (int c = 0; c < 6; ++c) {
    Positions p = at, m = at;
    p(c / 2, c % 2) += h;
    m(c / 2, c % 2) -= h;
    const double fd = (calibration_log_likelihood(p, d, counts, pad) - calibration_log_likelihood(m, d, counts, pad)) / (2 * h);
    CHECK(g(c) == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("single emitter position is the centroid") {
  Rng rng(6);
  Positions r(1, 2);
  r << 0.2, -0.1;
  const Positions d = sample_direct_imaging(EmitterEnsemble::uniform(r), 200'000, rng);
  PadSpadeConfig pad;
  pad.origin = estimate_centroid(d);
  const Vec counts = counts_as_vec(sample_multinomial(pad_probabilities(r, Vec::Ones(1), pad), 100'000, rng));
  const auto est = estimate_positions_mle(d, counts, 1, pad);
  CHECK((est.positions.row(0).transpose() - est.centroid).norm() < 0.01);
}

TEST_CASE("position MLE improves on its starts and the truth") {
  Rng rng(7);
  const Positions r = generate_random_scene(3, 0.15, 3);
  const Positions d = sample_direct_imaging(EmitterEnsemble::uniform(r), 20'000, rng);
  PadSpadeConfig pad;
  pad.origin = estimate_centroid(d);
  const Vec counts = counts_as_vec(sample_multinomial(pad_probabilities(r, Vec::Constant(3, 1.0 / 3), pad), 20'000, rng));
  const auto est = estimate_positions_mle(d, counts, 3, pad);
  CHECK(est.log_likelihood >= calibration_log_likelihood(r, d, counts, pad) - 1e-6);
  CHECK(est.log_likelihood == doctest::Approx(calibration_log_likelihood(est.positions, d, counts, pad)));
  // random starts drawn in the disk around the centroid
  Rng srng(99);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  for (int t = 0; t < 5; ++t) {
    Positions s(3, 2);
    for (int i = 0; i < 3; ++i) s.row(i) << pad.origin.x() + u(srng), pad.origin.y() + u(srng);
    CHECK(est.log_likelihood >= calibration_log_likelihood(s, d, counts, pad) - 1e-6);
  }
}

TEST_CASE("noiseless calibration recovers the scene") {
  Positions r(2, 2);
  r << -0.2, 0.05, 0.15, -0.1;
  Rng rng(8);
  const Positions d = sample_direct_imaging(EmitterEnsemble::uniform(r), 200'000, rng);
  PadSpadeConfig pad;
  pad.origin = Point::Zero();
  // expected counts stand in for the infinite-photon limit
  const Vec counts = 1e8 * pad_probabilities(r, Vec::Constant(2, 0.5), pad);
  const auto est = estimate_positions_mle(d, counts, 2, pad);
  const auto perm = align_permutation(r, est.positions);
  CHECK(localization_error(r, apply_permutation(est.positions, perm)) < 0.02);
}

TEST_CASE("brightness pre-estimate limits") {
  Rng rng(9);
  Positions r(3, 2);
  r << 0.0, 0.0, 8.0, 0.0, 0.0, 8.0;
  Positions one(1, 2);
  one << 8.0, 0.0;
  const Positions d = sample_direct_imaging(EmitterEnsemble::uniform(one), 5000, rng);
  const auto est = brightness_pre_estimate(d, r);
  CHECK(est.pre_estimate(1) > 0.999);
  CHECK(std::abs(est.pre_estimate.sum() - 1.0) < 1e-12);
  CHECK(est.pre_estimate.minCoeff() >= 0.0);

  // data mirrored about x = 0, emitters mirrored too
  Positions half = sample_direct_imaging(EmitterEnsemble::uniform(pair(0.3)), 4000, rng);
  Positions sym(8000, 2);
  sym.topRows(4000) = half;
  sym.bottomRows(4000) = half;
  sym.bottomRows(4000).col(0) *= -1.0;
  // keep pixel edges symmetric about 0
  const auto s = brightness_pre_estimate(sym, pair(0.3));
  CHECK(s.pre_estimate(0) == doctest::Approx(0.5).epsilon(1e-6));

  const auto empty = brightness_pre_estimate(Positions(0, 2), pair(0.3));
  CHECK(empty.no_di_photons);
  CHECK(empty.pre_estimate(0) == doctest::Approx(0.5));
}

TEST_CASE("brightness pre-estimate is unbiased") {
  const double s = 0.25, kappa = 0.2;
  Vec b(2);
  b << 0.5 - kappa, 0.5 + kappa;
  const EmitterEnsemble e(pair(s), b);
  std::vector<double> v;
  for (int t = 0; t < 200; ++t) {
    Rng rng = make_rng(1234, {static_cast<std::uint64_t>(t)});
    v.push_back(brightness_pre_estimate(sample_direct_imaging(e, 100'000, rng), pair(s)).pre_estimate(1));
  }
  double mean = 0.0, var = 0.0;
  for (double x : v) mean += x / v.size();
  for (double x : v) var += (x - mean) * (x - mean) / (v.size() - 1.0);
  CHECK(std::abs(mean - b(1)) < 3.0 * std::sqrt(var / v.size()));
}

TEST_CASE("joint brightness MLE on exact counts") {
  Positions r(3, 2);
  r << -0.2, 0.0, 0.15, 0.1, 0.0, -0.2;
  Vec b(3);
  b << 0.2, 0.5, 0.3;
  const auto m = build_ykl_measurement(r, Vec::Constant(3, 1.0 / 3.0));
  const Vec q = ykl_outcome_probabilities(m, EmitterEnsemble(r, b));
  const auto est = estimate_brightness_mle(Positions(0, 2), 1e9 * q, r, m);
  CHECK((est.brightnesses - b).cwiseAbs().maxCoeff() < 1e-5);
  CHECK(std::abs(est.brightnesses.sum() - 1.0) < 1e-12);

  const auto m2 = build_ykl_measurement(pair(0.2), Vec::Constant(2, 0.5));
  const Vec q2 = ykl_outcome_probabilities(m2, EmitterEnsemble::uniform(pair(0.2)));
  const auto e2 = estimate_brightness_mle(Positions(0, 2), 1e9 * q2, pair(0.2), m2);
  CHECK(e2.brightnesses(0) == doctest::Approx(0.5).epsilon(1e-6));

  Vec bucket = Vec::Zero(3);
  bucket(2) = 10.0;
  CHECK(estimate_brightness_mle(Positions(0, 2), bucket, pair(0.2), m2).bucket_only);
  CHECK_THROWS_AS(estimate_brightness_mle(Positions(0, 2), Vec::Ones(2), pair(0.2), m2), InvalidArgument);
}

TEST_CASE("permutation alignment") {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> n(0.0, 1.0);
  Positions r(6, 2);
  for (int i = 0; i < 6; ++i) r.row(i) << n(gen), n(gen);
  std::vector<int> id{0, 1, 2, 3, 4, 5};
  CHECK(align_permutation(r, r) == id);
  Positions sw = r;
  sw.row(1).swap(sw.row(4));
  CHECK(align_permutation(r, sw) == std::vector<int>{0, 4, 2, 3, 1, 5});
  for (int t = 0; t < 20; ++t) {
    Positions e(6, 2);
    for (int i = 0; i < 6; ++i) e.row(i) << n(gen), n(gen);
    const auto p = align_permutation(r, e);
    const auto q = oracle::best_permutation(r, e);
    double cp = 0.0, cq = 0.0;
    for (int i = 0; i < 6; ++i) {
      cp += (r.row(i) - e.row(p[i])).norm();
      cq += (r.row(i) - e.row(q[i])).norm();
    }
    CHECK(cp == doctest::Approx(cq).epsilon(1e-12));
  }
  // Hungarian path
  Positions big(10, 2), shuffled(10, 2);
  for (int i = 0; i < 10; ++i) big.row(i) << i * 1.0, 0.5 * i;
  const std::vector<int> perm{3, 7, 1, 0, 9, 2, 8, 4, 6, 5};
  for (int i = 0; i < 10; ++i) shuffled.row(perm[i]) = big.row(i);
  CHECK(align_permutation(big, shuffled) == perm);
}

TEST_CASE("localization error") {
  const double d = 0.2;
  const Positions r = pair(d / 2);
  Positions e(2, 2);
  e << -d / 2 + d / 4, 0.0, d / 2 - d / 4, 0.0;
  CHECK(localization_error(r, r) == 0.0);
  CHECK(localization_error(r, e) == doctest::Approx(0.25));

  std::mt19937_64 gen(8);
  std::normal_distribution<double> n(0.0, 0.3);
  Positions a(4, 2), b(4, 2);
  for (int i = 0; i < 4; ++i) {
    a.row(i) << n(gen), n(gen);
    b.row(i) = a.row(i) + Eigen::RowVector2d(n(gen), n(gen)) * 0.1;
  }
  double dmin = INFINITY, sum = 0.0;
  for (int i = 0; i < 4; ++i) {
    sum += (a.row(i) - b.row(i)).norm();
    for (int j = i + 1; j < 4; ++j) dmin = std::min(dmin, (a.row(i) - a.row(j)).norm());
  }
  CHECK(localization_error(a, b) == doctest::Approx(sum / 4.0 / dmin).epsilon(1e-12));

  const double th = 0.7;
  Eigen::Matrix2d rot;
  rot << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
  const Eigen::RowVector2d shift(3.0, -1.0);
  const Positions a2 = (a * rot.transpose()).rowwise() + shift;
  const Positions b2 = (b * rot.transpose()).rowwise() + shift;
  CHECK(localization_error(a2, b2) == doctest::Approx(localization_error(a, b)).epsilon(1e-12));
}

TEST_CASE("brightness error") {
  Vec b(2), c(2);
  b << 0.9, 0.1;
  c << 0.1, 0.9;
  CHECK(brightness_error(b, b) == 0.0);
  CHECK(brightness_error(b, c) == doctest::Approx(0.8));
  Vec x(4), y(4), z(4);
  x << 0.5, 0.5, 0, 0;
  y << 0, 0, 0.5, 0.5;
  CHECK(brightness_error(x, y) == doctest::Approx(1.0));
  std::mt19937_64 gen(2);
  std::exponential_distribution<double> ex(1.0);
  for (int t = 0; t < 100; ++t) {
    for (int i = 0; i < 4; ++i) {
      x(i) = ex(gen);
      y(i) = ex(gen);
      z(i) = ex(gen);
    }
    x /= x.sum();
    y /= y.sum();
    z /= z.sum();
    CHECK(brightness_error(x, z) <= brightness_error(x, y) + brightness_error(y, z) + 1e-15);
    CHECK(brightness_error(x, y) <= 1.0);
    CHECK(brightness_error(x, y) == doctest::Approx(brightness_error(y, x)));
  }
}

TEST_CASE("error correlation") {
  const std::vector<double> r{0.1, 0.2, 0.4, 0.5};
  const std::vector<double> b{0.2, 0.4, 0.8, 1.0};
  const auto c = error_correlation(r, b);
  CHECK(c.pearson == doctest::Approx(1.0));
  CHECK(c.slope == doctest::Approx(2.0));
  CHECK_THROWS_AS(error_correlation(r, {0.3, 0.3, 0.3, 0.3}), InvalidArgument);
}
