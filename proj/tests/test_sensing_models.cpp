#include <random>

#include "doctest.h"
#include "nvspade/sensing_models.hpp"

using namespace nvspade;

TEST_CASE("ODMR response") {
  OdmrModel m;
  CHECK(odmr_intensity(1e15, 1e8, m) == doctest::Approx(1.0));
  CHECK(odmr_intensity(-1e15, 1e8, m) == doctest::Approx(1.0));
  // far-separated lines
  CHECK(odmr_intensity(m.omega0 + 1e12, 1e12, m) == doctest::Approx(0.75).epsilon(1e-6));
  CHECK(odmr_intensity(m.omega0, 0.0, m) == doctest::Approx(1.0 - m.chi));

  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> w(-1e8, 1e8), o(0.0, 5e7);
  for (int t = 0; t < 200; ++t) {
    const double d = w(gen), ok = o(gen);
    const double i = odmr_intensity(m.omega0 + d, ok, m);
    CHECK(i > 1.0 - m.chi);
    CHECK(i <= 1.0);
    CHECK(i == doctest::Approx(odmr_intensity(m.omega0 - d, ok, m)).epsilon(1e-12));
    CHECK(i == doctest::Approx(odmr_intensity_dimensionless(d / m.linewidth, ok / m.linewidth, m.chi)).epsilon(1e-12));
  }
  m.chi = 1.5;
  CHECK_THROWS_AS(m.validate(), InvalidArgument);
}

TEST_CASE("Zeeman splitting") {
  OdmrModel m;
  m.strain = 3e6;
  CHECK(zeeman_from_field(0.0, m) == doctest::Approx(3e6));
  m.strain = 0.0;
  CHECK(zeeman_from_field(2e-3, m) == doctest::Approx(2.0 * zeeman_from_field(1e-3, m)));
  m.strain = 1e6;
  for (double b : {1e-5, 1e-3, 0.1}) CHECK(field_from_zeeman(zeeman_from_field(b, m), m) == doctest::Approx(b).epsilon(1e-10));
  CHECK_THROWS_AS(field_from_zeeman(0.5e6, m), InvalidArgument);
}

TEST_CASE("Rabi response") {
  const double o0 = 2.0, ok = 3.0;
  CHECK(rabi_intensity(0.0, ok, o0) == doctest::Approx((o0 / ok) * (o0 / ok)));
  CHECK(rabi_intensity(M_PI / ok, ok, o0) == doctest::Approx(0.0).scale(1.0));
  for (double t : {0.1, 0.7, 2.0}) {
    CHECK(rabi_intensity(t, o0, o0) == doctest::Approx(std::pow(std::cos(o0 * t / 2), 2)));
    CHECK(rabi_intensity(t + 2 * M_PI / ok, ok, o0) == doctest::Approx(rabi_intensity(t, ok, o0)).epsilon(1e-10));
    CHECK(rabi_intensity(t, ok, o0) == doctest::Approx(rabi_intensity_dimensionless(o0 * t / 2, ok / o0)).epsilon(1e-12));
  }
  // envelope shrinks with detuning
  double prev = 2.0;
  for (double det : {0.0, 0.5, 1.0, 2.0}) {
    const double env = rabi_intensity(0.0, std::hypot(o0, det), o0);
    CHECK(env <= prev);
    prev = env;
  }
  CHECK_THROWS_AS(rabi_intensity(0.1, 1.0, 2.0), InvalidArgument);
}

TEST_CASE("brightness from intensities") {
  CHECK((brightness_from_intensities(Vec::Constant(3, 2.0)).array() - 1.0 / 3.0).abs().maxCoeff() < 1e-15);
  Vec i(2);
  i << 1.0, 3.0;
  CHECK(brightness_from_intensities(i)(1) == doctest::Approx(0.75));
  OdmrModel m;
  Vec odmr(3);
  const double omega = m.omega0 + 1.5e7;
  const double fields[] = {1e7, 2e7, 3e7};
  for (int k = 0; k < 3; ++k) odmr(k) = odmr_intensity(omega, fields[k], m);
  const Vec b = brightness_from_intensities(odmr);
  CHECK(b(0) / b(2) == doctest::Approx(odmr(0) / odmr(2)));
  i(0) = 0.0;
  CHECK_THROWS_AS(brightness_from_intensities(i), InvalidArgument);
}

TEST_CASE("field fits recover noiseless traces") {
  const Vec gammas = Vec::LinSpaced(41, -5.0, 5.0);
  const Vec phi = (Vec(4) << 1.2, 1.9, 2.4, 2.95).finished();
  Mat odmr(41, 4);
  for (int g = 0; g < 41; ++g)
    for (int k = 0; k < 4; ++k) odmr(g, k) = 1e4 * (k + 1) * odmr_intensity_dimensionless(gammas(g), phi(k), 0.5);
  FieldFitOptions o;
  o.phi_max = 5.0;
  const auto fits = fit_field(gammas, odmr, o);
  for (int k = 0; k < 4; ++k) {
    CHECK(fits[k].phi == doctest::Approx(phi(k)).epsilon(1e-6));
    CHECK(fits[k].converged);
  }
  CHECK(field_rmse(phi, fits) < 1e-6);
  // scale equivariance
  const auto scaled = fit_field(gammas, 7.5 * odmr, o);
  for (int k = 0; k < 4; ++k) CHECK(scaled[k].phi == doctest::Approx(fits[k].phi).epsilon(1e-9));

  const Vec rg = Vec::LinSpaced(41, 0.0, 2.0 * M_PI);
  const Vec rphi = (Vec(3) << 1.15, 1.5, 1.85).finished();
  Mat rabi(41, 3);
  for (int g = 0; g < 41; ++g)
    for (int k = 0; k < 3; ++k) rabi(g, k) = 5e3 * rabi_intensity_dimensionless(rg(g), rphi(k));
  FieldFitOptions r;
  r.kind = FieldModel::Rabi;
  r.phi_min = 1.0;
  r.phi_max = 4.0;
  const auto rf = fit_field(rg, rabi, r);
  for (int k = 0; k < 3; ++k) CHECK(rf[k].phi == doctest::Approx(rphi(k)).epsilon(1e-6));

  BrightnessTrace trace{gammas, odmr.array().colwise() / odmr.rowwise().sum().array(), odmr.rowwise().sum()};
  CHECK((trace.intensities() - odmr).cwiseAbs().maxCoeff() < 1e-8);
  CHECK_THROWS_AS(fit_field(gammas.head(4), odmr.topRows(4), o), InvalidArgument);
}
