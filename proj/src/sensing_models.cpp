#include "nvspade/sensing_models.hpp"

#include <cmath>
#include <future>
#include <limits>

#include "optimize.hpp"

namespace nvspade {

namespace {

double lorentz(double u) { return 1.0 / (1.0 + u * u); }

double lorentz_prime(double u) {
  const double d = 1.0 + u * u;
  return -2.0 * u / (d * d);
}

double model_derivative(FieldModel kind, double g, double phi, double chi) {
  if (kind == FieldModel::Odmr) return -0.5 * chi * (-lorentz_prime(g - phi) + lorentz_prime(g + phi));
  const double c = std::cos(phi * g);
  return -g * std::sin(2.0 * phi * g) / (phi * phi) - 2.0 * c * c / (phi * phi * phi);
}

EmitterFit fit_one(const Vec& gammas, const Vec& y_raw, const FieldFitOptions& opt, double init) {
  EmitterFit out;
  const double ymax = y_raw.cwiseAbs().maxCoeff();
  if (!(ymax > 0.0)) {
    out.rank_deficient = true;
    return out;
  }
  const Vec y = y_raw / ymax;
  const auto n = gammas.size();

  auto profile = [&](double phi, double& c) {
    Vec f(n);
    for (Eigen::Index g = 0; g < n; ++g) f(g) = model_intensity(opt.kind, gammas(g), phi, opt.chi);
    const double ff = f.squaredNorm();
    c = ff > 0.0 ? f.dot(y) / ff : 0.0;
    return (c * f - y).squaredNorm();
  };

  std::vector<double> starts;
  for (int i = 0; i < opt.grid_points; ++i)
    starts.push_back(opt.phi_min + (opt.phi_max - opt.phi_min) * i / std::max(1, opt.grid_points - 1));
  if (std::isfinite(init)) starts.push_back(init);
  double best_phi = starts.front(), best_c = 0.0, best_r = std::numeric_limits<double>::infinity();
  for (double phi : starts) {
    if (opt.kind == FieldModel::Rabi && phi < 1.0) continue;
    double c = 0.0;
    const double r = profile(phi, c);
    if (r < best_r) {
      best_r = r;
      best_phi = phi;
      best_c = c;
    }
  }

  auto residuals = [&](const Vec& p) {
    Vec r(n);
    for (Eigen::Index g = 0; g < n; ++g) r(g) = p(1) * model_intensity(opt.kind, gammas(g), p(0), opt.chi) - y(g);
    return r;
  };
  auto jacobian = [&](const Vec& p) {
    Mat j(n, 2);
    for (Eigen::Index g = 0; g < n; ++g) {
      j(g, 0) = p(1) * model_derivative(opt.kind, gammas(g), p(0), opt.chi);
      j(g, 1) = model_intensity(opt.kind, gammas(g), p(0), opt.chi);
    }
    return j;
  };
  const Vec x0 = Eigen::Vector2d(best_phi, best_c);
  const auto ls = detail::least_squares(residuals, jacobian, x0, static_cast<int>(n));
  out.phi = ls.x(0);
  out.scale = ls.x(1) * ymax;
  out.residual_norm = ls.residual_norm * ymax;
  out.converged = ls.converged;
  out.rank_deficient = ls.rank_deficient;
  out.phi = std::abs(out.phi);  // both profiles are even in phi
  return out;
}

}  // namespace

void OdmrModel::validate() const {
  if (!(chi > 0.0 && chi < 1.0)) throw InvalidArgument("chi must lie in (0, 1)");
  if (!(linewidth > 0.0)) throw InvalidArgument("linewidth must be positive");
}

double odmr_intensity_dimensionless(double gamma, double phi, double chi) {
  return 1.0 - 0.5 * chi * (lorentz(gamma + phi) + lorentz(gamma - phi));
}

double odmr_intensity(double omega, double omega_k, const OdmrModel& m) {
  m.validate();
  return odmr_intensity_dimensionless((omega - m.omega0) / m.linewidth, omega_k / m.linewidth, m.chi);
}

double zeeman_from_field(double field, const OdmrModel& m) {
  const double z = m.g_factor * m.bohr_magneton * field / m.hbar;
  return std::hypot(z, m.strain);
}

double field_from_zeeman(double omega_k, const OdmrModel& m) {
  const double d = omega_k * omega_k - m.strain * m.strain;
  if (d < 0.0) throw InvalidArgument("Zeeman frequency below the strain splitting");
  return std::sqrt(d) * m.hbar / (m.g_factor * m.bohr_magneton);
}

double rabi_intensity(double t, double omega_k, double omega0) {
  if (!(omega0 > 0.0)) throw InvalidArgument("resonant Rabi frequency must be positive");
  if (omega_k < omega0) throw InvalidArgument("Rabi frequency below the resonant value");
  const double c = std::cos(0.5 * omega_k * t);
  const double a = omega0 / omega_k;
  return a * a * c * c;
}

double rabi_intensity_dimensionless(double gamma, double phi) {
  const double c = std::cos(phi * gamma);
  return c * c / (phi * phi);
}

double model_intensity(FieldModel kind, double gamma, double phi, double chi) {
  return kind == FieldModel::Odmr ? odmr_intensity_dimensionless(gamma, phi, chi)
                                  : rabi_intensity_dimensionless(gamma, phi);
}

Vec brightness_from_intensities(const Vec& intensities) {
  if (intensities.size() == 0) throw InvalidArgument("empty intensity vector");
  if ((intensities.array() <= 0.0).any() || !intensities.allFinite())
    throw InvalidArgument("intensities must be positive");
  return intensities / intensities.sum();
}

Mat BrightnessTrace::intensities() const { return budgets.asDiagonal() * brightnesses; }

std::vector<EmitterFit> fit_field(const Vec& gammas, const Mat& intensities, const FieldFitOptions& opt,
                                  const Vec& init) {
  if (intensities.rows() != gammas.size()) throw InvalidArgument("one intensity row per modulation point");
  if (gammas.size() < 6) throw InvalidArgument("trace too short to identify two parameters per emitter");
  if (init.size() != 0 && init.size() != intensities.cols()) throw InvalidArgument("one initial phi per emitter");
  if (opt.kind == FieldModel::Odmr && !(opt.chi > 0.0 && opt.chi < 1.0)) throw InvalidArgument("chi must lie in (0, 1)");
  if (opt.grid_points < 2 || !(opt.phi_max > opt.phi_min)) throw InvalidArgument("bad phi grid");

  std::vector<std::future<EmitterFit>> jobs;
  for (Eigen::Index k = 0; k < intensities.cols(); ++k) {
    const double start = init.size() ? init(k) : std::numeric_limits<double>::quiet_NaN();
    jobs.push_back(std::async(std::launch::async, fit_one, std::cref(gammas), Vec(intensities.col(k)),
                              std::cref(opt), start));
  }
  std::vector<EmitterFit> out;
  for (auto& j : jobs) out.push_back(j.get());
  return out;
}

std::vector<EmitterFit> fit_field(const BrightnessTrace& trace, const FieldFitOptions& options, const Vec& init) {
  return fit_field(trace.gammas, trace.intensities(), options, init);
}

double field_rmse(const Vec& phi_true, const std::vector<EmitterFit>& fits) {
  if (static_cast<size_t>(phi_true.size()) != fits.size()) throw InvalidArgument("fit count mismatch");
  double s = 0.0;
  for (size_t k = 0; k < fits.size(); ++k) {
    const double d = fits[k].phi - phi_true(static_cast<Eigen::Index>(k));
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(fits.size()));
}

}  // namespace nvspade
