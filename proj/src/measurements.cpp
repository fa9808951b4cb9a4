#include "nvspade/measurements.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <gsl/gsl_sf_gamma.h>

namespace nvspade {

std::vector<std::array<int, 2>> pad_mode_indices(int max_total_order) {
  if (max_total_order < 0) throw InvalidArgument("max_total_order must be nonnegative");
  std::vector<std::array<int, 2>> out;
  for (int q = 0; q <= max_total_order; ++q)
    for (int m = 0; m <= q; ++m) out.push_back({q - m, m});
  return out;
}

Positions sample_direct_imaging(const EmitterEnsemble& ensemble, std::int64_t n_photons, Rng& rng) {
  if (n_photons < 0) throw InvalidArgument("photon count must be nonnegative");
  Positions out(n_photons, 2);
  std::discrete_distribution<int> pick(ensemble.brightnesses().data(),
                                       ensemble.brightnesses().data() + ensemble.size());
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::int64_t i = 0; i < n_photons; ++i) {
    const int k = pick(rng);
    out(i, 0) = ensemble.positions()(k, 0) + normal(rng);
    out(i, 1) = ensemble.positions()(k, 1) + normal(rng);
  }
  return out;
}

namespace {

// e^{-mu} mu^n / n! for n = 0..q
void poisson_row(double mu, int q, double* out) {
  out[0] = std::exp(-mu);
  for (int n = 1; n <= q; ++n) out[n] = out[n - 1] * mu / n;
}

}  // namespace

Vec pad_probabilities(const Positions& positions, const Vec& b, const PadSpadeConfig& config, Mat* jacobian) {
  const int k = static_cast<int>(positions.rows());
  if (b.size() != k) throw InvalidArgument("brightness vector length must match positions");
  const int qmax = config.max_total_order;
  const auto modes = pad_mode_indices(qmax);
  const int nq = static_cast<int>(modes.size());

  Vec p = Vec::Zero(nq + 1);
  if (jacobian) jacobian->setZero(nq + 1, 2 * k);
  std::vector<double> px(qmax + 1), py(qmax + 1);

  for (int e = 0; e < k; ++e) {
    const double dx = positions(e, 0) - config.origin.x();
    const double dy = positions(e, 1) - config.origin.y();
    const double mux = 0.25 * dx * dx;
    const double muy = 0.25 * dy * dy;
    poisson_row(mux, qmax, px.data());
    poisson_row(muy, qmax, py.data());
    const double mu = mux + muy;
    const double bucket = mu > 0.0 ? gsl_sf_gamma_inc_P(qmax + 1.0, mu) : 0.0;

    for (int i = 0; i < nq; ++i) {
      const auto [n, m] = modes[static_cast<size_t>(i)];
      p(i) += b(e) * px[n] * py[m];
    }
    p(nq) += b(e) * bucket;

    if (jacobian) {
      // dP_n/dmu = P_{n-1} - P_n, dmu_x/dx = dx / 2
      for (int i = 0; i < nq; ++i) {
        const auto [n, m] = modes[static_cast<size_t>(i)];
        const double dpx = (n > 0 ? px[n - 1] : 0.0) - px[n];
        const double dpy = (m > 0 ? py[m - 1] : 0.0) - py[m];
        (*jacobian)(i, 2 * e) = b(e) * dpx * py[m] * 0.5 * dx;
        (*jacobian)(i, 2 * e + 1) = b(e) * px[n] * dpy * 0.5 * dy;
      }
      // bucket = P(Poisson(mu) > Q); derivative is the Poisson pmf at Q
      double pmf_q = std::exp(-mu);
      for (int n = 1; n <= qmax; ++n) pmf_q *= mu / n;
      (*jacobian)(nq, 2 * e) = b(e) * pmf_q * 0.5 * dx;
      (*jacobian)(nq, 2 * e + 1) = b(e) * pmf_q * 0.5 * dy;
    }
  }
  return p;
}

Vec pad_probabilities(const Positions& positions, const Vec& b, const PadSpadeConfig& config) {
  return pad_probabilities(positions, b, config, nullptr);
}

Vec pad_probabilities(const EmitterEnsemble& ensemble, const PadSpadeConfig& config) {
  return pad_probabilities(ensemble.positions(), ensemble.brightnesses(), config, nullptr);
}

Counts sample_multinomial(const Vec& probs, std::int64_t n, Rng& rng) {
  if (n < 0) throw InvalidArgument("sample size must be nonnegative");
  check_closed_simplex(probs, 1e-9, "probability");
  Counts out = Counts::Zero(probs.size());
  std::int64_t remaining = n;
  double mass = 1.0;
  for (Eigen::Index i = 0; i + 1 < probs.size() && remaining > 0; ++i) {
    const double pi = std::max(probs(i), 0.0);
    const double frac = mass > 0.0 ? std::clamp(pi / mass, 0.0, 1.0) : 0.0;
    std::binomial_distribution<std::int64_t> draw(remaining, frac);
    out(i) = draw(rng);
    remaining -= out(i);
    mass -= pi;
  }
  out(probs.size() - 1) += remaining;
  return out;
}

HelstromResult helstrom_binary(double b1, double b2, double phi) {
  if (!(b1 > 0.0) || !(b2 > 0.0) || std::abs(b1 + b2 - 1.0) > 1e-12)
    throw InvalidArgument("priors must be positive and sum to 1");
  if (!(phi >= 0.0) || !(phi < 1.0)) throw InvalidArgument("overlap must lie in [0, 1)");

  const double a = std::sqrt(0.5 * (1.0 + phi));
  const double c = std::sqrt(0.5 * (1.0 - phi));
  HelstromResult out;
  out.states << a, a, -c, c;

  const Eigen::Vector2d psi1 = out.states.col(0);
  const Eigen::Vector2d psi2 = out.states.col(1);
  const Eigen::Matrix2d delta = b2 * psi2 * psi2.transpose() - b1 * psi1 * psi1.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(delta);
  // ascending eigenvalues: negative eigenspace detects state 1
  out.projectors.col(0) = es.eigenvectors().col(0);
  out.projectors.col(1) = es.eigenvectors().col(1);
  for (int k = 0; k < 2; ++k)
    if (out.projectors.col(k).dot(out.states.col(k)) < 0.0) out.projectors.col(k) *= -1.0;

  out.error_probability = 0.5 * (1.0 - std::sqrt(std::max(0.0, 1.0 - 4.0 * b1 * b2 * phi * phi)));
  return out;
}

double ModeField::norm() const {
  const double hx = xs.size() > 1 ? xs(1) - xs(0) : 1.0;
  const double hy = ys.size() > 1 ? ys(1) - ys(0) : 1.0;
  return std::sqrt(values.cwiseAbs2().sum() * hx * hy);
}

namespace {

Vec grid_axis(double center, const GridSpec& grid) {
  if (!(grid.extent > 0.0) || !(grid.spacing > 0.0)) throw InvalidArgument("grid extent and spacing must be positive");
  const int half = static_cast<int>(std::floor(grid.extent / grid.spacing + 1e-9));
  Vec axis(2 * half + 1);
  for (int i = -half; i <= half; ++i) axis(i + half) = center + i * grid.spacing;
  return axis;
}

// Normalized 1D Hermite-Gauss functions of the Gaussian PSF (unit width), orders 0..n.
std::vector<double> hg_values(int n, double x) {
  std::vector<double> h(static_cast<size_t>(n) + 1);
  const double xi = x / std::sqrt(2.0);
  const double scale = 1.0 / std::sqrt(std::sqrt(2.0));
  h[0] = std::pow(M_PI, -0.25) * std::exp(-0.5 * xi * xi);
  if (n >= 1) h[1] = std::sqrt(2.0) * xi * h[0];
  for (int k = 1; k < n; ++k)
    h[static_cast<size_t>(k) + 1] =
        std::sqrt(2.0 / (k + 1)) * xi * h[static_cast<size_t>(k)] - std::sqrt(static_cast<double>(k) / (k + 1)) * h[static_cast<size_t>(k) - 1];
  for (auto& v : h) v *= scale;
  return h;
}

}  // namespace

ModeField render_hg_mode(int n, int m, const Point& origin, const GridSpec& grid) {
  if (n < 0 || m < 0) throw InvalidArgument("mode indices must be nonnegative");
  ModeField f;
  f.xs = grid_axis(grid.center.x(), grid);
  f.ys = grid_axis(grid.center.y(), grid);
  Vec fx(f.xs.size()), fy(f.ys.size());
  for (Eigen::Index j = 0; j < f.xs.size(); ++j) fx(j) = hg_values(n, f.xs(j) - origin.x())[static_cast<size_t>(n)];
  for (Eigen::Index i = 0; i < f.ys.size(); ++i) fy(i) = hg_values(m, f.ys(i) - origin.y())[static_cast<size_t>(m)];
  f.values = (fy * fx.transpose()).cast<std::complex<double>>();
  return f;
}

ModeField render_state_superposition(const CVec& coefficients, const Positions& positions, const GridSpec& grid) {
  if (coefficients.size() != positions.rows()) throw InvalidArgument("one coefficient per state is required");
  ModeField f;
  f.xs = grid_axis(grid.center.x(), grid);
  f.ys = grid_axis(grid.center.y(), grid);
  f.values = CMat::Zero(f.ys.size(), f.xs.size());
  const double norm = 1.0 / std::sqrt(2.0 * M_PI);
  for (Eigen::Index k = 0; k < positions.rows(); ++k) {
    Vec gx(f.xs.size()), gy(f.ys.size());
    for (Eigen::Index j = 0; j < f.xs.size(); ++j) {
      const double d = f.xs(j) - positions(k, 0);
      gx(j) = std::exp(-0.25 * d * d);
    }
    for (Eigen::Index i = 0; i < f.ys.size(); ++i) {
      const double d = f.ys(i) - positions(k, 1);
      gy(i) = std::exp(-0.25 * d * d);
    }
    f.values += coefficients(k) * norm * (gy * gx.transpose()).cast<std::complex<double>>();
  }
  return f;
}

ModeField render_ykl_mode(const YklMeasurement& measurement, int k, const GridSpec& grid) {
  if (k < 0 || k >= measurement.size()) throw InvalidArgument("mode index out of range");
  if (measurement.design_positions.rows() != measurement.size())
    throw InvalidArgument("measurement has no design positions");
  const CVec coeffs = measurement.psi.partialPivLu().solve(measurement.unitary.col(k));
  return render_state_superposition(coeffs, measurement.design_positions, grid);
}

}  // namespace nvspade
