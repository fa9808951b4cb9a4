#include "nvspade/bayes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <gsl/gsl_cdf.h>
#include <gsl/gsl_integration.h>
#include <gsl/gsl_sf_gamma.h>

#include "linalg.hpp"
#include "optimize.hpp"

namespace nvspade {

namespace {

constexpr double kM2Floor = 1e-6;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Vec uniform_grid(double lo, double hi, int n) {
  if (n < 2) throw InvalidArgument("grid needs at least two points");
  return Vec::LinSpaced(n, lo, hi);
}

double spacing_of(const Vec& g) { return g(1) - g(0); }

// count * log(p) with 0 * log(0) = 0
double xlogy(double count, double p) {
  if (count == 0.0) return 0.0;
  return p > 0.0 ? count * std::log(p) : kNegInf;
}

PosteriorGrid normalized(const Vec& grid, Vec density) {
  PosteriorGrid out;
  out.grid = grid;
  const double z = trapezoid(density, spacing_of(grid));
  if (!(z > 0.0) || !std::isfinite(z)) throw NumericalError("posterior has no mass on its grid");
  out.normalization = z;
  out.density = density / z;
  return out;
}

// exp(log values - max), normalized to unit trapezoid mass; zero vector if all -inf
Vec exp_normalize(const Vec& logv, double h) {
  const double mx = logv.maxCoeff();
  if (!std::isfinite(mx)) return Vec::Zero(logv.size());
  Vec v = (logv.array() - mx).exp();
  const double z = trapezoid(v, h);
  return v / z;
}

void hermite_rule(int n, double sd, Vec& nodes, Vec& weights) {
  detail::quiet_gsl();
  nodes.resize(n);
  weights.resize(n);
  if (sd <= 0.0) {
    nodes.setZero();
    weights.setZero();
    weights(n / 2) = 1.0;
    return;
  }
  gsl_integration_fixed_workspace* w = gsl_integration_fixed_alloc(gsl_integration_fixed_hermite, n, 0.0, 1.0, 0.0, 0.0);
  const double* x = gsl_integration_fixed_nodes(w);
  const double* wt = gsl_integration_fixed_weights(w);
  // int f(e) N(e; 0, sd^2) de = sum_i w_i / sqrt(pi) f(sqrt(2) sd x_i)
  for (int i = 0; i < n; ++i) {
    nodes(i) = std::sqrt(2.0) * sd * x[i];
    weights(i) = wt[i] / std::sqrt(M_PI);
  }
  gsl_integration_fixed_free(w);
  weights /= weights.sum();
}

Vec separation_prior_density(const Vec& grid, double alpha, double lambda) {
  // cell averages of the density induced on s by Gamma(mu | alpha, lambda), mu = (s/2)^2
  const double h = spacing_of(grid);
  const double s_max = grid(grid.size() - 1);
  Vec d(grid.size());
  auto cdf = [&](double s) { return gsl_cdf_gamma_P(0.25 * s * s, alpha, 1.0 / lambda); };
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    const double a = std::max(0.0, grid(i) - 0.5 * h);
    const double b = std::min(s_max, grid(i) + 0.5 * h);
    d(i) = std::max(0.0, cdf(b) - cdf(a)) / (b - a);
  }
  if (!(trapezoid(d, h) > 0.0)) d.setConstant(1.0);
  return d;
}

}  // namespace

double trapezoid(const Vec& y, double h) {
  if (y.size() < 2) return 0.0;
  return h * (y.sum() - 0.5 * (y(0) + y(y.size() - 1)));
}

double PosteriorGrid::integral() const { return trapezoid(density, spacing_of(grid)); }

double PosteriorGrid::mean() const { return trapezoid(density.cwiseProduct(grid), spacing_of(grid)); }

double PosteriorGrid::variance() const {
  const double m = mean();
  const Vec d2 = (grid.array() - m).square().matrix();
  return trapezoid(density.cwiseProduct(d2), spacing_of(grid));
}

PriorSet build_priors_from_di(const Vec& x, const BayesGrids& g) {
  if (x.size() < 2) throw InvalidArgument("prior construction needs at least two samples");
  PriorSet p;
  const auto m1 = static_cast<double>(x.size());
  p.m1 = x.size();
  p.x0_hat = x.mean();
  p.m2_hat = (x.array() - p.x0_hat).square().mean();
  double excess = p.m2_hat - 1.0;
  p.s_hat = excess > 0.0 ? std::sqrt(excess) : 0.0;
  if (excess < kM2Floor) {
    excess = kM2Floor;
    p.clamped = true;
  }
  const double ratio = m1 * m1 / (m1 - 1.0);
  p.alpha = 0.5 * excess * excess * ratio;
  p.lambda = 2.0 * excess * ratio;
  p.epsilon_sd = 1.0 / std::sqrt(m1);

  const Vec sg = uniform_grid(0.0, g.s_max, g.s_points);
  p.separation = normalized(sg, separation_prior_density(sg, p.alpha, p.lambda));
  const Vec kg = uniform_grid(-0.5, 0.5, g.kappa_points);
  p.kappa = normalized(kg, Vec::Ones(kg.size()));
  hermite_rule(g.hermite_nodes, p.epsilon_sd, p.epsilon_nodes, p.epsilon_weights);
  return p;
}

double bspade_xi(double s, double eps) {
  const double a = 0.5 * (eps + s);
  const double b = 0.5 * (eps - s);
  return 0.5 * (std::exp(-a * a) + std::exp(-b * b));
}

double bspade_likelihood(std::int64_t q, std::int64_t m2, double s, double eps) {
  if (m2 < 0 || q < 0 || q > m2) throw InvalidArgument("B-SPADE count outside [0, M2]");
  const double xi = bspade_xi(s, eps);
  const double l = gsl_sf_lnchoose(static_cast<unsigned>(m2), static_cast<unsigned>(q)) +
                   xlogy(static_cast<double>(q), xi) + xlogy(static_cast<double>(m2 - q), 1.0 - xi);
  return std::exp(l);
}

SeparationPosterior::SeparationPosterior(const PriorSet& prior)
    : grid_(prior.separation.grid), nodes_(prior.epsilon_nodes), weights_(prior.epsilon_weights) {
  log_prior_ = prior.separation.density.array().log();
  log_like_ = Mat::Zero(nodes_.size(), grid_.size());
}

void SeparationPosterior::update(std::int64_t q, std::int64_t m2) {
  if (m2 < 0 || q < 0 || q > m2) throw InvalidArgument("B-SPADE count outside [0, M2]");
  if (m2 == 0) return;
  for (Eigen::Index j = 0; j < nodes_.size(); ++j)
    for (Eigen::Index i = 0; i < grid_.size(); ++i) {
      const double xi = bspade_xi(grid_(i), nodes_(j));
      log_like_(j, i) += xlogy(static_cast<double>(q), xi) + xlogy(static_cast<double>(m2 - q), 1.0 - xi);
    }
  photons_ += m2;
}

Vec SeparationPosterior::conditional(int node) const {
  const Vec logp = log_prior_ + log_like_.row(node).transpose();
  return exp_normalize(logp, spacing_of(grid_));
}

PosteriorGrid SeparationPosterior::marginal() const {
  Vec d = Vec::Zero(grid_.size());
  for (int j = 0; j < nodes_.size(); ++j) d += weights_(j) * conditional(j);
  return normalized(grid_, d);
}

PosteriorGrid update_separation_posterior(const PriorSet& prior, std::int64_t q, std::int64_t m2) {
  SeparationPosterior post(prior);
  post.update(q, m2);
  return post.marginal();
}

bool switch_type1(const Vec& x, double zeta) {
  if (x.size() < 2) throw InvalidArgument("switching rule needs at least two samples");
  const auto m1 = static_cast<double>(x.size());
  const double m2 = (x.array() - x.mean()).square().mean();
  return m2 - zeta * std::sqrt(2.0 * (m1 - 1.0) / (m1 * m1)) > 1.0;
}

double expected_posterior_variance(const PriorSet& prior, std::int64_t m2) {
  if (m2 < 0) throw InvalidArgument("photon budget must be nonnegative");
  if (m2 == 0) return prior.separation.variance();
  const Vec& grid = prior.separation.grid;
  const double h = spacing_of(grid);
  const auto nn = prior.epsilon_nodes.size();
  const auto ng = grid.size();
  const double s_hat = prior.separation.mean();
  const double n2 = static_cast<double>(m2);

  Mat la(nn, ng), lb(nn, ng);
  const Vec log_prior = prior.separation.density.array().log();
  std::int64_t qlo = m2, qhi = 0;
  Vec xi_hat(nn);
  for (Eigen::Index j = 0; j < nn; ++j) {
    for (Eigen::Index i = 0; i < ng; ++i) {
      const double xi = bspade_xi(grid(i), prior.epsilon_nodes(j));
      la(j, i) = xi > 0.0 ? std::log(xi) : kNegInf;
      lb(j, i) = xi < 1.0 ? std::log1p(-xi) : kNegInf;
    }
    xi_hat(j) = bspade_xi(s_hat, prior.epsilon_nodes(j));
    const double mean = n2 * xi_hat(j);
    const double sd = std::sqrt(n2 * xi_hat(j) * (1.0 - xi_hat(j)));
    qlo = std::min(qlo, static_cast<std::int64_t>(std::floor(mean - 10.0 * sd - 3.0)));
    qhi = std::max(qhi, static_cast<std::int64_t>(std::ceil(mean + 10.0 * sd + 3.0)));
  }
  qlo = std::clamp<std::int64_t>(qlo, 0, m2);
  qhi = std::clamp<std::int64_t>(qhi, 0, m2);

  double vbar = 0.0, wsum = 0.0;
  Vec post(ng), logp(ng);
  for (std::int64_t q = qlo; q <= qhi; ++q) {
    const double dq = static_cast<double>(q);
    const double lnc = gsl_sf_lnchoose(static_cast<unsigned>(m2), static_cast<unsigned>(q));
    double w = 0.0;
    for (Eigen::Index j = 0; j < nn; ++j)
      w += prior.epsilon_weights(j) *
           std::exp(lnc + xlogy(dq, xi_hat(j)) + xlogy(n2 - dq, 1.0 - xi_hat(j)));
    if (w < 1e-300) continue;
    post.setZero();
    for (Eigen::Index j = 0; j < nn; ++j) {
      for (Eigen::Index i = 0; i < ng; ++i) {
        const double a = q > 0 ? dq * la(j, i) : 0.0;
        const double b = q < m2 ? (n2 - dq) * lb(j, i) : 0.0;
        logp(i) = log_prior(i) + a + b;
      }
      const double mx = logp.maxCoeff();
      if (!std::isfinite(mx)) continue;
      post += prior.epsilon_weights(j) * exp_normalize(logp, h);
    }
    const double z = trapezoid(post, h);
    if (!(z > 0.0)) continue;
    const double mean = trapezoid(post.cwiseProduct(grid), h) / z;
    const double second = trapezoid(post.cwiseProduct(grid.cwiseAbs2()), h) / z;
    vbar += w * std::max(0.0, second - mean * mean);
    wsum += w;
  }
  if (!(wsum > 0.0)) return prior.separation.variance();
  return vbar / wsum;
}

bool switch_type2(std::vector<double>& history, const Vec& samples, std::int64_t remaining, const BayesGrids& grids) {
  const PriorSet prior = build_priors_from_di(samples, grids);
  const double v = expected_posterior_variance(prior, remaining);
  history.push_back(v);
  return history.size() >= 2 && v > history[history.size() - 2];
}

namespace {

// F0(u) = sum_i log(1 + u x_i) tabulated with its derivative for cubic Hermite interpolation.
class LogProductTable {
 public:
  LogProductTable(const Vec& x, double lo, double hi, int n) : lo_(lo), hi_(hi) {
    if (!(hi > lo)) {
      n_ = 0;
      return;
    }
    n_ = n;
    h_ = (hi - lo) / (n - 1);
    f_.resize(n);
    d_.resize(n);
    for (int k = 0; k < n; ++k) {
      const double u = lo + k * h_;
      const Eigen::ArrayXd t = 1.0 + u * x.array();
      f_(k) = t.log().sum();
      d_(k) = (x.array() / t).sum();
    }
  }

  bool contains(double u) const { return n_ > 0 && u >= lo_ && u <= hi_; }

  double operator()(double u) const {
    double t = (u - lo_) / h_;
    int k = std::clamp(static_cast<int>(std::floor(t)), 0, n_ - 2);
    t -= k;
    const double t2 = t * t, t3 = t2 * t;
    const double v = (2 * t3 - 3 * t2 + 1) * f_(k) + (t3 - 2 * t2 + t) * h_ * d_(k) + (-2 * t3 + 3 * t2) * f_(k + 1) +
                     (t3 - t2) * h_ * d_(k + 1);
    // the log-product is concave: keep the cubic between the chord and both tangents, which
    // stops it overshooting next to the log singularity at the domain edge
    const double chord = (1 - t) * f_(k) + t * f_(k + 1);
    const double tangent = std::min(f_(k) + t * h_ * d_(k), f_(k + 1) - (1 - t) * h_ * d_(k + 1));
    return std::clamp(v, chord, std::max(chord, tangent));
  }

 private:
  double lo_, hi_, h_ = 0.0;
  int n_ = 0;
  Vec f_, d_;
};

}  // namespace

BrightnessPosterior brightness_posterior(const Vec& samples, double x0_hat, const SeparationPosterior& sep,
                                         const BayesGrids& g) {
  BrightnessPosterior out;
  const Vec kg = uniform_grid(-0.5, 0.5, g.kappa_points);
  const double hk = spacing_of(kg);
  if (samples.size() == 0) {
    out.kappa = normalized(kg, Vec::Ones(kg.size()));
    out.kappa_mmse = 0.0;
    return out;
  }
  const Vec x = samples.array() - x0_hat;
  const double n = static_cast<double>(x.size());
  const Vec& sg = sep.grid();
  const double hs = spacing_of(sg);
  const Vec& nodes = sep.nodes();
  const Vec& weights = sep.weights();

  // validity domain of F0: 1 + u x_i > 0 for all i
  const double xmax = x.maxCoeff(), xmin = x.minCoeff();
  double dom_lo = xmax > 0.0 ? -1.0 / xmax : -1e300;
  double dom_hi = xmin < 0.0 ? -1.0 / xmin : 1e300;
  const double cmax = sg(sg.size() - 1);  // |2 kappa s| <= s_max
  double need_lo = 1e300, need_hi = -1e300;
  for (Eigen::Index j = 0; j < nodes.size(); ++j)
    for (double c : {-cmax, cmax}) {
      const double den = 1.0 - c * nodes(j);
      if (den <= 0.0) continue;
      need_lo = std::min(need_lo, c / den);
      need_hi = std::max(need_hi, c / den);
    }
  const double margin = 1e-9 * std::max(1.0, dom_hi - dom_lo < 1e299 ? dom_hi - dom_lo : 1.0);
  const LogProductTable f0(x, std::max(dom_lo + margin, need_lo), std::min(dom_hi - margin, need_hi), 2049);

  Vec pk = Vec::Zero(kg.size());
  Vec logc(kg.size());
  for (Eigen::Index j = 0; j < nodes.size(); ++j) {
    const Vec ps = sep.conditional(static_cast<int>(j));
    const double psmax = ps.maxCoeff();
    for (Eigen::Index i = 0; i < sg.size(); ++i) {
      double wi = weights(j) * ps(i) * hs * ((i == 0 || i == sg.size() - 1) ? 0.5 : 1.0);
      if (wi <= 1e-14 * weights(j) * psmax * hs) continue;
      bool any_valid = false;
      for (Eigen::Index k = 0; k < kg.size(); ++k) {
        const double c = 2.0 * kg(k) * sg(i);
        const double den = 1.0 - c * nodes(j);
        const double u = den > 0.0 ? c / den : 0.0;
        if (den <= 0.0 || !f0.contains(u)) {
          logc(k) = kNegInf;
          out.flagged = true;
          continue;
        }
        logc(k) = n * std::log(den) + f0(u);
        any_valid = true;
      }
      if (!any_valid) continue;
      pk += wi * exp_normalize(logc, hk);
    }
  }
  out.kappa = normalized(kg, pk);
  out.kappa.flagged = out.flagged;
  out.kappa_mmse = out.kappa.mean();
  return out;
}

namespace {

Mat difference_kernel(const Vec& x, double mu1, double mu2, double nu, double b1, double b2) {
  const auto n = x.size();
  const double v = 1.0 + nu * nu;
  const double pref = 1.0 / std::sqrt(2.0 * M_PI) / std::sqrt(v);
  Mat k(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const double d = x(i) - x(j);
      const double m = 0.5 * (x(i) + x(j));
      const double common = pref * std::exp(-d * d / 8.0);
      k(i, j) = common * (b1 * std::exp(-(m - mu1) * (m - mu1) / (2.0 * v)) -
                          b2 * std::exp(-(m - mu2) * (m - mu2) / (2.0 * v)));
    }
  return k;
}

DifferenceModes solve_modes(double mu1, double mu2, double nu, double b1, double b2, double extent, int points) {
  const double c = 0.5 * (mu1 + mu2);
  DifferenceModes out;
  out.grid = Vec::LinSpaced(points, c - extent, c + extent);
  const double h = spacing_of(out.grid);
  const Mat a = h * difference_kernel(out.grid, mu1, mu2, nu, b1, b2);
  Eigen::SelfAdjointEigenSolver<Mat> es(a);
  if (es.info() != Eigen::Success) throw NumericalError("difference operator eigensolve failed");
  std::vector<int> order(static_cast<size_t>(points));
  for (int i = 0; i < points; ++i) order[static_cast<size_t>(i)] = i;
  const Vec ev = es.eigenvalues();
  std::stable_sort(order.begin(), order.end(), [&](int l, int r) { return std::abs(ev(l)) > std::abs(ev(r)); });
  out.eigenvalues.resize(points);
  out.modes.resize(points, points);
  for (int i = 0; i < points; ++i) {
    out.eigenvalues(i) = ev(order[static_cast<size_t>(i)]);
    Vec m = es.eigenvectors().col(order[static_cast<size_t>(i)]) / std::sqrt(h);
    Eigen::Index r = 0;
    m.cwiseAbs().maxCoeff(&r);
    if (m(r) < 0.0) m = -m;
    out.modes.col(i) = m;
  }
  return out;
}

}  // namespace

DifferenceModes difference_operator_modes(double mu1, double mu2, double nu, double b1, double b2, double extent,
                                          int points) {
  if (!(nu >= 0.0)) throw InvalidArgument("position uncertainty must be nonnegative");
  if (b1 < 0.0 || b2 < 0.0) throw InvalidArgument("brightness weights must be nonnegative");
  if (points < 16) throw InvalidArgument("grid needs at least 16 points");
  if (extent < 0.5 * std::abs(mu2 - mu1) + 6.0) throw InvalidArgument("grid must extend 6 sigma beyond both means");
  DifferenceModes fine = solve_modes(mu1, mu2, nu, b1, b2, extent, points);
  const DifferenceModes coarse = solve_modes(mu1, mu2, nu, b1, b2, extent, points / 2);
  // +/- pairs of equal magnitude may come out in either order, so compare by value
  const int check = std::min<int>(4, points / 2);
  std::vector<double> a(fine.eigenvalues.data(), fine.eigenvalues.data() + check);
  std::vector<double> c(coarse.eigenvalues.data(), coarse.eigenvalues.data() + check);
  std::sort(a.begin(), a.end());
  std::sort(c.begin(), c.end());
  for (int i = 0; i < check; ++i)
    if (std::abs(a[static_cast<size_t>(i)] - c[static_cast<size_t>(i)]) > 1e-3)
      throw NumericalError("difference operator grid too coarse");
  return fine;
}

}  // namespace nvspade
