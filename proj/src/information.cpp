#include "nvspade/information.hpp"

#include <algorithm>
#include <cmath>

namespace nvspade {

double TwoSourceParams::overlap() const {
  const double r = s / sigma;
  return std::exp(-0.5 * r * r);
}

void TwoSourceParams::validate() const {
  if (!(sigma > 0.0)) throw InvalidArgument("psf width must be positive");
  if (!(s > 0.0)) throw InvalidArgument("half-separation must be positive");
  if (!(std::abs(kappa) < 0.5)) throw InvalidArgument("brightness bias must lie in (-1/2, 1/2)");
  if (!std::isfinite(x0)) throw InvalidArgument("midpoint must be finite");
}

EmitterEnsemble TwoSourceParams::ensemble() const {
  validate();
  Positions r(2, 2);
  r << (x0 - s) / sigma, 0.0, (x0 + s) / sigma, 0.0;
  Vec b(2);
  b << 0.5 - kappa, 0.5 + kappa;
  return {r, b, sigma};
}

int FisherMatrix::index_of(const std::string& label) const {
  for (size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == label) return static_cast<int>(i);
  throw InvalidArgument("unknown parameter label: " + label);
}

const std::vector<std::string>& two_source_labels() {
  static const std::vector<std::string> labels{"x0", "s", "kappa"};
  return labels;
}

FisherMatrix qfim_two_source(const TwoSourceParams& p) {
  p.validate();
  const double phi = p.overlap();
  const double sig2 = p.sigma * p.sigma;
  const double tau = 1.0 - 4.0 * p.kappa * p.kappa;
  const double h = std::pow(p.s * phi / p.sigma, 2);
  FisherMatrix q;
  q.values.resize(3, 3);
  q.values << 1.0 - h * tau, 2.0 * p.kappa, 2.0 * p.s * phi * phi,
      2.0 * p.kappa, 1.0, 0.0,
      2.0 * p.s * phi * phi, 0.0, 4.0 * sig2 * (1.0 - phi * phi) / tau;
  q.values /= sig2;
  q.labels = two_source_labels();
  q.kind = FisherMatrix::Kind::Quantum;
  return q;
}

SldResult sld_brightness_two_source(const TwoSourceParams& p) {
  p.validate();
  const double phi = p.overlap();
  const double k = p.kappa;
  const double tau = 1.0 - 4.0 * k * k;
  const double r = std::sqrt(1.0 - phi * phi);
  SldResult out;
  out.rho << 0.5 * (1.0 + phi), k * r, k * r, 0.5 * (1.0 - phi);
  out.drho << 0.0, r, r, 0.0;
  out.sld << -2.0 * k * (1.0 - phi), r, r, -2.0 * k * (1.0 + phi);
  out.sld *= 2.0 / tau;

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(out.sld);
  // negative eigenvalue favours state 1 (brightness shifting away from it)
  out.eigenvalues = es.eigenvalues();
  out.eigenvectors = es.eigenvectors();
  const HelstromResult ref = helstrom_binary(0.5 - k, 0.5 + k, phi);
  for (int c = 0; c < 2; ++c)
    if (out.eigenvectors.col(c).dot(ref.states.col(c)) < 0.0) out.eigenvectors.col(c) *= -1.0;
  return out;
}

std::vector<CMat> brightness_slds(const EigenbasisRep& rep) {
  const int k = rep.size();
  const Vec& lam = rep.eigenvalues;
  if (lam.minCoeff() < 1e-12) throw NumericalError("density operator is numerically rank deficient");
  std::vector<CMat> out;
  const CVec last = rep.psi.col(k - 1);
  for (int a = 0; a + 1 < k; ++a) {
    const CMat d = rep.psi.col(a) * rep.psi.col(a).adjoint() - last * last.adjoint();
    CMat l(k, k);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) l(i, j) = 2.0 * d(i, j) / (lam(i) + lam(j));
    out.push_back(std::move(l));
  }
  return out;
}

FisherMatrix qfim_brightness_block(const EigenbasisRep& rep) {
  const int k = rep.size();
  if (k < 2) throw InvalidArgument("brightness QFIM needs at least two emitters");
  const auto slds = brightness_slds(rep);
  const CVec last = rep.psi.col(k - 1);
  FisherMatrix q;
  q.values.resize(k - 1, k - 1);
  for (int a = 0; a + 1 < k; ++a) {
    const CMat da = rep.psi.col(a) * rep.psi.col(a).adjoint() - last * last.adjoint();
    for (int b = 0; b + 1 < k; ++b) q.values(a, b) = (da * slds[static_cast<size_t>(b)]).trace().real();
  }
  q.values = 0.5 * (q.values + q.values.transpose()).eval();
  for (int a = 0; a + 1 < k; ++a) q.labels.push_back("b" + std::to_string(a + 1));
  q.kind = FisherMatrix::Kind::Quantum;
  return q;
}

double brightness_imprecision(const Mat& q) {
  if (q.rows() != q.cols() || q.rows() == 0) throw InvalidArgument("Fisher matrix must be square");
  Eigen::FullPivLU<Mat> lu(q);
  if (!lu.isInvertible()) throw NumericalError("Fisher matrix is singular");
  return lu.inverse().trace();
}

FisherMatrix cfim(const OutcomeModel& model, const Vec& theta, const std::vector<std::string>& labels, double step) {
  if (static_cast<Eigen::Index>(labels.size()) != theta.size()) throw InvalidArgument("one label per parameter");
  if (!(step > 0.0)) throw InvalidArgument("step must be positive");
  auto eval = [&](const Vec& t) {
    Vec p = model(t);
    check_closed_simplex(p, 1e-6, "outcome probability");
    return p;
  };
  const Vec p0 = eval(theta);
  const auto n = theta.size();
  Mat d(p0.size(), n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Vec tp = theta, tm = theta;
    tp(i) += step;
    tm(i) -= step;
    d.col(i) = (eval(tp) - eval(tm)) / (2.0 * step);
  }
  FisherMatrix f;
  f.values = Mat::Zero(n, n);
  for (Eigen::Index q = 0; q < p0.size(); ++q) {
    if (p0(q) < 1e-14) continue;
    f.values += d.row(q).transpose() * d.row(q) / p0(q);
  }
  f.labels = labels;
  f.kind = FisherMatrix::Kind::Classical;
  return f;
}

namespace {

void check_theta(const Vec& t) {
  if (t.size() != 3) throw InvalidArgument("two-source parameter vector is (x0, s, kappa)");
}

Positions two_source_positions(const Vec& t) {
  Positions r(2, 2);
  r << t(0) - t(1), 0.0, t(0) + t(1), 0.0;
  return r;
}

Vec two_source_brightness(const Vec& t) {
  Vec b(2);
  b << 0.5 - t(2), 0.5 + t(2);
  return b;
}

}  // namespace

OutcomeModel di_two_source_model(const Vec& theta0, double spacing) {
  check_theta(theta0);
  if (!(spacing > 0.0)) throw InvalidArgument("grid spacing must be positive");
  const double extent = 6.0 + std::abs(theta0(0)) + std::abs(theta0(1));
  const int half = static_cast<int>(std::ceil(extent / spacing));
  Vec axis(2 * half + 1);
  for (int i = -half; i <= half; ++i) axis(i + half) = i * spacing;
  // the y marginal of every emitter is the same Gaussian, sampled once
  Vec gy = (-0.5 * axis.array().square()).exp() * spacing / std::sqrt(2.0 * M_PI);
  return [axis, gy, spacing](const Vec& t) {
    check_theta(t);
    const Positions r = two_source_positions(t);
    const Vec b = two_source_brightness(t);
    Vec px = Vec::Zero(axis.size());
    for (int k = 0; k < 2; ++k)
      px += b(k) * ((-0.5 * (axis.array() - r(k, 0)).square()).exp() * spacing / std::sqrt(2.0 * M_PI)).matrix();
    const Mat grid = px * gy.transpose();
    return Vec(Eigen::Map<const Vec>(grid.data(), grid.size()));
  };
}

OutcomeModel hg_two_source_model(const PadSpadeConfig& config) {
  return [config](const Vec& t) {
    check_theta(t);
    return pad_probabilities(two_source_positions(t), two_source_brightness(t), config);
  };
}

OutcomeModel bspade_two_source_model(const Point& origin) {
  PadSpadeConfig cfg;
  cfg.origin = origin;
  cfg.max_total_order = 0;
  return hg_two_source_model(cfg);
}

Mat nuisance_qcrb(const FisherMatrix& f, const std::vector<std::string>& targets) {
  const auto n = f.values.rows();
  std::vector<int> t, r;
  for (const auto& label : targets) t.push_back(f.index_of(label));
  for (int i = 0; i < n; ++i)
    if (std::find(t.begin(), t.end(), i) == t.end()) r.push_back(i);
  if (t.empty()) throw InvalidArgument("no target parameters given");

  Mat qbb(t.size(), t.size()), qbr(t.size(), r.size()), qrr(r.size(), r.size());
  for (size_t i = 0; i < t.size(); ++i) {
    for (size_t j = 0; j < t.size(); ++j) qbb(i, j) = f.values(t[i], t[j]);
    for (size_t j = 0; j < r.size(); ++j) qbr(i, j) = f.values(t[i], r[j]);
  }
  for (size_t i = 0; i < r.size(); ++i)
    for (size_t j = 0; j < r.size(); ++j) qrr(i, j) = f.values(r[i], r[j]);

  Mat schur = qbb;
  if (!r.empty()) {
    Eigen::FullPivLU<Mat> lu(qrr);
    if (!lu.isInvertible()) throw NumericalError("nuisance block is singular");
    schur -= qbr * lu.solve(qbr.transpose());
  }
  Eigen::FullPivLU<Mat> lu(schur);
  if (!lu.isInvertible()) throw NumericalError("target block is singular after eliminating nuisances");
  return lu.inverse();
}

double allocation_quartic(double beta, double kappa) {
  const double nu = 4.0 * kappa * kappa;
  const double b2 = beta * beta;
  return nu * nu * b2 * b2 - 2.0 * nu * b2 - 2.0 * (1.0 - nu) * beta + 1.0;
}

double optimal_allocation(double kappa) {
  if (!(std::abs(kappa) < 0.5)) throw InvalidArgument("brightness bias must lie in (-1/2, 1/2)");
  // f(0) = 1 > 0, f(1) = nu^2 - 1 < 0 and f is decreasing on [0, 1]
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double f = allocation_quartic(mid, kappa);
    if (f == 0.0) return mid;
    (f > 0.0 ? lo : hi) = mid;
  }
  double beta = 0.5 * (lo + hi);
  const double nu = 4.0 * kappa * kappa;
  for (int i = 0; i < 3; ++i) {
    const double df = 4.0 * nu * nu * beta * beta * beta - 4.0 * nu * beta - 2.0 * (1.0 - nu);
    if (df == 0.0) break;
    const double next = beta - allocation_quartic(beta, kappa) / df;
    if (!(next >= lo && next <= hi)) break;
    beta = next;
  }
  return beta;
}

double allocated_brightness_qcrb(const TwoSourceParams& p, double beta, double total) {
  p.validate();
  if (!(beta > 0.0 && beta < 1.0)) throw InvalidArgument("allocation must lie in (0, 1)");
  if (!(total > 0.0)) throw InvalidArgument("photon count must be positive");
  const double phi = p.overlap();
  const double phi2 = phi * phi;
  const double h = std::pow(p.s * phi / p.sigma, 2);
  const double nu = 4.0 * p.kappa * p.kappa;
  const double num = (1.0 - nu) * (1.0 - nu * beta * beta - h * (1.0 - nu * beta));
  const double den = 4.0 * beta * ((1.0 - nu * beta * beta) * (1.0 - phi2) - h * (1.0 - nu * beta - (1.0 - beta) * phi2));
  return num / den / total;
}

double allocated_brightness_qcrb_subdiffraction(const TwoSourceParams& p, double beta, double total) {
  p.validate();
  if (!(beta > 0.0 && beta < 1.0)) throw InvalidArgument("allocation must lie in (0, 1)");
  if (!(total > 0.0)) throw InvalidArgument("photon count must be positive");
  const double nu = 4.0 * p.kappa * p.kappa;
  const double ratio = p.sigma / p.s;
  const double inner = 1.0 / (beta * (1.0 - nu)) - 1.0 / (1.0 - nu * beta * beta);
  return ratio * ratio / (4.0 * beta * beta) / inner / total;
}

}  // namespace nvspade
