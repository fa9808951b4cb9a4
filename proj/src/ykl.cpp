#include <cmath>
#include <limits>
#include <random>

#include "linalg.hpp"
#include "nvspade/measurements.hpp"

namespace nvspade {

namespace {

constexpr double kPriorFloor = 1e-4;

CMat skew(const CMat& a) { return 0.5 * (a - a.adjoint()); }

// Q factor of a QR decomposition with a positive real R diagonal.
CMat qf(const CMat& a) {
  Eigen::HouseholderQR<CMat> qr(a);
  CMat q = qr.householderQ() * CMat::Identity(a.rows(), a.cols());
  const CMat r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index i = 0; i < a.cols(); ++i) {
    const auto d = r(i, i);
    if (std::abs(d) > 0) q.col(i) *= d / std::abs(d);
  }
  return q;
}

struct Problem {
  const CMat& psi;
  const Vec& b;

  double cost(const CMat& u) const {
    double s = 0.0;
    for (Eigen::Index k = 0; k < psi.cols(); ++k) s += b(k) * std::norm(u.col(k).dot(psi.col(k)));
    return 1.0 - s;
  }

  // Riemannian gradient U skew(U^dag Z) of the Euclidean gradient Z.
  CMat gradient(const CMat& u) const {
    CMat z(u.rows(), u.cols());
    for (Eigen::Index k = 0; k < psi.cols(); ++k) z.col(k) = -2.0 * b(k) * psi.col(k) * psi.col(k).dot(u.col(k));
    return u * skew(u.adjoint() * z);
  }
};

struct Descent {
  CMat u;
  double cost = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

Descent descend(const Problem& prob, CMat u, const YklOptions& opt) {
  Descent d;
  double f = prob.cost(u);
  CMat g = prob.gradient(u);
  double gnorm = g.norm();
  double step = 1.0;
  CMat prev_u, prev_g;
  int it = 0;
  for (; it < opt.max_iterations && gnorm >= opt.tol; ++it) {
    if (it > 0) {
      // Barzilai-Borwein initial step from successive iterates
      const CMat s = u - prev_u;
      const CMat y = g - prev_g;
      const double sy = std::abs(s.cwiseProduct(y.conjugate()).sum().real());
      if (sy > 0.0) step = std::clamp(s.squaredNorm() / sy, 1e-8, 1e4);
    }
    const double g2 = gnorm * gnorm;
    CMat trial;
    double ft = 0.0;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      trial = qf(u - step * g);
      ft = prob.cost(trial);
      if (ft <= f - 1e-4 * step * g2) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    prev_u = u;
    prev_g = g;
    u = trial;
    f = ft;
    g = prob.gradient(u);
    gnorm = g.norm();
  }
  d.u = u;
  d.cost = f;
  d.gradient_norm = gnorm;
  d.iterations = it;
  d.converged = gnorm < opt.tol;
  return d;
}

CMat random_unitary(int k, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  CMat a(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) a(i, j) = {normal(rng), normal(rng)};
  return qf(a);
}

}  // namespace

YklMeasurement solve_ykl(const EigenbasisRep& rep, const YklOptions& opt) {
  if (opt.restarts < 1) throw InvalidArgument("solve_ykl needs at least one start");
  if (opt.max_iterations < 1 || !(opt.tol > 0.0)) throw InvalidArgument("invalid solver tolerance or iteration cap");
  const int k = rep.size();
  const Problem prob{rep.psi, rep.priors};

  std::vector<CMat> starts;
  starts.push_back(CMat::Identity(k, k));
  if (opt.restarts > 1 && (rep.eigenvalues.array() > 0.0).all()) {
    const Vec inv_sqrt_l = rep.eigenvalues.cwiseSqrt().cwiseInverse();
    const Vec sqrt_b = rep.priors.cwiseMax(0.0).cwiseSqrt();
    starts.push_back(qf(inv_sqrt_l.asDiagonal() * rep.psi * sqrt_b.asDiagonal()));
  }
  for (int r = static_cast<int>(starts.size()); r < opt.restarts; ++r) {
    Rng rng = make_rng(opt.seed, {tag(Stage::Ykl), static_cast<std::uint64_t>(r)});
    starts.push_back(random_unitary(k, rng));
  }

  Descent best;
  best.cost = std::numeric_limits<double>::infinity();
  int total_iterations = 0;
  for (const auto& s : starts) {
    Descent d = descend(prob, s, opt);
    total_iterations += d.iterations;
    if (d.cost < best.cost - 1e-15) best = std::move(d);
  }

  YklMeasurement out;
  out.unitary = best.u;
  detail::fix_column_phases(out.unitary);
  out.psi = rep.psi;
  out.design_priors = rep.priors;
  out.min_error = std::max(0.0, best.cost);
  out.gradient_norm = best.gradient_norm;
  out.iterations = total_iterations;
  out.converged = best.converged;
  return out;
}

YklMeasurement build_ykl_measurement(const Positions& design_positions, const Vec& design_priors,
                                     const YklOptions& opt) {
  if (design_priors.size() != design_positions.rows())
    throw InvalidArgument("one prior per design position is required");
  check_closed_simplex(design_priors, 1e-9, "design prior");
  Vec priors = design_priors.cwiseMax(kPriorFloor);
  priors /= priors.sum();
  const GramMatrix g = gram_matrix(design_positions);
  const EigenbasisRep rep = eigenbasis_representation(g, priors);
  YklMeasurement out = solve_ykl(rep, opt);
  out.design_positions = design_positions;
  return out;
}

Mat ykl_overlap_matrix(const YklMeasurement& m, const Positions& positions) {
  if (m.design_positions.rows() != m.size()) throw InvalidArgument("measurement has no design positions");
  const GramMatrix g = gram_matrix(m.design_positions);
  const Mat c = cross_gram(m.design_positions, positions, 1.0);
  // coordinates of psi(r_j) in the design eigenbasis: Psi G^{-1} C
  const Mat ginv_c = g.entries.ldlt().solve(c);
  const CMat coords = m.psi * ginv_c.cast<std::complex<double>>();
  const CMat amp = m.unitary.adjoint() * coords;
  return amp.cwiseAbs2();
}

Vec ykl_outcome_probabilities(const YklMeasurement& m, const EmitterEnsemble& truth) {
  const Mat p = ykl_overlap_matrix(m, truth.positions());
  const int k = m.size();
  Vec q(k + 1);
  q.head(k) = p * truth.brightnesses();
  double bucket = 1.0 - q.head(k).sum();
  if (bucket < -1e-8) throw NumericalError("YKL outcome probabilities exceed one");
  q(k) = std::max(bucket, 0.0);
  if (bucket < 0.0) q.head(k) /= q.head(k).sum();
  return q;
}

}  // namespace nvspade
