#include "nvspade/scene.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "linalg.hpp"

namespace nvspade {

namespace {

constexpr double kMinSeparation = 1e-9;
constexpr double kRankThreshold = 1e-12;

}  // namespace

void check_open_simplex(const Vec& b, double tol, const char* what) {
  if (b.size() == 0) throw InvalidArgument(std::string(what) + " vector is empty");
  if (!b.allFinite()) throw InvalidArgument(std::string(what) + " vector is not finite");
  if ((b.array() <= 0.0).any())
    throw InvalidArgument(std::string(what) + " entries must be strictly positive");
  if (std::abs(b.sum() - 1.0) > tol)
    throw InvalidArgument(std::string(what) + " entries must sum to 1");
}

void check_closed_simplex(const Vec& b, double tol, const char* what) {
  if (b.size() == 0) throw InvalidArgument(std::string(what) + " vector is empty");
  if (!b.allFinite()) throw InvalidArgument(std::string(what) + " vector is not finite");
  if ((b.array() < -tol).any()) throw InvalidArgument(std::string(what) + " entries must be nonnegative");
  if (std::abs(b.sum() - 1.0) > tol) throw InvalidArgument(std::string(what) + " entries must sum to 1");
}

EmitterEnsemble::EmitterEnsemble(Positions positions, Vec brightnesses, double sigma)
    : positions_(std::move(positions)), brightnesses_(std::move(brightnesses)), sigma_(sigma) {
  if (!(sigma_ > 0.0) || !std::isfinite(sigma_)) throw InvalidArgument("psf width must be positive");
  if (positions_.rows() == 0) throw InvalidArgument("ensemble needs at least one emitter");
  if (!positions_.allFinite()) throw InvalidArgument("emitter positions must be finite");
  if (brightnesses_.size() != positions_.rows())
    throw InvalidArgument("brightness vector length must equal the number of emitters");
  check_open_simplex(brightnesses_);
}

EmitterEnsemble EmitterEnsemble::from_physical(const Positions& physical_positions, Vec brightnesses,
                                               double sigma) {
  if (!(sigma > 0.0)) throw InvalidArgument("psf width must be positive");
  return {physical_positions / sigma, std::move(brightnesses), sigma};
}

EmitterEnsemble EmitterEnsemble::uniform(Positions positions, double sigma) {
  const auto k = positions.rows();
  Vec b = Vec::Constant(k, 1.0 / static_cast<double>(k));
  return {std::move(positions), std::move(b), sigma};
}

GramMatrix gram_matrix(const Positions& positions) {
  const auto k = positions.rows();
  if (k == 0) throw InvalidArgument("gram matrix of an empty ensemble");
  if (k >= 2 && min_pairwise_separation(positions) < kMinSeparation)
    throw DegenerateGeometryError("emitter positions coincide; gram matrix is singular");
  return GramMatrix{cross_gram(positions, positions, 1.0)};
}

GramMatrix gram_matrix(const EmitterEnsemble& ensemble) { return gram_matrix(ensemble.positions()); }

Mat cross_gram(const Positions& a, const Positions& b, double sigma) {
  if (!(sigma > 0.0)) throw InvalidArgument("psf width must be positive");
  Mat out(a.rows(), b.rows());
  const double scale = 1.0 / (8.0 * sigma * sigma);
  for (Eigen::Index j = 0; j < a.rows(); ++j)
    for (Eigen::Index k = 0; k < b.rows(); ++k)
      out(j, k) = std::exp(-(a.row(j) - b.row(k)).squaredNorm() * scale);
  return out;
}

EigenbasisRep eigenbasis_representation(const GramMatrix& gram, const Vec& priors) {
  const int k = gram.size();
  if (gram.entries.cols() != k) throw InvalidArgument("gram matrix must be square");
  if (priors.size() != k) throw InvalidArgument("prior vector length must match gram matrix");
  check_closed_simplex(priors, 1e-9, "prior");

  auto [d, u] = detail::sorted_symmetric_eigen(gram.entries);
  if (d(k - 1) < kRankThreshold * d(0))
    throw NumericalError("gram matrix is numerically rank deficient");

  const Vec sqrt_d = d.cwiseSqrt();
  const Vec sqrt_b = priors.cwiseMax(0.0).cwiseSqrt();
  // A = D^(1/2) U^T B^(1/2)
  const Mat a = sqrt_d.asDiagonal() * u.transpose() * sqrt_b.asDiagonal();
  const Mat s = a * a.transpose();
  auto [lambda, w] = detail::sorted_symmetric_eigen(s);
  const Mat v = w.transpose();
  const Mat psi = v * sqrt_d.asDiagonal() * u.transpose();

  EigenbasisRep rep;
  rep.psi = psi.cast<std::complex<double>>();
  rep.eigenvalues = lambda.cwiseMax(0.0);
  rep.priors = priors;
  return rep;
}

double min_pairwise_separation(const Positions& positions) {
  const auto k = positions.rows();
  if (k < 2) throw InvalidArgument("minimum separation needs at least two emitters");
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = i + 1; j < k; ++j) best = std::min(best, (positions.row(i) - positions.row(j)).norm());
  return best;
}

}  // namespace nvspade
