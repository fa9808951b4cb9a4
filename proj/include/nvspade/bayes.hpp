#pragma once

#include <cstdint>
#include <vector>

#include "nvspade/types.hpp"

namespace nvspade {

/// Density sampled on a uniform grid, normalized by the trapezoid rule.
struct PosteriorGrid {
  Vec grid;
  Vec density;
  double normalization = 1.0;  ///< trapezoid integral before normalizing
  bool flagged = false;        ///< some grid points were outside the model's validity

  double integral() const;
  double mean() const;
  double variance() const;
};

double trapezoid(const Vec& values, double spacing);

struct BayesGrids {
  int s_points = 400;
  double s_max = 2.0;  ///< units of sigma
  int kappa_points = 401;
  int hermite_nodes = 21;
};

/// Priors inherited from the DI moments. All lengths in units of sigma.
struct PriorSet {
  double x0_hat = 0.0;
  double m2_hat = 0.0;      ///< whitened second moment
  double s_hat = 0.0;       ///< sqrt(m2 - 1), zero when m2 < 1
  double epsilon_sd = 1.0;  ///< pointing-error standard deviation 1/sqrt(M1)
  double alpha = 0.0;
  double lambda = 0.0;
  std::int64_t m1 = 0;
  bool clamped = false;     ///< m2 - 1 was replaced by the floor
  PosteriorGrid separation;
  PosteriorGrid kappa;
  Vec epsilon_nodes;
  Vec epsilon_weights;
};

/// x0, whitened m2 and the Gamma hyperparameters of mu = (s/2)^2 from 1D DI samples.
PriorSet build_priors_from_di(const Vec& samples, const BayesGrids& grids = {});

/// PSF-mode probability of a pair at half-separation s with pointing error eps.
double bspade_xi(double s, double eps);
/// Binom(q | xi(s, eps), M2)
double bspade_likelihood(std::int64_t q, std::int64_t m2, double s, double eps);

/// Separation posterior kept per pointing-error node so updates stay exactly sequential.
class SeparationPosterior {
 public:
  explicit SeparationPosterior(const PriorSet& prior);

  void update(std::int64_t q, std::int64_t m2);
  /// p(s | eps_j) for node j.
  Vec conditional(int node) const;
  PosteriorGrid marginal() const;

  const Vec& grid() const { return grid_; }
  const Vec& nodes() const { return nodes_; }
  const Vec& weights() const { return weights_; }
  std::int64_t photons() const { return photons_; }

 private:
  Vec grid_;
  Vec log_prior_;
  Vec nodes_;
  Vec weights_;
  Mat log_like_;  ///< nodes x grid
  std::int64_t photons_ = 0;
};

PosteriorGrid update_separation_posterior(const PriorSet& prior, std::int64_t q, std::int64_t m2);

/// m2 - zeta sqrt(2 (M1 - 1) / M1^2) > 1
bool switch_type1(const Vec& samples, double zeta = 2.0);

/// Expected separation-posterior variance after spending `m2` photons on B-SPADE.
double expected_posterior_variance(const PriorSet& prior, std::int64_t m2);

/// Appends the current expected variance to `history` and reports whether it rose.
bool switch_type2(std::vector<double>& history, const Vec& samples, std::int64_t remaining,
                  const BayesGrids& grids = {});

struct BrightnessPosterior {
  PosteriorGrid kappa;
  double kappa_mmse = 0.0;
  bool flagged = false;
};

/// Sub-diffraction brightness posterior from sensing-stage DI samples, marginalized over the
/// separation posterior and pointing error.
BrightnessPosterior brightness_posterior(const Vec& samples, double x0_hat, const SeparationPosterior& separation,
                                         const BayesGrids& grids = {});

struct DifferenceModes {
  Vec grid;
  Vec eigenvalues;  ///< sorted by magnitude, descending
  Mat modes;        ///< columns, unit L2 norm on the grid
};

/// Eigen-decomposition of b1 rho_1 - b2 rho_2 with Gaussian position uncertainty nu.
/// Throws NumericalError when halving the resolution moves a dominant eigenvalue by more than 1e-3.
DifferenceModes difference_operator_modes(double mu1, double mu2, double nu, double b1, double b2,
                                          double extent = 8.0, int points = 512);

}  // namespace nvspade
