#pragma once

#include <functional>
#include <string>
#include <vector>

#include "nvspade/measurements.hpp"
#include "nvspade/scene.hpp"
#include "nvspade/types.hpp"

namespace nvspade {

/// Two sources at x0 -/+ s on the x axis with brightnesses 1/2 -/+ kappa.
struct TwoSourceParams {
  double x0 = 0.0;
  double s = 0.5;
  double kappa = 0.0;
  double sigma = 1.0;

  /// <psi(x1)|psi(x2)> = exp(-(s/sigma)^2 / 2)
  double overlap() const;
  void validate() const;
  EmitterEnsemble ensemble() const;
};

struct FisherMatrix {
  enum class Kind { Quantum, Classical };

  Mat values;
  std::vector<std::string> labels;
  Kind kind = Kind::Quantum;

  int index_of(const std::string& label) const;
};

/// Closed-form QFIM over (x0, s, kappa).
FisherMatrix qfim_two_source(const TwoSourceParams& p);

/// SLD of the brightness bias in the e+/e- basis of helstrom_binary.
struct SldResult {
  Eigen::Matrix2d sld;
  Eigen::Matrix2d rho;
  Eigen::Matrix2d drho;          ///< d rho / d kappa
  Eigen::Matrix2d eigenvectors;  ///< column k detects state k
  Eigen::Vector2d eigenvalues;
};

SldResult sld_brightness_two_source(const TwoSourceParams& p);

/// Brightness QFIM in the chart (b_1..b_{K-1}), b_K = 1 - sum.
FisherMatrix qfim_brightness_block(const EigenbasisRep& rep);

/// SLDs of the brightness block, one per free parameter, in the eigenbasis.
std::vector<CMat> brightness_slds(const EigenbasisRep& rep);

/// tr(Q_bb^{-1})
double brightness_imprecision(const Mat& qfim_bb);

using OutcomeModel = std::function<Vec(const Vec& theta)>;

/// Classical Fisher information by central differences. Outcomes with p < 1e-14 at theta are skipped.
FisherMatrix cfim(const OutcomeModel& model, const Vec& theta, const std::vector<std::string>& labels,
                  double step = 1e-5);

/// Outcome models over theta = (x0, s, kappa). The DI model bins the image plane on a fixed
/// grid of half-width 6 + |x0| + s (taken at theta0, units of sigma) with the given spacing.
OutcomeModel di_two_source_model(const Vec& theta0, double spacing = 1.0 / 20.0);
OutcomeModel hg_two_source_model(const PadSpadeConfig& config);
/// PSF mode plus complement.
OutcomeModel bspade_two_source_model(const Point& origin = Point::Zero());

const std::vector<std::string>& two_source_labels();

/// [Q_bb - Q_br Q_rr^{-1} Q_rb]^{-1} for the target labels.
Mat nuisance_qcrb(const FisherMatrix& fisher, const std::vector<std::string>& targets);

/// nu^2 b^4 - 2 nu b^2 - 2 (1 - nu) b + 1 with nu = 4 kappa^2.
double allocation_quartic(double beta, double kappa);
/// Unique root of allocation_quartic in [0, 1].
double optimal_allocation(double kappa);

/// Closed-form brightness bound for the calibration/sensing split; beta is the variable of that formula.
double allocated_brightness_qcrb(const TwoSourceParams& p, double beta, double total_photons);
double allocated_brightness_qcrb_subdiffraction(const TwoSourceParams& p, double beta, double total_photons);

}  // namespace nvspade
