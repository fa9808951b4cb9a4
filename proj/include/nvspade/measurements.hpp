#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "nvspade/rng.hpp"
#include "nvspade/scene.hpp"
#include "nvspade/types.hpp"

namespace nvspade {

/// Hermite-Gauss sorter aligned at `origin` (units of sigma). Modes with n+m <= max_total_order
/// are sorted; everything else lands in the bucket.
struct PadSpadeConfig {
  Point origin = Point::Zero();
  int max_total_order = 10;

  int mode_count() const { return (max_total_order + 1) * (max_total_order + 2) / 2; }
};

/// (n, m) index pairs in outcome order: total order ascending, then m ascending.
std::vector<std::array<int, 2>> pad_mode_indices(int max_total_order);

/// Raw measurement records for one stage.
struct PhotonData {
  Positions di_positions;  ///< arrival positions, units of sigma
  Counts spade_counts;     ///< per-mode counts, bucket last
  std::int64_t budget = 0;
  std::int64_t di_budget = 0;
  std::int64_t spade_budget = 0;
};

/// I.i.d. arrivals from sum_k b_k N(r_k, sigma^2 I). Positions in units of sigma.
Positions sample_direct_imaging(const EmitterEnsemble& ensemble, std::int64_t n_photons, Rng& rng);

/// Outcome probabilities of the PAD sorter, bucket last.
Vec pad_probabilities(const EmitterEnsemble& ensemble, const PadSpadeConfig& config);
Vec pad_probabilities(const Positions& positions, const Vec& brightnesses, const PadSpadeConfig& config);

/// Same, plus d p / d (x_1, y_1, ..., x_K, y_K) when `jacobian` is non-null.
Vec pad_probabilities(const Positions& positions, const Vec& brightnesses, const PadSpadeConfig& config,
                      Mat* jacobian);

Counts sample_multinomial(const Vec& probabilities, std::int64_t n, Rng& rng);

/// Two-state minimum-error measurement in the orthonormal basis
/// e+ = (psi1 + psi2)/sqrt(2(1+phi)), e- = (psi2 - psi1)/sqrt(2(1-phi)).
struct HelstromResult {
  Eigen::Matrix2d states;      ///< column k = state k in the e+/e- basis
  Eigen::Matrix2d projectors;  ///< column k = unit vector detecting state k
  double error_probability = 0.0;
};

HelstromResult helstrom_binary(double b1, double b2, double overlap);

struct YklOptions {
  int restarts = 8;
  double tol = 1e-9;
  int max_iterations = 5000;
  std::uint64_t seed = 0;
};

/// Minimum-error projective measurement onto the span of the design states.
struct YklMeasurement {
  CMat unitary;              ///< columns = measurement vectors in the design eigenbasis
  CMat psi;                  ///< design states in the same basis
  Positions design_positions;
  Vec design_priors;
  double min_error = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
  bool converged = false;

  int size() const { return static_cast<int>(unitary.cols()); }
};

/// Riemannian descent on U(K) of P_e(U) = 1 - sum_k b_k |(U^dag Psi)_kk|^2. Starts: identity,
/// the square-root measurement, then seeded random unitaries. Leaves design_positions empty.
YklMeasurement solve_ykl(const EigenbasisRep& rep, const YklOptions& options = {});

/// Builds the eigenbasis of the design states and solves. Priors are floored at 1e-4 and
/// renormalized so the design density operator stays full rank.
YklMeasurement build_ykl_measurement(const Positions& design_positions, const Vec& design_priors,
                                     const YklOptions& options = {});

/// |<upsilon_k | psi(r_j)>|^2 for every measurement vector k and emitter position r_j.
Mat ykl_overlap_matrix(const YklMeasurement& measurement, const Positions& positions);

/// Outcome probabilities (K entries, bucket last) for the true ensemble.
Vec ykl_outcome_probabilities(const YklMeasurement& measurement, const EmitterEnsemble& truth);

struct GridSpec {
  Point center = Point::Zero();
  double extent = 6.0;    ///< half-width, units of sigma
  double spacing = 1.0 / 32.0;
};

/// Complex field sampled on a square grid; values(i, j) is at (xs(j), ys(i)).
struct ModeField {
  Vec xs;
  Vec ys;
  CMat values;

  double norm() const;
};

ModeField render_hg_mode(int n, int m, const Point& origin, const GridSpec& grid);
/// Superposition sum_j c_j psi(x - r_j) of PSF states.
ModeField render_state_superposition(const CVec& coefficients, const Positions& positions, const GridSpec& grid);
/// Measurement vector k of a YKL measurement, rendered through the design states.
ModeField render_ykl_mode(const YklMeasurement& measurement, int k, const GridSpec& grid);

}  // namespace nvspade
