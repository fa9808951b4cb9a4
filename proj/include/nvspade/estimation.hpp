#pragma once

#include <cstdint>
#include <vector>

#include "nvspade/measurements.hpp"
#include "nvspade/types.hpp"

namespace nvspade {

Point estimate_centroid(const Positions& di_positions);

/// DI pixel size in units of sigma.
inline constexpr double kDetectorPitch = 1.0 / 20.0;

/// DI arrivals histogrammed on a square pixel grid with edges at integer multiples of `pitch`.
/// Only nonempty pixels are stored.
struct DetectorImage {
  double pitch = kDetectorPitch;
  std::int64_t first_col = 0;
  std::int64_t first_row = 0;
  int cols = 0;
  int rows = 0;
  std::vector<int> col;  ///< relative to first_col
  std::vector<int> row;
  Vec counts;

  double photons() const { return counts.size() ? counts.sum() : 0.0; }
  bool empty() const { return col.empty(); }
};

DetectorImage bin_detector(const Positions& di_positions, double pitch = kDetectorPitch);

struct PositionFitOptions {
  int random_starts = 4;        ///< uniform draws in the disk of radius 1/2 around the centroid
  bool moment_start = true;     ///< points spread along the principal axis of the DI covariance
  bool reflection_search = true;  ///< try mirroring emitters through the sorter axes
  bool nelder_mead_polish = false;
  double gtol = 1e-9;
  int max_iterations = 2000;
  std::uint64_t seed = 0;
};

struct CalibrationEstimate {
  Point centroid = Point::Zero();
  Positions positions;
  double log_likelihood = 0.0;
  int iterations = 0;
  int starts = 0;
  bool converged = false;
  bool degenerate_restart = false;
};

/// Joint calibration log-likelihood (equal brightness) of DI pixel counts and PAD counts.
/// `pad_counts` may be fractional (e.g. expected counts). Fills `grad` (2K, ordered x1,y1,...) if non-null.
double calibration_log_likelihood(const Positions& r, const DetectorImage& image, const Vec& pad_counts,
                                  const PadSpadeConfig& pad, Vec* grad = nullptr);
/// Bins `di_positions` at kDetectorPitch first.
double calibration_log_likelihood(const Positions& r, const Positions& di_positions, const Vec& pad_counts,
                                  const PadSpadeConfig& pad, Vec* grad = nullptr);

/// Multi-start maximization of the calibration log-likelihood. `pad.origin` should already be
/// the DI centroid; pass an empty `pad_counts` for DI-only estimation.
CalibrationEstimate estimate_positions_mle(const Positions& di_positions, const Vec& pad_counts, int k,
                                           const PadSpadeConfig& pad, const PositionFitOptions& options = {});
CalibrationEstimate estimate_positions_mle(const PhotonData& data, int k, const PadSpadeConfig& pad,
                                           const PositionFitOptions& options = {});

struct SensingEstimate {
  Vec pre_estimate;
  Vec brightnesses;
  double log_likelihood = 0.0;
  bool no_di_photons = false;   ///< pre-estimate fell back to uniform
  bool bucket_only = false;     ///< every SPADE photon hit the bucket; DI-only estimate returned
  bool degenerate_design = false;  ///< YKL design Gram rank deficient; SPADE share spent on DI
};

/// argmax_b of the binned DI mixture likelihood with fixed component positions. Uniform when empty.
SensingEstimate brightness_pre_estimate(const Positions& di_positions, const Positions& r);

/// Joint YKL + DI brightness MLE. `ykl_counts` has K+1 entries (bucket last); the bucket is
/// excluded because the model assigns it zero probability at the design positions.
SensingEstimate estimate_brightness_mle(const Positions& di_positions, const Vec& ykl_counts, const Positions& r,
                                        const YklMeasurement& measurement);

/// Permutation p minimizing sum_k |r_true(k) - r_est(p[k])|.
std::vector<int> align_permutation(const Positions& r_true, const Positions& r_est);
Positions apply_permutation(const Positions& r, const std::vector<int>& perm);
Vec apply_permutation(const Vec& b, const std::vector<int>& perm);

/// Mean Euclidean error normalized by the true minimum separation.
double localization_error(const Positions& r_true, const Positions& r_est);
/// Total-variation distance.
double brightness_error(const Vec& b_true, const Vec& b_est);

struct ErrorCorrelation {
  double pearson = 0.0;
  double slope = 0.0;
};

/// Pearson coefficient and least-squares slope of eps_b on eps_r.
ErrorCorrelation error_correlation(const std::vector<double>& eps_r, const std::vector<double>& eps_b);

}  // namespace nvspade
