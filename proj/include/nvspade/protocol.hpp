#pragma once

#include <cstdint>
#include <vector>

#include "nvspade/estimation.hpp"
#include "nvspade/measurements.hpp"
#include "nvspade/scene.hpp"
#include "nvspade/types.hpp"

namespace nvspade {

/// Photons for one stage: `total` copies of the state, the first `di` go to direct imaging.
struct StageBudget {
  std::int64_t total = 0;
  std::int64_t di = 0;

  std::int64_t spade() const { return total - di; }
  void validate(const char* stage) const;
};

struct PipelineSettings {
  int pad_order = 10;
  YklOptions ykl;
  PositionFitOptions fit;
};

/// Addresses the random streams of one trial; SPADE and DI pipelines of the same trial share them,
/// so the DI photons of the SPADE pipeline are a prefix of the baseline's.
struct StreamKey {
  std::uint64_t seed = 0;
  std::uint64_t trial = 0;
};

/// Rejection sampling in the disk of radius 1/2 (units of sigma) until the minimum pairwise
/// separation lies in [d_min, 1.05 d_min]; the scene is returned centered on its geometric center.
Positions generate_random_scene(int k, double d_min, std::uint64_t seed, std::int64_t max_draws = 10'000'000);

/// Dirichlet(1, ..., 1) draw floored at `floor` and renormalized.
Vec random_brightnesses(int k, Rng& rng, double floor = 0.02);

struct CalibrationOutcome {
  CalibrationEstimate estimate;
  PadSpadeConfig pad;
  std::int64_t di_photons = 0;
  std::int64_t spade_photons = 0;
};

/// DI centroid, PAD sorter at the centroid, joint MLE. With budget.di == budget.total the PAD
/// stage is skipped and the fit is DI-only.
CalibrationOutcome run_calibration(const Positions& truth, const StageBudget& budget, const PipelineSettings& settings,
                                   const StreamKey& key);

struct SensingOutcome {
  SensingEstimate estimate;
  Vec ykl_probabilities;  ///< empty when no SPADE photons were spent
  Counts ykl_counts;
  std::int64_t di_photons = 0;
  std::int64_t spade_photons = 0;
};

/// DI pre-estimate, YKL built at (r_hat, pre-estimate), joint brightness MLE. `index` separates
/// the streams of successive modulation points.
SensingOutcome run_sensing(const EmitterEnsemble& truth, const Positions& r_hat, const StageBudget& budget,
                           const PipelineSettings& settings, const StreamKey& key, std::uint64_t index);

}  // namespace nvspade
