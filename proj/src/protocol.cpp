#include "nvspade/protocol.hpp"

#include <cmath>
#include <string>

namespace nvspade {

void StageBudget::validate(const char* stage) const {
  if (total <= 0) throw InvalidArgument(std::string(stage) + ": photon budget must be positive");
  if (di < 0 || di > total) throw InvalidArgument(std::string(stage) + ": DI share must lie in [0, total]");
}

Positions generate_random_scene(int k, double d_min, std::uint64_t seed, std::int64_t max_draws) {
  if (k < 2) throw InvalidArgument("random scenes need at least two emitters");
  if (!(d_min > 0.0 && d_min < 1.0)) throw InvalidArgument("d_min must lie in (0, sigma)");
  Rng rng = make_rng(seed, {tag(Stage::Scene)});
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Positions r(k, 2);
  for (std::int64_t draw = 0; draw < max_draws; ++draw) {
    for (int j = 0; j < k; ++j) {
      const double rad = 0.5 * std::sqrt(unif(rng));
      const double ang = 2.0 * M_PI * unif(rng);
      r(j, 0) = rad * std::cos(ang);
      r(j, 1) = rad * std::sin(ang);
    }
    const double d = min_pairwise_separation(r);
    if (d < d_min || d > 1.05 * d_min) continue;
    const Positions c = r.rowwise() - r.colwise().mean();
    if ((c.rowwise().norm().array() < 0.5).all()) return c;
  }
  throw InvalidArgument("scene rejection budget exceeded; packing infeasible");
}

Vec random_brightnesses(int k, Rng& rng, double floor) {
  if (floor * k >= 1.0) throw InvalidArgument("brightness floor too large");
  std::exponential_distribution<double> expo(1.0);
  Vec b(k);
  for (int j = 0; j < k; ++j) b(j) = expo(rng);
  b /= b.sum();
  // mix toward uniform only as much as needed to lift the smallest entry to the floor
  const double mn = b.minCoeff();
  if (mn < floor) {
    const double u = 1.0 / k;
    const double t = (floor - mn) / (u - mn);
    b = (1.0 - t) * b + Vec::Constant(k, t * u);
  }
  return b / b.sum();
}

CalibrationOutcome run_calibration(const Positions& truth, const StageBudget& budget, const PipelineSettings& settings,
                                   const StreamKey& key) {
  budget.validate("calibration");
  const auto k = static_cast<int>(truth.rows());
  const EmitterEnsemble state = EmitterEnsemble::uniform(truth);
  CalibrationOutcome out;
  Rng di_rng = make_rng(key.seed, {key.trial, tag(Stage::CalibrationDI)});
  const Positions di = sample_direct_imaging(state, budget.di, di_rng);
  out.pad.max_total_order = settings.pad_order;
  out.pad.origin = di.rows() > 0 ? estimate_centroid(di) : Point::Zero();
  Vec counts;
  if (budget.spade() > 0) {
    Rng sp_rng = make_rng(key.seed, {key.trial, tag(Stage::CalibrationSpade)});
    counts = sample_multinomial(pad_probabilities(state, out.pad), budget.spade(), sp_rng).cast<double>();
  }
  PositionFitOptions fit = settings.fit;
  fit.seed = stream_seed(key.seed, {key.trial, tag(Stage::Optimizer)});
  out.estimate = estimate_positions_mle(di, counts, k, out.pad, fit);
  out.di_photons = budget.di;
  out.spade_photons = budget.spade();
  return out;
}

SensingOutcome run_sensing(const EmitterEnsemble& truth, const Positions& r_hat, const StageBudget& budget,
                           const PipelineSettings& settings, const StreamKey& key, std::uint64_t index) {
  budget.validate("sensing");
  SensingOutcome out;
  Rng di_rng = make_rng(key.seed, {key.trial, tag(Stage::SensingDI), index});
  const Positions di = sample_direct_imaging(truth, budget.di, di_rng);
  out.di_photons = budget.di;
  out.spade_photons = budget.spade();
  if (budget.spade() == 0) {
    out.estimate = brightness_pre_estimate(di, r_hat);
    return out;
  }
  const SensingEstimate pre = brightness_pre_estimate(di, r_hat);
  YklOptions ykl = settings.ykl;
  ykl.seed = stream_seed(key.seed, {key.trial, tag(Stage::Ykl), index});
  YklMeasurement m;
  try {
    m = build_ykl_measurement(r_hat, pre.pre_estimate, ykl);
  } catch (const NumericalError&) {
    // estimates too clumped for a YKL design; image with the remaining photons instead
    Rng sp_rng = make_rng(key.seed, {key.trial, tag(Stage::SensingSpade), index});
    Positions all(budget.di + budget.spade(), 2);
    all.topRows(budget.di) = di;
    all.bottomRows(budget.spade()) = sample_direct_imaging(truth, budget.spade(), sp_rng);
    out.estimate = brightness_pre_estimate(all, r_hat);
    out.estimate.degenerate_design = true;
    out.di_photons = budget.di + budget.spade();
    out.spade_photons = 0;
    return out;
  }
  out.ykl_probabilities = ykl_outcome_probabilities(m, truth);
  Rng sp_rng = make_rng(key.seed, {key.trial, tag(Stage::SensingSpade), index});
  out.ykl_counts = sample_multinomial(out.ykl_probabilities, budget.spade(), sp_rng);
  out.estimate = estimate_brightness_mle(di, out.ykl_counts.cast<double>(), r_hat, m);
  return out;
}

}  // namespace nvspade
