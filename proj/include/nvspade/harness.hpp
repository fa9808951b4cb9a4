#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "nvspade/bayes.hpp"
#include "nvspade/measurements.hpp"
#include "nvspade/protocol.hpp"
#include "nvspade/sensing_models.hpp"
#include "nvspade/types.hpp"

namespace nvspade {

enum class ExperimentKind { Scene, Calibration, Protocol, Odmr, Rabi, MonteCarlo, Fisher, Bayes, YklModes };

const char* to_string(ExperimentKind kind);
ExperimentKind experiment_kind_from_string(const std::string& name);

/// Explicit emitters, or a random scene with k emitters at minimum separation d_min (units of sigma).
struct SceneConfig {
  Positions positions;  ///< empty means generated
  Vec brightnesses;     ///< sensing state for `protocol`; empty means a random draw
  int k = 4;
  double d_min = 0.125;
};

struct BudgetConfig {
  std::int64_t m = 100'000;
  std::int64_t m1 = 10'000;
  std::int64_t n = 100'000;
  std::int64_t n1 = -1;  ///< negative selects ceil(sqrt(n))

  std::int64_t sensing_di() const;
};

struct SweepConfig {
  double gamma_min = -5.0;
  double gamma_max = 5.0;
  int gamma_points = 41;

  Vec gammas() const;
};

/// Per-emitter field values drawn uniformly from [phi_min, phi_max].
struct FieldConfig {
  double chi = 0.5;
  double phi_min = 1.0;
  double phi_max = 3.0;
};

struct MonteCarloConfig {
  std::vector<int> k_values{3, 4, 5};
  std::vector<double> d_min_values{1.0 / 16.0, 1.0 / 10.0};
  int trials = 100;  ///< per d_min bin; K cycles through k_values
};

struct FisherConfig {
  double s_min = 0.01;
  double s_max = 1.0;
  int s_points = 50;
  std::vector<double> kappas{0.0};
  std::vector<double> misalignments{0.0};  ///< x0 relative to the sorter axis
  double di_spacing = 1.0 / 20.0;
};

enum class SwitchRule { TypeI, TypeII };

struct BayesConfig {
  double s = 0.25;  ///< half-separation
  double kappa = 0.2;
  double x0 = 0.0;
  SwitchRule rule = SwitchRule::TypeII;
  double zeta = 2.0;
  std::int64_t calibration_budget = 10'000;  ///< Type II total M
  std::int64_t check_interval = 100;         ///< Type I DI batch
  std::int64_t di_cap = 1'000'000;           ///< Type I DI limit
  std::int64_t spade_photons = 10'000;       ///< Type I B-SPADE photons after the switch
  int spade_updates = 10;
  std::int64_t sensing_photons = 10'000;
  std::int64_t sensing_di = 1'000;
  BayesGrids grids;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Protocol;
  std::uint64_t seed = 0;
  SceneConfig scene;
  BudgetConfig budgets;
  int pad_order = 10;
  YklOptions ykl;
  int random_starts = 4;
  bool baseline_only = false;  ///< DI pipeline only
  int threads = 1;
  SweepConfig odmr_sweep{-5.0, 5.0, 41};
  SweepConfig rabi_sweep{0.0, 2.0 * M_PI, 41};
  FieldConfig odmr{0.5, 1.0, 3.0};
  FieldConfig rabi{0.5, 1.1, 2.0};
  MonteCarloConfig monte_carlo;
  FisherConfig fisher;
  BayesConfig bayes;
  GridSpec grid{Point::Zero(), 3.0, 1.0 / 16.0};

  /// Throws ConfigError.
  void validate() const;
  PipelineSettings pipeline() const;
};

/// Result of one pipeline inside a protocol run. Positions and brightnesses are permuted to the truth.
struct PipelineResult {
  std::string name;
  Positions positions;
  std::vector<int> permutation;
  double eps_r = 0.0;
  Mat brightnesses;  ///< rows = modulation points
  Vec eps_b;
  Vec spade_photons;
  Vec di_photons;
  Mat intensities;   ///< I_hat rows = modulation points
  std::vector<EmitterFit> fits;
  double field_rmse = 0.0;
};

struct ProtocolResult {
  ExperimentKind kind = ExperimentKind::Protocol;
  std::uint64_t seed = 0;
  std::string config_hash;
  double wall_clock = 0.0;  ///< seconds
  Positions truth;
  Vec gammas;
  Mat true_brightnesses;
  Vec phi_true;
  std::vector<PipelineResult> pipelines;  ///< "spade" first when present, then "di"

  const PipelineResult& pipeline(const std::string& name) const;
};

Positions scene_from_config(const ExperimentConfig& config);
ProtocolResult run_protocol(const ExperimentConfig& config);

struct MonteCarloRow {
  int trial = 0;
  int k = 0;
  double d_min = 0.0;
  std::string pipeline;
  double eps_r = 0.0;
  double eps_b = 0.0;
  std::uint64_t seed = 0;
};

struct MonteCarloSummary {
  double d_min = 0.0;
  std::string pipeline;
  int trials = 0;
  double mean_eps_r = 0.0;
  double sem_eps_r = 0.0;
  double mean_eps_b = 0.0;
  double sem_eps_b = 0.0;
  ErrorCorrelation correlation;
};

struct MonteCarloResult {
  std::vector<MonteCarloRow> rows;  ///< ordered by (bin, trial, pipeline)
  std::vector<MonteCarloSummary> summary;
  std::string config_hash;
  double wall_clock = 0.0;
};

/// One trial of the Monte Carlo: random scene and brightness, both pipelines on the same states.
std::vector<MonteCarloRow> run_monte_carlo_trial(const ExperimentConfig& config, int bin, int trial);
MonteCarloResult run_monte_carlo(const ExperimentConfig& config);
std::vector<MonteCarloSummary> summarize_monte_carlo(const std::vector<MonteCarloRow>& rows);

struct FisherRow {
  double x0 = 0.0;
  double s = 0.0;
  double kappa = 0.0;
  std::string measurement;  ///< qfi, di, hg, bspade
  double f_x0 = 0.0;
  double f_s = 0.0;
  double f_kappa = 0.0;
};

std::vector<FisherRow> run_fisher_sweep(const ExperimentConfig& config);

struct BayesStep {
  std::string stage;  ///< prior, bspade, sensing-di, sensing-ykl
  std::int64_t photons = 0;
  double s_mean = 0.0;
  double s_var = 0.0;
  double kappa_mean = 0.0;
  double kappa_var = 0.0;
};

struct BayesDemoResult {
  SwitchRule rule = SwitchRule::TypeII;
  bool switched = false;
  bool flagged = false;  ///< Type I cap reached without meeting the rule
  std::int64_t di_photons = 0;
  std::int64_t spade_photons = 0;
  double switch_fraction = 0.0;  ///< M1 / M for Type II
  std::vector<double> variance_history;
  std::vector<BayesStep> trajectory;
  PosteriorGrid separation_prior;
  PosteriorGrid separation_posterior;
  PosteriorGrid kappa_di;
  PosteriorGrid kappa_posterior;
  bool kappa_flagged = false;
};

BayesDemoResult run_bayes_demo(const ExperimentConfig& config);

struct YklModeTable {
  YklMeasurement measurement;
  std::vector<ModeField> modes;
};

YklModeTable run_ykl_modes(const ExperimentConfig& config);

}  // namespace nvspade
