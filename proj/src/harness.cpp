#include "nvspade/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <thread>

#include "nvspade/information.hpp"
#include "nvspade/io.hpp"

namespace nvspade {

namespace {

struct KindName {
  ExperimentKind kind;
  const char* name;
};

constexpr KindName kKinds[] = {
    {ExperimentKind::Scene, "scene"},           {ExperimentKind::Calibration, "calibration-only"},
    {ExperimentKind::Protocol, "protocol"},     {ExperimentKind::Odmr, "odmr"},
    {ExperimentKind::Rabi, "rabi"},             {ExperimentKind::MonteCarlo, "monte-carlo"},
    {ExperimentKind::Fisher, "fisher"},         {ExperimentKind::Bayes, "bayes"},
    {ExperimentKind::YklModes, "ykl-modes"},
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool has_sensing_sweep(ExperimentKind k) { return k == ExperimentKind::Odmr || k == ExperimentKind::Rabi; }

// Runs f(i) for i in [0, n) on `threads` workers; results stay in index order.
template <class R, class F>
std::vector<R> parallel_map(int n, int threads, F f) {
  std::vector<R> out(static_cast<size_t>(n));
  std::vector<std::exception_ptr> errors(static_cast<size_t>(n));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        out[static_cast<size_t>(i)] = f(i);
      } catch (...) {
        errors[static_cast<size_t>(i)] = std::current_exception();
      }
    }
  };
  const int nt = std::max(1, std::min(threads, n));
  std::vector<std::thread> pool;
  for (int t = 1; t < nt; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

Vec draw_field(int k, const FieldConfig& f, std::uint64_t seed) {
  Rng rng = make_rng(seed, {tag(Stage::Scene), 2});
  std::uniform_real_distribution<double> unif(f.phi_min, f.phi_max);
  Vec phi(k);
  for (int j = 0; j < k; ++j) phi(j) = unif(rng);
  return phi;
}

FieldFitOptions fit_options(const ExperimentConfig& c) {
  FieldFitOptions o;
  if (c.kind == ExperimentKind::Odmr) {
    o.kind = FieldModel::Odmr;
    o.chi = c.odmr.chi;
    o.phi_min = 0.0;
    o.phi_max = std::max(std::abs(c.odmr_sweep.gamma_min), std::abs(c.odmr_sweep.gamma_max));
  } else {
    o.kind = FieldModel::Rabi;
    o.phi_min = 1.0;
    o.phi_max = 2.0 * c.rabi.phi_max;
  }
  o.grid_points = 241;
  return o;
}

}  // namespace

const char* to_string(ExperimentKind kind) {
  for (const auto& k : kKinds)
    if (k.kind == kind) return k.name;
  return "unknown";
}

ExperimentKind experiment_kind_from_string(const std::string& name) {
  for (const auto& k : kKinds)
    if (name == k.name) return k.kind;
  throw ConfigError("unknown experiment kind '" + name + "'");
}

std::int64_t BudgetConfig::sensing_di() const {
  if (n1 >= 0) return n1;
  return static_cast<std::int64_t>(std::ceil(std::sqrt(static_cast<double>(n))));
}

Vec SweepConfig::gammas() const {
  if (gamma_points == 1) return Vec::Constant(1, gamma_min);
  return Vec::LinSpaced(gamma_points, gamma_min, gamma_max);
}

void ExperimentConfig::validate() const {
  if (budgets.m < 0 || budgets.m1 < 0 || budgets.n < 0) throw ConfigError("budgets must be nonnegative");
  if (budgets.m1 > budgets.m) throw ConfigError("M1 must not exceed M");
  if (budgets.sensing_di() > budgets.n) throw ConfigError("N1 must not exceed N");
  if (pad_order < 0) throw ConfigError("PAD order must be nonnegative");
  if (threads < 1) throw ConfigError("threads must be positive");
  if (random_starts < 0) throw ConfigError("random_starts must be nonnegative");
  if (ykl.restarts < 0 || ykl.max_iterations < 1 || !(ykl.tol > 0.0)) throw ConfigError("bad YKL solver settings");
  if (scene.positions.rows() == 0) {
    if (scene.k < 2) throw ConfigError("generated scenes need k >= 2");
    if (!(scene.d_min > 0.0 && scene.d_min < 1.0)) throw ConfigError("d_min must lie in (0, 1) sigma");
  }
  if (scene.brightnesses.size() != 0 && scene.positions.rows() != 0 &&
      scene.brightnesses.size() != scene.positions.rows())
    throw ConfigError("one brightness per emitter");
  for (const auto* sw : {&odmr_sweep, &rabi_sweep})
    if (sw->gamma_points < 1 || sw->gamma_max < sw->gamma_min) throw ConfigError("bad modulation sweep");
  if (!(odmr.chi > 0.0 && odmr.chi < 1.0)) throw ConfigError("chi must lie in (0, 1)");
  if (odmr.phi_max < odmr.phi_min || rabi.phi_max < rabi.phi_min) throw ConfigError("bad field range");
  if (rabi.phi_min < 1.0) throw ConfigError("Rabi field values must be >= 1");
  if (monte_carlo.trials < 2) throw ConfigError("monte-carlo needs at least two trials");
  if (monte_carlo.k_values.empty() || monte_carlo.d_min_values.empty()) throw ConfigError("empty monte-carlo grid");
  if (fisher.s_points < 1 || !(fisher.s_min > 0.0) || fisher.s_max < fisher.s_min) throw ConfigError("bad s sweep");
  for (double k : fisher.kappas)
    if (!(std::abs(k) < 0.5)) throw ConfigError("kappa must lie in (-1/2, 1/2)");
  if (!(bayes.s > 0.0) || !(std::abs(bayes.kappa) < 0.5)) throw ConfigError("bad Bayes scene");
  if (bayes.calibration_budget < 2 || bayes.check_interval < 1 || bayes.di_cap < 2 || bayes.spade_photons < 0 ||
      bayes.spade_updates < 1 || bayes.sensing_di < 0 || bayes.sensing_di > bayes.sensing_photons)
    throw ConfigError("bad Bayes budgets");
  if (!(grid.extent > 0.0 && grid.spacing > 0.0)) throw ConfigError("bad render grid");
}

PipelineSettings ExperimentConfig::pipeline() const {
  PipelineSettings s;
  s.pad_order = pad_order;
  s.ykl = ykl;
  s.fit.random_starts = random_starts;
  return s;
}

const PipelineResult& ProtocolResult::pipeline(const std::string& name) const {
  for (const auto& p : pipelines)
    if (p.name == name) return p;
  throw InvalidArgument("no pipeline named " + name);
}

Positions scene_from_config(const ExperimentConfig& c) {
  if (c.scene.positions.rows() > 0) return c.scene.positions;
  return generate_random_scene(c.scene.k, c.scene.d_min, c.seed);
}

ProtocolResult run_protocol(const ExperimentConfig& c) {
  c.validate();
  const auto t0 = std::chrono::steady_clock::now();
  if (c.budgets.m == 0 || (c.kind != ExperimentKind::Calibration && c.budgets.n == 0))
    throw InvalidArgument("photon budgets must be positive");
  ProtocolResult res;
  res.kind = c.kind;
  res.seed = c.seed;
  res.config_hash = config_hash(c);
  res.truth = scene_from_config(c);
  const int k = static_cast<int>(res.truth.rows());
  const PipelineSettings settings = c.pipeline();
  const StreamKey key{c.seed, 0};

  // sensing states
  FieldModel model = FieldModel::Odmr;
  double chi = c.odmr.chi;
  if (c.kind == ExperimentKind::Odmr) {
    res.gammas = c.odmr_sweep.gammas();
    res.phi_true = draw_field(k, c.odmr, c.seed);
  } else if (c.kind == ExperimentKind::Rabi) {
    model = FieldModel::Rabi;
    res.gammas = c.rabi_sweep.gammas();
    res.phi_true = draw_field(k, c.rabi, c.seed);
  } else if (c.kind == ExperimentKind::Protocol) {
    res.gammas = Vec::Zero(1);
  } else if (c.kind != ExperimentKind::Calibration) {
    throw InvalidArgument("run_protocol handles calibration-only, protocol, odmr and rabi");
  }
  const auto ng = res.gammas.size();
  res.true_brightnesses.resize(ng, k);
  Vec n_total(ng), n_di(ng);
  for (Eigen::Index g = 0; g < ng; ++g) {
    if (c.kind == ExperimentKind::Protocol) {
      Vec b = c.scene.brightnesses;
      if (b.size() == 0) {
        Rng rng = make_rng(c.seed, {tag(Stage::Scene), 1});
        b = random_brightnesses(k, rng);
      }
      check_open_simplex(b, 1e-9);
      res.true_brightnesses.row(g) = (b / b.sum()).transpose();
      n_total(g) = static_cast<double>(c.budgets.n);
      n_di(g) = static_cast<double>(c.budgets.sensing_di());
      continue;
    }
    Vec intensity(k);
    for (int j = 0; j < k; ++j) intensity(j) = model_intensity(model, res.gammas(g), res.phi_true(j), chi);
    res.true_brightnesses.row(g) = brightness_from_intensities(intensity).transpose();
    // photon flux follows the total intensity; the brightest possible ensemble emits N copies
    const double f = intensity.sum() / k;
    n_total(g) = std::round(static_cast<double>(c.budgets.n) * f);
    n_di(g) = std::min(n_total(g), std::round(static_cast<double>(c.budgets.sensing_di()) * f));
    if (n_total(g) < 1.0) throw InvalidArgument("modulation point with no photons; raise N");
  }

  std::vector<std::string> names;
  if (!c.baseline_only) names.push_back("spade");
  names.push_back("di");
  for (const auto& name : names) {
    const bool di_only = name == "di";
    PipelineResult p;
    p.name = name;
    const StageBudget cal{c.budgets.m, di_only ? c.budgets.m : c.budgets.m1};
    const CalibrationOutcome co = run_calibration(res.truth, cal, settings, key);
    p.permutation = align_permutation(res.truth, co.estimate.positions);
    p.positions = apply_permutation(co.estimate.positions, p.permutation);
    p.eps_r = localization_error(res.truth, p.positions);
    if (c.kind != ExperimentKind::Calibration) {
      p.brightnesses.resize(ng, k);
      p.intensities.resize(ng, k);
      p.eps_b.resize(ng);
      p.spade_photons.resize(ng);
      p.di_photons.resize(ng);
      for (Eigen::Index g = 0; g < ng; ++g) {
        const auto nt = static_cast<std::int64_t>(n_total(g));
        const StageBudget sb{nt, di_only ? nt : static_cast<std::int64_t>(n_di(g))};
        const EmitterEnsemble state(res.truth, res.true_brightnesses.row(g).transpose());
        const SensingOutcome so = run_sensing(state, co.estimate.positions, sb, settings, key,
                                              static_cast<std::uint64_t>(g));
        const Vec b = apply_permutation(so.estimate.brightnesses, p.permutation);
        p.brightnesses.row(g) = b.transpose();
        p.eps_b(g) = brightness_error(res.true_brightnesses.row(g).transpose(), b);
        p.spade_photons(g) = static_cast<double>(sb.spade());
        p.di_photons(g) = static_cast<double>(sb.di);
        const double photons = sb.spade() > 0 ? static_cast<double>(sb.spade()) : static_cast<double>(nt);
        p.intensities.row(g) = photons * b.transpose();
      }
      if (has_sensing_sweep(c.kind)) {
        p.fits = fit_field(res.gammas, p.intensities, fit_options(c));
        p.field_rmse = field_rmse(res.phi_true, p.fits);
      }
    }
    res.pipelines.push_back(std::move(p));
  }
  res.wall_clock = seconds_since(t0);
  return res;
}

std::vector<MonteCarloRow> run_monte_carlo_trial(const ExperimentConfig& c, int bin, int trial) {
  const auto& mc = c.monte_carlo;
  const std::uint64_t seed =
      stream_seed(c.seed, {static_cast<std::uint64_t>(bin), static_cast<std::uint64_t>(trial)});
  const int k = mc.k_values[static_cast<size_t>(trial) % mc.k_values.size()];
  const double d_min = mc.d_min_values[static_cast<size_t>(bin)];
  const Positions truth = generate_random_scene(k, d_min, seed);
  Rng brng = make_rng(seed, {tag(Stage::Scene), 1});
  const EmitterEnsemble state(truth, random_brightnesses(k, brng));
  const PipelineSettings settings = c.pipeline();
  const StreamKey key{seed, 0};

  std::vector<MonteCarloRow> rows;
  for (const char* name : {"spade", "di"}) {
    const bool di_only = std::string(name) == "di";
    if (!di_only && c.baseline_only) continue;
    const StageBudget cal{c.budgets.m, di_only ? c.budgets.m : c.budgets.m1};
    const StageBudget sen{c.budgets.n, di_only ? c.budgets.n : c.budgets.sensing_di()};
    const CalibrationOutcome co = run_calibration(truth, cal, settings, key);
    const SensingOutcome so = run_sensing(state, co.estimate.positions, sen, settings, key, 0);
    const auto perm = align_permutation(truth, co.estimate.positions);
    MonteCarloRow r;
    r.trial = trial;
    r.k = k;
    r.d_min = d_min;
    r.pipeline = name;
    r.eps_r = localization_error(truth, apply_permutation(co.estimate.positions, perm));
    r.eps_b = brightness_error(state.brightnesses(), apply_permutation(so.estimate.brightnesses, perm));
    r.seed = seed;
    rows.push_back(r);
  }
  return rows;
}

std::vector<MonteCarloSummary> summarize_monte_carlo(const std::vector<MonteCarloRow>& rows) {
  std::vector<MonteCarloSummary> out;
  std::vector<std::pair<double, std::string>> groups;
  for (const auto& r : rows) {
    const std::pair<double, std::string> g{r.d_min, r.pipeline};
    if (std::find(groups.begin(), groups.end(), g) == groups.end()) groups.push_back(g);
  }
  auto mean_sem = [](const std::vector<double>& v, double& mean, double& sem) {
    const double n = static_cast<double>(v.size());
    mean = 0.0;
    for (double x : v) mean += x;
    mean /= n;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    sem = v.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
  };
  for (const auto& [d, name] : groups) {
    std::vector<double> er, eb;
    for (const auto& r : rows)
      if (r.d_min == d && r.pipeline == name) {
        er.push_back(r.eps_r);
        eb.push_back(r.eps_b);
      }
    MonteCarloSummary s;
    s.d_min = d;
    s.pipeline = name;
    s.trials = static_cast<int>(er.size());
    mean_sem(er, s.mean_eps_r, s.sem_eps_r);
    mean_sem(eb, s.mean_eps_b, s.sem_eps_b);
    if (er.size() >= 2) s.correlation = error_correlation(er, eb);
    out.push_back(s);
  }
  return out;
}

MonteCarloResult run_monte_carlo(const ExperimentConfig& c) {
  c.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const int bins = static_cast<int>(c.monte_carlo.d_min_values.size());
  const int trials = c.monte_carlo.trials;
  const auto per_trial = parallel_map<std::vector<MonteCarloRow>>(
      bins * trials, c.threads, [&](int i) { return run_monte_carlo_trial(c, i / trials, i % trials); });
  MonteCarloResult res;
  for (const auto& t : per_trial) res.rows.insert(res.rows.end(), t.begin(), t.end());
  res.summary = summarize_monte_carlo(res.rows);
  res.config_hash = config_hash(c);
  res.wall_clock = seconds_since(t0);
  return res;
}

std::vector<FisherRow> run_fisher_sweep(const ExperimentConfig& c) {
  c.validate();
  const auto& f = c.fisher;
  const Vec s_grid = f.s_points == 1 ? Vec(Vec::Constant(1, f.s_min)) : Vec(Vec::LinSpaced(f.s_points, f.s_min, f.s_max));
  PadSpadeConfig hg;
  hg.max_total_order = c.pad_order;
  const OutcomeModel hg_model = hg_two_source_model(hg);
  const OutcomeModel bs_model = bspade_two_source_model();
  const auto& labels = two_source_labels();

  struct Point3 {
    double x0, s, kappa;
  };
  std::vector<Point3> points;
  for (double x0 : f.misalignments)
    for (double kappa : f.kappas)
      for (Eigen::Index i = 0; i < s_grid.size(); ++i) points.push_back({x0, s_grid(i), kappa});

  const auto blocks = parallel_map<std::vector<FisherRow>>(static_cast<int>(points.size()), c.threads, [&](int i) {
    const auto& pt = points[static_cast<size_t>(i)];
    TwoSourceParams p{pt.x0, pt.s, pt.kappa, 1.0};
    const Vec theta = Eigen::Vector3d(pt.x0, pt.s, pt.kappa);
    std::vector<FisherRow> rows;
    auto add = [&](const char* name, const FisherMatrix& m) {
      rows.push_back({pt.x0, pt.s, pt.kappa, name, m.values(0, 0), m.values(1, 1), m.values(2, 2)});
    };
    add("qfi", qfim_two_source(p));
    add("di", cfim(di_two_source_model(theta, f.di_spacing), theta, labels));
    add("hg", cfim(hg_model, theta, labels));
    add("bspade", cfim(bs_model, theta, labels));
    return rows;
  });
  std::vector<FisherRow> out;
  for (const auto& b : blocks) out.insert(out.end(), b.begin(), b.end());
  return out;
}

namespace {

Vec sample_pair_1d(double x0, double s, double kappa, std::int64_t n, Rng& rng) {
  const double b2 = 0.5 + kappa;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec x(n);
  for (std::int64_t i = 0; i < n; ++i) {
    const double c = unif(rng) < b2 ? x0 + s : x0 - s;
    x(i) = c + normal(rng);
  }
  return x;
}

Vec append(const Vec& a, const Vec& b) {
  Vec out(a.size() + b.size());
  out << a, b;
  return out;
}

}  // namespace

BayesDemoResult run_bayes_demo(const ExperimentConfig& c) {
  c.validate();
  const auto& bc = c.bayes;
  BayesDemoResult res;
  res.rule = bc.rule;
  Rng di_rng = make_rng(c.seed, {tag(Stage::Bayes), 1});
  Rng sp_rng = make_rng(c.seed, {tag(Stage::Bayes), 2});
  Rng sen_rng = make_rng(c.seed, {tag(Stage::Bayes), 3});
  Rng ykl_rng = make_rng(c.seed, {tag(Stage::Bayes), 4});

  // calibration: equal brightness
  Vec samples;
  std::int64_t m2 = 0;
  if (bc.rule == SwitchRule::TypeI) {
    while (samples.size() < bc.di_cap) {
      const std::int64_t step = std::min<std::int64_t>(bc.check_interval, bc.di_cap - samples.size());
      samples = append(samples, sample_pair_1d(bc.x0, bc.s, 0.0, step, di_rng));
      if (samples.size() >= 2 && switch_type1(samples, bc.zeta)) {
        res.switched = true;
        break;
      }
    }
    res.flagged = !res.switched;
    m2 = bc.spade_photons;
  } else {
    const std::int64_t budget = bc.calibration_budget;
    const std::int64_t step = std::max<std::int64_t>(1, budget / 100);
    while (samples.size() < budget) {
      samples = append(samples, sample_pair_1d(bc.x0, bc.s, 0.0, std::min(step, budget - samples.size()), di_rng));
      if (samples.size() < 2) continue;
      if (switch_type2(res.variance_history, samples, budget - samples.size(), bc.grids)) {
        res.switched = true;
        break;
      }
    }
    m2 = budget - samples.size();
    res.switch_fraction = static_cast<double>(samples.size()) / static_cast<double>(budget);
  }
  res.di_photons = samples.size();
  res.spade_photons = m2;

  const PriorSet prior = build_priors_from_di(samples, bc.grids);
  res.separation_prior = prior.separation;
  auto record = [&](const char* stage, std::int64_t photons, const PosteriorGrid& s, const PosteriorGrid& k) {
    res.trajectory.push_back({stage, photons, s.mean(), s.variance(), k.mean(), k.variance()});
  };
  record("prior", res.di_photons, prior.separation, prior.kappa);

  SeparationPosterior post(prior);
  const double eps_true = bc.x0 - prior.x0_hat;
  const double xi = bspade_xi(bc.s, eps_true);
  std::int64_t spent = res.di_photons;
  for (int u = 0; u < bc.spade_updates && m2 > 0; ++u) {
    const std::int64_t chunk = m2 / bc.spade_updates + (u < m2 % bc.spade_updates ? 1 : 0);
    if (chunk == 0) continue;
    std::binomial_distribution<std::int64_t> binom(chunk, xi);
    post.update(binom(sp_rng), chunk);
    spent += chunk;
    record("bspade", spent, post.marginal(), prior.kappa);
  }
  res.separation_posterior = post.marginal();

  // sensing
  const Vec x_sense = sample_pair_1d(bc.x0, bc.s, bc.kappa, bc.sensing_di, sen_rng);
  const BrightnessPosterior bp = brightness_posterior(x_sense, prior.x0_hat, post, bc.grids);
  res.kappa_di = bp.kappa;
  res.kappa_flagged = bp.flagged;
  record("sensing-di", bc.sensing_di, res.separation_posterior, bp.kappa);

  res.kappa_posterior = bp.kappa;
  const std::int64_t n2 = bc.sensing_photons - bc.sensing_di;
  if (n2 > 0) {
    const double s_hat = std::max(res.separation_posterior.mean(), 1e-3);
    const double k_hat = std::clamp(bp.kappa_mmse, -0.45, 0.45);
    Positions design(2, 2);
    design << prior.x0_hat - s_hat, 0.0, prior.x0_hat + s_hat, 0.0;
    const Vec priors = Eigen::Vector2d(0.5 - k_hat, 0.5 + k_hat);
    YklOptions yo = c.ykl;
    yo.seed = stream_seed(c.seed, {tag(Stage::Ykl)});
    const YklMeasurement m = build_ykl_measurement(design, priors, yo);
    Positions truth(2, 2);
    truth << bc.x0 - bc.s, 0.0, bc.x0 + bc.s, 0.0;
    const EmitterEnsemble state(truth, Eigen::Vector2d(0.5 - bc.kappa, 0.5 + bc.kappa));
    const Counts counts = sample_multinomial(ykl_outcome_probabilities(m, state), n2, ykl_rng);
    const Mat p = ykl_overlap_matrix(m, design);
    const Vec& kg = bp.kappa.grid;
    Vec logd(kg.size());
    for (Eigen::Index i = 0; i < kg.size(); ++i) {
      double l = bp.kappa.density(i) > 0.0 ? std::log(bp.kappa.density(i)) : -INFINITY;
      for (int o = 0; o < 2; ++o) {
        const double q = p(o, 0) * (0.5 - kg(i)) + p(o, 1) * (0.5 + kg(i));
        if (counts(o) > 0) l += static_cast<double>(counts(o)) * std::log(std::max(q, 1e-300));
      }
      logd(i) = l;
    }
    const double mx = logd.maxCoeff();
    Vec d = (logd.array() - mx).exp();
    res.kappa_posterior.density = d / trapezoid(d, kg(1) - kg(0));
    res.kappa_posterior.normalization = 1.0;
  }
  record("sensing-ykl", bc.sensing_photons, res.separation_posterior, res.kappa_posterior);
  return res;
}

YklModeTable run_ykl_modes(const ExperimentConfig& c) {
  c.validate();
  const Positions r = scene_from_config(c);
  Vec b = c.scene.brightnesses;
  if (b.size() == 0) {
    Rng rng = make_rng(c.seed, {tag(Stage::Scene), 1});
    b = random_brightnesses(static_cast<int>(r.rows()), rng);
  }
  YklModeTable t;
  YklOptions yo = c.ykl;
  yo.seed = stream_seed(c.seed, {tag(Stage::Ykl)});
  t.measurement = build_ykl_measurement(r, b / b.sum(), yo);
  for (int k = 0; k < t.measurement.size(); ++k) t.modes.push_back(render_ykl_mode(t.measurement, k, c.grid));
  return t;
}

}  // namespace nvspade
