#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "nvspade/harness.hpp"
#include "nvspade/io.hpp"

namespace fs = std::filesystem;
using namespace nvspade;

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "nvspade_out";
  bool baseline = false;
  std::optional<int> trials;
  std::optional<int> threads;
  bool force = false;
};

ExperimentConfig resolve(const Flags& f, ExperimentKind kind) {
  ExperimentConfig c = f.config.empty() ? ExperimentConfig{} : load_config(f.config);
  c.kind = kind;
  if (f.seed) c.seed = *f.seed;
  if (f.baseline) c.baseline_only = true;
  if (f.trials) c.monte_carlo.trials = *f.trials;
  if (f.threads) c.threads = *f.threads;
  c.validate();
  return c;
}

void run(const Flags& f, ExperimentKind kind) {
  const ExperimentConfig c = resolve(f, kind);
  const fs::path out = f.out;
  const std::string hash = config_hash(c);
  prepare_output_dir(out, hash, f.force);

  std::string summary = "{}";
  switch (kind) {
    case ExperimentKind::Scene: {
      const Positions r = scene_from_config(c);
      scene_table(r, c.scene.brightnesses).write(out / "scene.csv");
      std::printf("scene: %d emitters, d_min %.6g sigma\n", static_cast<int>(r.rows()), min_pairwise_separation(r));
      break;
    }
    case ExperimentKind::Calibration:
    case ExperimentKind::Protocol:
    case ExperimentKind::Odmr:
    case ExperimentKind::Rabi: {
      const ProtocolResult res = run_protocol(c);
      positions_table(res).write(out / "positions.csv");
      metrics_table(res).write(out / "metrics.csv");
      if (kind != ExperimentKind::Calibration) brightness_table(res).write(out / "brightness.csv");
      if (kind == ExperimentKind::Odmr || kind == ExperimentKind::Rabi) {
        const FieldModel model = kind == ExperimentKind::Odmr ? FieldModel::Odmr : FieldModel::Rabi;
        trace_table(res, model, c.odmr.chi).write(out / "trace.csv");
        field_fit_table(res).write(out / "fits.csv");
      }
      summary = protocol_summary_json(res);
      for (const auto& p : res.pipelines) {
        std::printf("%-5s eps_r %.4g", p.name.c_str(), p.eps_r);
        if (p.eps_b.size()) std::printf("  mean eps_b %.4g", p.eps_b.mean());
        if (!p.fits.empty()) std::printf("  phi rmse %.4g", p.field_rmse);
        std::printf("\n");
      }
      std::fprintf(stderr, "wall clock %.2f s\n", res.wall_clock);
      break;
    }
    case ExperimentKind::MonteCarlo: {
      const MonteCarloResult res = run_monte_carlo(c);
      monte_carlo_table(res).write(out / "monte_carlo.csv");
      monte_carlo_summary_table(res).write(out / "summary.csv");
      summary = monte_carlo_summary_json(res);
      for (const auto& s : res.summary)
        std::printf("d_min %.4g %-5s eps_r %.4g +- %.2g  eps_b %.4g +- %.2g  pearson %.3f\n", s.d_min,
                    s.pipeline.c_str(), s.mean_eps_r, s.sem_eps_r, s.mean_eps_b, s.sem_eps_b, s.correlation.pearson);
      std::fprintf(stderr, "wall clock %.2f s\n", res.wall_clock);
      break;
    }
    case ExperimentKind::Fisher: {
      const auto rows = run_fisher_sweep(c);
      fisher_table(rows).write(out / "fisher.csv");
      std::printf("fisher: %zu rows\n", rows.size());
      break;
    }
    case ExperimentKind::Bayes: {
      const BayesDemoResult res = run_bayes_demo(c);
      bayes_trajectory_table(res).write(out / "trajectory.csv");
      posterior_table({"prior", "posterior"}, {&res.separation_prior, &res.separation_posterior})
          .write(out / "posterior_s.csv");
      posterior_table({"di", "posterior"}, {&res.kappa_di, &res.kappa_posterior}).write(out / "posterior_kappa.csv");
      summary = bayes_summary_json(res);
      std::printf("switched %d at %lld DI photons, s_mmse %.4g, kappa_mmse %.4g%s\n", res.switched ? 1 : 0,
                  static_cast<long long>(res.di_photons), res.separation_posterior.mean(), res.kappa_posterior.mean(),
                  res.flagged ? " (cap reached)" : "");
      break;
    }
    case ExperimentKind::YklModes: {
      const YklModeTable t = run_ykl_modes(c);
      ykl_modes_table(t).write(out / "ykl_modes.csv");
      std::printf("ykl: %d modes, P_e %.6g\n", t.measurement.size(), t.measurement.min_error);
      break;
    }
  }
  write_manifest(out, c, summary);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sub-diffraction emitter sensing with mode sorting"};
  app.require_subcommand(1);
  Flags flags;
  struct Command {
    const char* name;
    ExperimentKind kind;
    const char* help;
  };
  const Command commands[] = {
      {"scene", ExperimentKind::Scene, "draw a random emitter scene"},
      {"protocol", ExperimentKind::Protocol, "calibration and one sensing step, SPADE vs DI"},
      {"monte-carlo", ExperimentKind::MonteCarlo, "localization/brightness errors over many scenes"},
      {"odmr", ExperimentKind::Odmr, "CW-ODMR sweep and per-emitter field fits"},
      {"rabi", ExperimentKind::Rabi, "Rabi sweep and per-emitter field fits"},
      {"fisher", ExperimentKind::Fisher, "two-source QFI and CFI curves"},
      {"bayes", ExperimentKind::Bayes, "sequential Bayesian two-emitter demo"},
      {"ykl-modes", ExperimentKind::YklModes, "render YKL measurement modes on a grid"},
  };
  std::optional<ExperimentKind> chosen;
  bool calibration_only = false;
  for (const auto& [name, kind, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", flags.config, "JSON experiment description")->check(CLI::ExistingFile);
    sub->add_option("--seed", flags.seed, "master seed");
    sub->add_option("--out", flags.out, "output directory");
    sub->add_flag("--baseline", flags.baseline, "DI pipeline only");
    sub->add_option("--trials", flags.trials, "Monte Carlo trials per bin");
    sub->add_option("--threads", flags.threads, "worker threads");
    sub->add_flag("--force", flags.force, "overwrite results of a different config");
    if (kind == ExperimentKind::Protocol) sub->add_flag("--calibration-only", calibration_only, "skip sensing");
    sub->callback([&chosen, kind = kind] { chosen = kind; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    ExperimentKind kind = *chosen;
    if (kind == ExperimentKind::Protocol && calibration_only) kind = ExperimentKind::Calibration;
    run(flags, kind);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const InvalidArgument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
