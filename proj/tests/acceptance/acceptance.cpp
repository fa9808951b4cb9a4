#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "nvspade/bayes.hpp"
#include "nvspade/harness.hpp"
#include "nvspade/information.hpp"
#include "nvspade/io.hpp"
#include "nvspade/measurements.hpp"
#include "nvspade/protocol.hpp"
#include "../oracles.hpp"

using namespace nvspade;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

int hardware_threads() { return std::max(1, static_cast<int>(std::thread::hardware_concurrency())); }

Positions two_source(double s) {
  Positions r(2, 2);
  r << -s, 0.0, s, 0.0;
  return r;
}

// 1. minimum-error measurement of two states against the closed form and the SLD eigenvectors
Outcome ykl_helstrom() {
  std::mt19937_64 gen(101);
  std::uniform_real_distribution<double> us(1.0 / 20.0, 2.0), uk(-0.45, 0.45);
  double worst_pe = 0.0, worst_fid = 1.0;
  bool bijective = true;
  for (int t = 0; t < 100; ++t) {
    const double s = us(gen), kappa = uk(gen);
    const Vec b = Eigen::Vector2d(0.5 - kappa, 0.5 + kappa);
    const GramMatrix g = gram_matrix(two_source(s));
    const YklMeasurement m = solve_ykl(eigenbasis_representation(g, b));
    const double phi = g.entries(0, 1);
    worst_pe = std::max(worst_pe, std::abs(m.min_error - oracle::helstrom_closed_form(b(0), b(1), phi)));

    // everything in coordinates over (psi_1, psi_2); inner products through the Gram matrix
    const CMat ups = m.psi.inverse() * m.unitary;
    const double tau = 1.0 - 4.0 * kappa * kappa;
    const double root = std::sqrt(1.0 - tau * phi * phi), rr = std::sqrt(1.0 - phi * phi);
    Eigen::Matrix2d e;  // columns e+, e-
    e << 1.0 / std::sqrt(2 * (1 + phi)), -1.0 / std::sqrt(2 * (1 - phi)), 1.0 / std::sqrt(2 * (1 + phi)),
        1.0 / std::sqrt(2 * (1 - phi));
    Eigen::Matrix2d v;
    v.col(0) = e * Eigen::Vector2d((2 * kappa * phi + root) / rr, 1.0);
    v.col(1) = e * Eigen::Vector2d((2 * kappa * phi - root) / rr, 1.0);
    const CMat gc = g.entries.cast<std::complex<double>>();
    auto fidelity = [&](const CVec& a, const CVec& c) {
      const std::complex<double> ov = (a.adjoint() * gc * c)(0, 0);
      const double na = (a.adjoint() * gc * a)(0, 0).real(), nc = (c.adjoint() * gc * c)(0, 0).real();
      return std::norm(ov) / (na * nc);
    };
    int used[2] = {0, 0};
    for (int k = 0; k < 2; ++k) {
      const CVec u = ups.col(k);
      const double f0 = fidelity(u, v.col(0).cast<std::complex<double>>());
      const double f1 = fidelity(u, v.col(1).cast<std::complex<double>>());
      used[f0 > f1 ? 0 : 1]++;
      worst_fid = std::min(worst_fid, std::max(f0, f1));
    }
    bijective = bijective && used[0] == 1 && used[1] == 1;
  }
  Outcome o;
  o.pass = worst_pe <= 1e-6 && worst_fid >= 1.0 - 1e-8 && bijective;
  o.detail = "max |P_e - closed form| " + fmt("%.2e", worst_pe) + ", min fidelity 1-" + fmt("%.2e", 1.0 - worst_fid);
  return o;
}

// 2. SLD eigenvectors versus the minimum-error projectors
Outcome sld_identity() {
  std::mt19937_64 gen(102);
  std::uniform_real_distribution<double> us(1.0 / 20.0, 2.0), uk(-0.45, 0.45);
  double worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    TwoSourceParams p;
    p.s = us(gen);
    p.kappa = uk(gen);
    const SldResult sld = sld_brightness_two_source(p);
    const HelstromResult h = helstrom_binary(0.5 - p.kappa, 0.5 + p.kappa, p.overlap());
    for (int k = 0; k < 2; ++k) {
      const Eigen::Vector2d a = sld.eigenvectors.col(k), b = h.projectors.col(k);
      worst = std::max(worst, std::min((a - b).norm(), (a + b).norm()));
    }
  }
  return {worst <= 1e-10, "max eigenvector distance " + fmt("%.2e", worst)};
}

// 3. brightness QFIM block against the two-source closed form and the multinomial limit
Outcome qfim_consistency() {
  std::mt19937_64 gen(103);
  std::uniform_real_distribution<double> us(0.02, 2.0), uk(-0.45, 0.45);
  double worst_rel = 0.0;
  for (int t = 0; t < 50; ++t) {
    TwoSourceParams p;
    p.s = us(gen);
    p.kappa = uk(gen);
    const EmitterEnsemble e = p.ensemble();
    const Mat q = qfim_brightness_block(eigenbasis_representation(gram_matrix(e), e.brightnesses())).values;
    const double dk_db1 = -1.0;  // kappa = 1/2 - b1
    const double q_kappa = q(0, 0) / (dk_db1 * dk_db1);
    const double phi = p.overlap();
    const double closed = 4.0 * (1.0 - phi * phi) / (1.0 - 4.0 * p.kappa * p.kappa);
    worst_rel = std::max(worst_rel, std::abs(q_kappa - closed) / closed);
    worst_rel = std::max(worst_rel, std::abs(q_kappa - qfim_two_source(p).values(2, 2)) / closed);
  }
  double worst_orth = 0.0;
  std::exponential_distribution<double> ex(1.0);
  for (int t = 0; t < 50; ++t) {
    const int k = 2 + t % 5;
    Vec b(k);
    for (int i = 0; i < k; ++i) b(i) = ex(gen) + 0.05;
    b /= b.sum();
    EigenbasisRep rep;
    rep.psi = CMat::Identity(k, k);
    rep.priors = rep.eigenvalues = b;
    const Mat ref = oracle::multinomial_fisher(b);
    worst_orth = std::max(worst_orth, (qfim_brightness_block(rep).values - ref).cwiseAbs().maxCoeff() / ref.cwiseAbs().maxCoeff());
  }
  return {worst_rel <= 1e-8 && worst_orth <= 1e-8,
          "max rel. error two-source " + fmt("%.2e", worst_rel) + ", orthogonal " + fmt("%.2e", worst_orth)};
}

// 4. sorter and YKL outcome probabilities against brute-force quadrature
Outcome mode_probabilities() {
  std::mt19937_64 gen(104);
  std::uniform_int_distribution<int> kd(2, 5);
  std::uniform_real_distribution<double> dm(0.05, 0.25), off(-0.1, 0.1), jit(-0.03, 0.03);
  std::exponential_distribution<double> ex(1.0);
  double worst_pad = 0.0, worst_ykl = 0.0;
  for (int t = 0; t < 50; ++t) {
    const int k = kd(gen);
    const Positions r = generate_random_scene(k, dm(gen), 5000 + t);
    Vec b(k), prior(k);
    for (int i = 0; i < k; ++i) {
      b(i) = ex(gen) + 0.05;
      prior(i) = ex(gen) + 0.05;
    }
    b /= b.sum();
    prior /= prior.sum();
    PadSpadeConfig pad;
    pad.origin << off(gen), off(gen);
    const oracle::QuadGrid g(pad.origin.x(), pad.origin.y());
    const Vec ref = oracle::pad_probabilities(g, r, b, pad.max_total_order, pad.origin.x(), pad.origin.y());
    worst_pad = std::max(worst_pad, (pad_probabilities(r, b, pad) - ref).cwiseAbs().maxCoeff());

    Positions design = r;
    for (int i = 0; i < k; ++i) design.row(i) += Eigen::RowVector2d(jit(gen), jit(gen));
    const YklMeasurement m = build_ykl_measurement(design, prior);
    const Vec q = ykl_outcome_probabilities(m, EmitterEnsemble(r, b));
    const CMat c = m.psi.inverse() * m.unitary;
    std::vector<Mat> truth;
    for (int j = 0; j < k; ++j) truth.push_back(oracle::gauss_field(g, r(j, 0), r(j, 1)));
    std::vector<Mat> basis;
    for (int j = 0; j < k; ++j) basis.push_back(oracle::gauss_field(g, design(j, 0), design(j, 1)));
    Vec qref = Vec::Zero(k + 1);
    for (int o = 0; o < k; ++o) {
      oracle::CMat mode = oracle::CMat::Zero(g.y.size(), g.x.size());
      for (int j = 0; j < k; ++j) mode += c(j, o) * basis[static_cast<size_t>(j)].cast<std::complex<double>>();
      for (int j = 0; j < k; ++j) qref(o) += b(j) * std::norm(oracle::inner(g, mode, truth[static_cast<size_t>(j)]));
    }
    qref(k) = 1.0 - qref.head(k).sum();
    worst_ykl = std::max(worst_ykl, (q - qref).cwiseAbs().maxCoeff());
  }
  return {worst_pad <= 1e-6 && worst_ykl <= 1e-6,
          "max |dp| sorter " + fmt("%.2e", worst_pad) + ", YKL " + fmt("%.2e", worst_ykl)};
}

// 5. Fisher sweep properties
Outcome fisher_sweep() {
  ExperimentConfig c;
  c.kind = ExperimentKind::Fisher;
  c.fisher.kappas = {0.0, 0.2, 0.4};
  c.fisher.misalignments = {0.0, 0.1, 0.25};
  c.threads = hardware_threads();
  const auto rows = run_fisher_sweep(c);
  std::map<std::tuple<double, double, double>, FisherRow> qfi;
  for (const auto& r : rows)
    if (r.measurement == "qfi") qfi[{r.x0, r.s, r.kappa}] = r;
  bool qfi_const = true;
  double min_bspade = INFINITY, max_hg_x0 = 0.0, worst_di = -INFINITY;
  for (const auto& r : rows) {
    if (r.measurement == "qfi") qfi_const = qfi_const && r.f_s == 1.0;
    if (r.measurement == "bspade" && r.x0 == 0.0 && r.kappa == 0.0 && r.s <= 0.5) min_bspade = std::min(min_bspade, r.f_s);
    if (r.measurement == "hg" && r.x0 == 0.0 && r.kappa == 0.0) max_hg_x0 = std::max(max_hg_x0, std::abs(r.f_x0));
    if (r.measurement == "di") {
      const FisherRow& q = qfi.at({r.x0, r.s, r.kappa});
      worst_di = std::max({worst_di, r.f_x0 - q.f_x0, r.f_s - q.f_s, r.f_kappa - q.f_kappa});
    }
  }
  Outcome o;
  o.pass = qfi_const && min_bspade >= 0.99 && max_hg_x0 <= 1e-12 && worst_di <= 1e-6;
  o.detail = std::string("QFI(s) constant ") + (qfi_const ? "yes" : "no") + ", min aligned B-SPADE CFI(s) " +
             fmt("%.4f", min_bspade) + ", max aligned HG CFI(x0) " + fmt("%.1e", max_hg_x0) +
             ", max DI CFI - QFI " + fmt("%.1e", worst_di);
  return o;
}

// 6. calibration/sensing allocation
Outcome allocation() {
  const bool exact = optimal_allocation(0.0) == 0.5;
  double lo = 1.0, hi = 0.0, worst_res = 0.0, worst_kappa = 0.0;
  for (int i = -50; i <= 50; ++i) {
    const double kappa = 0.25 * i / 50.0;
    const double b = optimal_allocation(kappa);
    if (b < lo || b > hi) {
      if (b < 0.45 || b > 0.55) worst_kappa = std::max(worst_kappa, std::abs(kappa));
    }
    lo = std::min(lo, b);
    hi = std::max(hi, b);
    worst_res = std::max(worst_res, std::abs(allocation_quartic(b, kappa)));
  }
  for (double kappa : {-0.49, -0.4, 0.3, 0.45, 0.49})
    worst_res = std::max(worst_res, std::abs(allocation_quartic(optimal_allocation(kappa), kappa)));
  Outcome o;
  o.pass = exact && lo >= 0.45 && hi <= 0.55 && worst_res < 1e-10;
  o.detail = std::string("beta*(0) == 0.5 ") + (exact ? "yes" : "no") + ", beta* over |kappa|<=0.25 in [" +
             fmt("%.5f", lo) + ", " + fmt("%.5f", hi) + "], max residual " + fmt("%.1e", worst_res);
  if (worst_kappa > 0.0) o.detail += ", out of band up to |kappa| = " + fmt("%.3f", worst_kappa);
  return o;
}

// 7. Monte Carlo comparison of the two pipelines
Outcome monte_carlo() {
  ExperimentConfig c;
  c.kind = ExperimentKind::MonteCarlo;
  c.seed = 2024;
  c.budgets = {100'000, 10'000, 100'000, 10'000};
  c.pad_order = 10;
  c.monte_carlo.k_values = {3, 4, 5};
  c.monte_carlo.d_min_values = {1.0 / 16.0, 1.0 / 10.0};
  c.monte_carlo.trials = 100;
  c.threads = hardware_threads();
  const auto t0 = std::chrono::steady_clock::now();
  const MonteCarloResult res = run_monte_carlo(c);
  const double hours = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 3600.0;
  bool pass = hours <= 4.0;
  std::string detail;
  for (double d : c.monte_carlo.d_min_values) {
    const MonteCarloSummary *sp = nullptr, *di = nullptr;
    for (const auto& s : res.summary)
      if (s.d_min == d) (s.pipeline == "spade" ? sp : di) = &s;
    const double rr = di->mean_eps_r / sp->mean_eps_r, rb = di->mean_eps_b / sp->mean_eps_b;
    const bool corr = sp->correlation.pearson >= 0.3 && sp->correlation.pearson <= 0.8 &&
                      di->correlation.pearson >= 0.3 && di->correlation.pearson <= 0.8;
    pass = pass && rr >= 3.0 && rb >= 1.5 && corr;
    detail += "d_min " + fmt("%.4g", d) + ": eps_r ratio " + fmt("%.2f", rr) + ", eps_b ratio " + fmt("%.2f", rb) +
              ", pearson spade " + fmt("%.2f", sp->correlation.pearson) + " di " + fmt("%.2f", di->correlation.pearson) +
              "; ";
  }
  detail += fmt("%.2f h", hours);
  return {pass, detail};
}

// 8. end-to-end field sensing: SPADE beats DI on phi RMSE
Outcome field_ordering() {
  std::string detail;
  bool pass = true;
  for (ExperimentKind kind : {ExperimentKind::Odmr, ExperimentKind::Rabi}) {
    int wins = 0;
    double sum_sp = 0.0, sum_di = 0.0;
    const int seeds = 20;
    for (int seed = 0; seed < seeds; ++seed) {
      ExperimentConfig c;
      c.kind = kind;
      c.seed = static_cast<std::uint64_t>(seed);
      c.scene.k = 4;
      c.scene.d_min = 1.0 / 8.0;
      c.odmr.chi = 0.5;
      c.budgets = {1'000'000, 100'000, 1'000'000, 100'000};
      const ProtocolResult r = run_protocol(c);
      const double sp = r.pipeline("spade").field_rmse, di = r.pipeline("di").field_rmse;
      wins += sp < di ? 1 : 0;
      sum_sp += sp;
      sum_di += di;
    }
    pass = pass && wins * 10 >= seeds * 8;
    detail += std::string(to_string(kind)) + ": SPADE better in " + std::to_string(wins) + "/" + std::to_string(seeds) +
              " (mean rmse " + fmt("%.4f", sum_sp / seeds) + " vs " + fmt("%.4f", sum_di / seeds) + "); ";
  }
  return {pass, detail};
}

// 9. Bayesian suite
Outcome bayes_suite() {
  std::mt19937_64 gen(109);
  std::normal_distribution<double> nd(0.0, 1.0);
  auto samples = [&](std::int64_t n, double s) {
    std::bernoulli_distribution pick(0.5);
    Vec x(n);
    for (std::int64_t i = 0; i < n; ++i) x(i) = (pick(gen) ? s : -s) + nd(gen);
    return x;
  };
  double worst_norm = 0.0, worst_batch = 0.0;
  for (double s : {0.05, 0.25, 0.6}) {
    const PriorSet prior = build_priors_from_di(samples(10'000, s));
    worst_norm = std::max({worst_norm, std::abs(prior.separation.integral() - 1.0), std::abs(prior.kappa.integral() - 1.0)});
    SeparationPosterior seq(prior), batch(prior);
    std::int64_t q_total = 0, m_total = 0;
    for (int u = 0; u < 5; ++u) {
      std::binomial_distribution<std::int64_t> bin(2000, bspade_xi(s, prior.x0_hat));
      const std::int64_t q = bin(gen);
      seq.update(q, 2000);
      q_total += q;
      m_total += 2000;
      worst_norm = std::max(worst_norm, std::abs(seq.marginal().integral() - 1.0));
    }
    batch.update(q_total, m_total);
    const Vec a = seq.marginal().density, b = batch.marginal().density;
    worst_batch = std::max(worst_batch, (a - b).cwiseAbs().maxCoeff() / b.maxCoeff());
    const auto bp = brightness_posterior(samples(20'000, s), prior.x0_hat, seq);
    worst_norm = std::max(worst_norm, std::abs(bp.kappa.integral() - 1.0));
  }

  ExperimentConfig c;
  c.kind = ExperimentKind::Bayes;
  c.bayes.s = 1.0 / 20.0;
  c.bayes.rule = SwitchRule::TypeII;
  double frac = 0.0;
  const int seeds = 100;
  for (int seed = 0; seed < seeds; ++seed) {
    c.seed = static_cast<std::uint64_t>(seed);
    const BayesDemoResult r = run_bayes_demo(c);
    frac += r.switch_fraction / seeds;
    worst_norm = std::max({worst_norm, std::abs(r.separation_posterior.integral() - 1.0),
                           std::abs(r.kappa_posterior.integral() - 1.0)});
  }

  const double mu = 0.5;
  const DifferenceModes dm = difference_operator_modes(-mu, mu, 1e-6, 0.5, 0.5);
  const double h = dm.grid(1) - dm.grid(0);
  const double phi = std::exp(-(2 * mu) * (2 * mu) / 8.0);
  const HelstromResult hr = helstrom_binary(0.5, 0.5, phi);
  const Vec g1 = (std::pow(2 * M_PI, -0.25) * (-(dm.grid.array() + mu).square() / 4.0).exp()).matrix();
  const Vec g2 = (std::pow(2 * M_PI, -0.25) * (-(dm.grid.array() - mu).square() / 4.0).exp()).matrix();
  const Vec ep = (g1 + g2) / std::sqrt(2 * (1 + phi)), em = (g2 - g1) / std::sqrt(2 * (1 - phi));
  double worst_mode = 0.0;
  const int pos = dm.eigenvalues(0) > 0 ? 0 : 1;
  for (int k = 0; k < 2; ++k) {
    const Vec target = hr.projectors(0, k) * ep + hr.projectors(1, k) * em;
    const Vec mode = dm.modes.col(k == 0 ? pos : 1 - pos);
    worst_mode = std::max(worst_mode, std::min((mode - target).norm(), (mode + target).norm()) * std::sqrt(h));
  }

  Outcome o;
  o.pass = worst_norm <= 1e-6 && worst_batch <= 1e-8 && frac >= 0.35 && frac <= 0.65 && worst_mode <= 1e-3;
  o.detail = "normalization " + fmt("%.1e", worst_norm) + ", batch/sequential " + fmt("%.1e", worst_batch) +
             ", mean Type-II switch fraction " + fmt("%.3f", frac) + ", mode distance " + fmt("%.1e", worst_mode);
  return o;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 10. CLI determinism
Outcome cli_determinism(const std::string& cli, const fs::path& work) {
  if (cli.empty() || !fs::exists(cli)) return {false, "command line tool not found: " + cli};
  fs::remove_all(work);
  fs::create_directories(work);
  const fs::path cfg = work / "small.json";
  std::ofstream(cfg) << R"({"budgets": {"M": 20000, "M1": 2000, "N": 20000, "N1": 2000},
  "scene": {"k": 3, "d_min": 0.15},
  "monte_carlo": {"trials": 3, "d_min_values": [0.15]},
  "odmr": {"gamma_points": 9}, "rabi": {"gamma_points": 9},
  "fisher": {"s_points": 6},
  "bayes": {"s_points": 120},
  "grid": {"extent": 4.0, "spacing": 0.125}})";
  const std::vector<std::string> commands{"scene",       "protocol", "protocol --calibration-only",
                                          "monte-carlo", "odmr",     "rabi",
                                          "fisher",      "bayes",    "ykl-modes"};
  int files = 0;
  std::vector<std::string> mismatches;
  for (size_t i = 0; i < commands.size(); ++i) {
    std::vector<fs::path> dirs;
    for (int rep = 0; rep < 2; ++rep) {
      const fs::path out = work / ("run" + std::to_string(i) + "_" + std::to_string(rep));
      dirs.push_back(out);
      const std::string cmd = "\"" + cli + "\" " + commands[i] + " --config \"" + cfg.string() + "\" --seed 17 --out \"" +
                              out.string() + "\" --threads " + std::to_string(rep + 1) + " > /dev/null 2>&1";
      if (std::system(cmd.c_str()) != 0) mismatches.push_back(commands[i] + " (exit status)");
    }
    for (const auto& entry : fs::directory_iterator(dirs[0])) {
      if (entry.path().extension() != ".csv") continue;
      ++files;
      const fs::path other = dirs[1] / entry.path().filename();
      if (!fs::exists(other) || read_file(entry.path()) != read_file(other))
        mismatches.push_back(commands[i] + "/" + entry.path().filename().string());
    }
  }
  Outcome o;
  o.pass = mismatches.empty() && files > 0;
  o.detail = std::to_string(files) + " CSV files compared over " + std::to_string(commands.size()) + " commands";
  for (const auto& m : mismatches) o.detail += "; differs: " + m;
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance suite"};
  std::vector<int> selected;
  std::string cli;
  std::string work = (fs::temp_directory_path() / "nvspade_acceptance").string();
  app.add_option("--criterion", selected, "criteria to run (default: all)")->check(CLI::Range(1, 10));
  app.add_option("--cli", cli, "path to the nvspade executable");
  app.add_option("--work", work, "scratch directory");
  CLI11_PARSE(app, argc, argv);
  if (selected.empty())
    for (int i = 1; i <= 10; ++i) selected.push_back(i);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"YKL matches the closed-form two-state measurement", ykl_helstrom},
      {"SLD eigenvectors equal the minimum-error projectors", sld_identity},
      {"brightness QFIM consistency", qfim_consistency},
      {"mode probabilities match quadrature", mode_probabilities},
      {"Fisher sweep properties", fisher_sweep},
      {"calibration/sensing allocation optimum", allocation},
      {"Monte Carlo: SPADE improves on DI", monte_carlo},
      {"ODMR/Rabi: SPADE field RMSE below DI", field_ordering},
      {"Bayesian suite", bayes_suite},
      {"CLI outputs are deterministic", [&] { return cli_determinism(cli, work); }},
  };
  const double budgets[] = {60, 0, 0, 0, 300, 0, 4 * 3600.0, 0, 0, 0};

  int failed = 0;
  for (int i : selected) {
    const auto& [name, fn] = criteria[static_cast<size_t>(i - 1)];
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const double budget = budgets[i - 1];
    if (budget > 0 && secs > budget) {
      o.pass = false;
      o.detail += "; over the runtime budget";
    }
    std::printf("[%s] %2d %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", i, name.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
