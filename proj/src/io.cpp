#include "nvspade/io.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace nvspade {

using nlohmann::json;

namespace {

void check_keys(const json& j, const char* where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(std::string(where) + " must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : j.items())
    if (!ok.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

Vec read_vec(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> to_std(const Vec& v) { return {v.data(), v.data() + v.size()}; }

json sweep_json(const SweepConfig& s, const FieldConfig& f) {
  return {{"gamma_min", s.gamma_min}, {"gamma_max", s.gamma_max}, {"gamma_points", s.gamma_points},
          {"chi", f.chi},             {"phi_min", f.phi_min},     {"phi_max", f.phi_max}};
}

void read_sweep(const json& j, const char* where, SweepConfig& s, FieldConfig& f) {
  check_keys(j, where, {"gamma_min", "gamma_max", "gamma_points", "chi", "phi_min", "phi_max"});
  read(j, "gamma_min", s.gamma_min);
  read(j, "gamma_max", s.gamma_max);
  read(j, "gamma_points", s.gamma_points);
  read(j, "chi", f.chi);
  read(j, "phi_min", f.phi_min);
  read(j, "phi_max", f.phi_max);
}

json to_json(const ExperimentConfig& c) {
  json scene = {{"k", c.scene.k}, {"d_min", c.scene.d_min}};
  json pos = json::array();
  for (Eigen::Index i = 0; i < c.scene.positions.rows(); ++i)
    pos.push_back({c.scene.positions(i, 0), c.scene.positions(i, 1)});
  scene["positions"] = pos;
  scene["brightnesses"] = to_std(c.scene.brightnesses);
  const auto& b = c.bayes;
  return {
      {"kind", to_string(c.kind)},
      {"seed", c.seed},
      {"scene", scene},
      {"budgets", {{"M", c.budgets.m}, {"M1", c.budgets.m1}, {"N", c.budgets.n}, {"N1", c.budgets.sensing_di()}}},
      {"pad_order", c.pad_order},
      {"ykl", {{"restarts", c.ykl.restarts}, {"tol", c.ykl.tol}, {"max_iterations", c.ykl.max_iterations}}},
      {"random_starts", c.random_starts},
      {"baseline", c.baseline_only},
      {"threads", c.threads},
      {"odmr", sweep_json(c.odmr_sweep, c.odmr)},
      {"rabi", sweep_json(c.rabi_sweep, c.rabi)},
      {"monte_carlo",
       {{"k_values", c.monte_carlo.k_values},
        {"d_min_values", c.monte_carlo.d_min_values},
        {"trials", c.monte_carlo.trials}}},
      {"fisher",
       {{"s_min", c.fisher.s_min},
        {"s_max", c.fisher.s_max},
        {"s_points", c.fisher.s_points},
        {"kappas", c.fisher.kappas},
        {"misalignments", c.fisher.misalignments},
        {"di_spacing", c.fisher.di_spacing}}},
      {"bayes",
       {{"s", b.s},
        {"kappa", b.kappa},
        {"x0", b.x0},
        {"constraint", b.rule == SwitchRule::TypeI ? "I" : "II"},
        {"zeta", b.zeta},
        {"calibration_budget", b.calibration_budget},
        {"check_interval", b.check_interval},
        {"di_cap", b.di_cap},
        {"spade_photons", b.spade_photons},
        {"spade_updates", b.spade_updates},
        {"sensing_photons", b.sensing_photons},
        {"sensing_di", b.sensing_di},
        {"s_points", b.grids.s_points},
        {"s_max", b.grids.s_max},
        {"kappa_points", b.grids.kappa_points},
        {"hermite_nodes", b.grids.hermite_nodes}}},
      {"grid",
       {{"center", {c.grid.center.x(), c.grid.center.y()}}, {"extent", c.grid.extent}, {"spacing", c.grid.spacing}}},
  };
}

ExperimentConfig from_json(const json& j) {
  ExperimentConfig c;
  check_keys(j, "config", {"kind", "seed", "scene", "budgets", "pad_order", "ykl", "random_starts", "baseline",
                           "threads", "odmr", "rabi", "monte_carlo", "fisher", "bayes", "grid"});
  if (j.contains("kind")) c.kind = experiment_kind_from_string(j.at("kind").get<std::string>());
  read(j, "seed", c.seed);
  if (j.contains("scene")) {
    const auto& s = j.at("scene");
    check_keys(s, "scene", {"positions", "brightnesses", "k", "d_min"});
    read(s, "k", c.scene.k);
    read(s, "d_min", c.scene.d_min);
    if (s.contains("positions")) {
      const auto& p = s.at("positions");
      c.scene.positions.resize(static_cast<Eigen::Index>(p.size()), 2);
      for (size_t i = 0; i < p.size(); ++i) {
        const auto xy = p.at(i).get<std::vector<double>>();
        if (xy.size() != 2) throw ConfigError("scene positions are [x, y] pairs");
        c.scene.positions(static_cast<Eigen::Index>(i), 0) = xy[0];
        c.scene.positions(static_cast<Eigen::Index>(i), 1) = xy[1];
      }
    }
    if (s.contains("brightnesses")) c.scene.brightnesses = read_vec(s.at("brightnesses"));
  }
  if (j.contains("budgets")) {
    const auto& b = j.at("budgets");
    check_keys(b, "budgets", {"M", "M1", "N", "N1"});
    read(b, "M", c.budgets.m);
    read(b, "M1", c.budgets.m1);
    read(b, "N", c.budgets.n);
    read(b, "N1", c.budgets.n1);
  }
  read(j, "pad_order", c.pad_order);
  if (j.contains("ykl")) {
    const auto& y = j.at("ykl");
    check_keys(y, "ykl", {"restarts", "tol", "max_iterations"});
    read(y, "restarts", c.ykl.restarts);
    read(y, "tol", c.ykl.tol);
    read(y, "max_iterations", c.ykl.max_iterations);
  }
  read(j, "random_starts", c.random_starts);
  read(j, "baseline", c.baseline_only);
  read(j, "threads", c.threads);
  if (j.contains("odmr")) read_sweep(j.at("odmr"), "odmr", c.odmr_sweep, c.odmr);
  if (j.contains("rabi")) read_sweep(j.at("rabi"), "rabi", c.rabi_sweep, c.rabi);
  if (j.contains("monte_carlo")) {
    const auto& m = j.at("monte_carlo");
    check_keys(m, "monte_carlo", {"k_values", "d_min_values", "trials"});
    read(m, "k_values", c.monte_carlo.k_values);
    read(m, "d_min_values", c.monte_carlo.d_min_values);
    read(m, "trials", c.monte_carlo.trials);
  }
  if (j.contains("fisher")) {
    const auto& f = j.at("fisher");
    check_keys(f, "fisher", {"s_min", "s_max", "s_points", "kappas", "misalignments", "di_spacing"});
    read(f, "s_min", c.fisher.s_min);
    read(f, "s_max", c.fisher.s_max);
    read(f, "s_points", c.fisher.s_points);
    read(f, "kappas", c.fisher.kappas);
    read(f, "misalignments", c.fisher.misalignments);
    read(f, "di_spacing", c.fisher.di_spacing);
  }
  if (j.contains("bayes")) {
    const auto& b = j.at("bayes");
    check_keys(b, "bayes",
               {"s", "kappa", "x0", "constraint", "zeta", "calibration_budget", "check_interval", "di_cap",
                "spade_photons", "spade_updates", "sensing_photons", "sensing_di", "s_points", "s_max",
                "kappa_points", "hermite_nodes"});
    auto& o = c.bayes;
    read(b, "s", o.s);
    read(b, "kappa", o.kappa);
    read(b, "x0", o.x0);
    if (b.contains("constraint")) {
      const auto r = b.at("constraint").get<std::string>();
      if (r == "I") o.rule = SwitchRule::TypeI;
      else if (r == "II") o.rule = SwitchRule::TypeII;
      else throw ConfigError("bayes.constraint must be \"I\" or \"II\"");
    }
    read(b, "zeta", o.zeta);
    read(b, "calibration_budget", o.calibration_budget);
    read(b, "check_interval", o.check_interval);
    read(b, "di_cap", o.di_cap);
    read(b, "spade_photons", o.spade_photons);
    read(b, "spade_updates", o.spade_updates);
    read(b, "sensing_photons", o.sensing_photons);
    read(b, "sensing_di", o.sensing_di);
    read(b, "s_points", o.grids.s_points);
    read(b, "s_max", o.grids.s_max);
    read(b, "kappa_points", o.grids.kappa_points);
    read(b, "hermite_nodes", o.grids.hermite_nodes);
  }
  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    check_keys(g, "grid", {"center", "extent", "spacing"});
    if (g.contains("center")) {
      const auto v = g.at("center").get<std::vector<double>>();
      if (v.size() != 2) throw ConfigError("grid.center is [x, y]");
      c.grid.center = Point(v[0], v[1]);
    }
    read(g, "extent", c.grid.extent);
    read(g, "spacing", c.grid.spacing);
  }
  return c;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

}  // namespace

ExperimentConfig config_from_json_string(const std::string& text) {
  ExperimentConfig c;
  try {
    c = from_json(json::parse(text));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json_string(ss.str());
}

std::string config_to_json_string(const ExperimentConfig& c) { return to_json(c).dump(2); }

std::string config_hash(const ExperimentConfig& c) {
  json j = to_json(c);
  j.erase("threads");  // results do not depend on the worker count
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, r.ptr};
}

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

CsvTable& CsvTable::row() {
  rows_.emplace_back();
  return *this;
}

CsvTable& CsvTable::cell(const std::string& v) {
  if (rows_.empty()) row();
  rows_.back().push_back(csv_escape(v));
  return *this;
}

CsvTable& CsvTable::cell(double v) { return cell(format_double(v)); }
CsvTable& CsvTable::cell(std::int64_t v) { return cell(std::to_string(v)); }
CsvTable& CsvTable::cell(std::uint64_t v) { return cell(std::to_string(v)); }

std::string CsvTable::str() const {
  std::string out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += cells[i];
    }
    out += '\n';
  };
  line(header_);
  for (const auto& r : rows_) {
    if (r.size() != header_.size()) throw NumericalError("CSV row width does not match header");
    line(r);
  }
  return out;
}

void CsvTable::write(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << str();
}

void prepare_output_dir(const std::filesystem::path& dir, const std::string& hash, bool force) {
  std::filesystem::create_directories(dir);
  const auto manifest = dir / "run.json";
  if (!std::filesystem::exists(manifest) || force) return;
  std::ifstream in(manifest);
  std::string recorded;
  try {
    recorded = json::parse(in).value("config_hash", "");
  } catch (const json::exception&) {
    throw ConfigError(manifest.string() + " is unreadable; use --force to overwrite");
  }
  if (recorded != hash)
    throw ConfigError("output directory holds results of config " + recorded + "; use --force to overwrite");
}

void write_manifest(const std::filesystem::path& dir, const ExperimentConfig& c, const std::string& summary) {
  json j;
  j["config"] = to_json(c);
  j["config_hash"] = config_hash(c);
  j["seed"] = c.seed;
  j["summary"] = json::parse(summary);
  std::ofstream out(dir / "run.json", std::ios::binary);
  if (!out) throw ConfigError("cannot write run.json");
  out << j.dump(2) << '\n';
}

CsvTable scene_table(const Positions& r, const Vec& b) {
  CsvTable t({"emitter", "x", "y", "brightness"});
  for (Eigen::Index i = 0; i < r.rows(); ++i) {
    t.row().cell(static_cast<std::int64_t>(i)).cell(r(i, 0)).cell(r(i, 1));
    if (b.size() == r.rows()) t.cell(b(i));
    else t.cell(std::string());
  }
  return t;
}

CsvTable positions_table(const ProtocolResult& res) {
  CsvTable t({"pipeline", "emitter", "x_true", "y_true", "x_est", "y_est"});
  for (const auto& p : res.pipelines)
    for (Eigen::Index i = 0; i < res.truth.rows(); ++i)
      t.row()
          .cell(p.name)
          .cell(static_cast<std::int64_t>(i))
          .cell(res.truth(i, 0))
          .cell(res.truth(i, 1))
          .cell(p.positions(i, 0))
          .cell(p.positions(i, 1));
  return t;
}

CsvTable brightness_table(const ProtocolResult& res) {
  CsvTable t({"gamma", "emitter", "pipeline", "b_true", "b_est", "spade_photons", "di_photons"});
  for (const auto& p : res.pipelines)
    for (Eigen::Index g = 0; g < p.brightnesses.rows(); ++g)
      for (Eigen::Index k = 0; k < p.brightnesses.cols(); ++k)
        t.row()
            .cell(res.gammas(g))
            .cell(static_cast<std::int64_t>(k))
            .cell(p.name)
            .cell(res.true_brightnesses(g, k))
            .cell(p.brightnesses(g, k))
            .cell(static_cast<std::int64_t>(p.spade_photons(g)))
            .cell(static_cast<std::int64_t>(p.di_photons(g)));
  return t;
}

CsvTable trace_table(const ProtocolResult& res, FieldModel kind, double chi) {
  CsvTable t({"gamma", "emitter", "I_hat", "I_fit", "pipeline"});
  for (const auto& p : res.pipelines)
    for (Eigen::Index g = 0; g < res.gammas.size(); ++g)
      for (Eigen::Index k = 0; k < p.intensities.cols(); ++k) {
        const auto& f = p.fits[static_cast<size_t>(k)];
        t.row()
            .cell(res.gammas(g))
            .cell(static_cast<std::int64_t>(k))
            .cell(p.intensities(g, k))
            .cell(f.scale * model_intensity(kind, res.gammas(g), f.phi, chi))
            .cell(p.name);
      }
  return t;
}

CsvTable field_fit_table(const ProtocolResult& res) {
  CsvTable t({"emitter", "pipeline", "phi_true", "phi_hat", "abs_error", "scale", "residual_norm", "converged"});
  for (const auto& p : res.pipelines)
    for (size_t k = 0; k < p.fits.size(); ++k) {
      const auto& f = p.fits[k];
      const double truth = res.phi_true(static_cast<Eigen::Index>(k));
      t.row()
          .cell(static_cast<std::int64_t>(k))
          .cell(p.name)
          .cell(truth)
          .cell(f.phi)
          .cell(std::abs(f.phi - truth))
          .cell(f.scale)
          .cell(f.residual_norm)
          .cell(static_cast<std::int64_t>(f.converged));
    }
  return t;
}

CsvTable metrics_table(const ProtocolResult& res) {
  CsvTable t({"pipeline", "eps_r", "mean_eps_b", "field_rmse"});
  for (const auto& p : res.pipelines)
    t.row()
        .cell(p.name)
        .cell(p.eps_r)
        .cell(p.eps_b.size() ? p.eps_b.mean() : 0.0)
        .cell(p.fits.empty() ? 0.0 : p.field_rmse);
  return t;
}

std::string protocol_summary_json(const ProtocolResult& res) {
  json j;
  j["kind"] = to_string(res.kind);
  for (const auto& p : res.pipelines) {
    json q = {{"eps_r", p.eps_r}};
    if (p.eps_b.size()) q["mean_eps_b"] = p.eps_b.mean();
    if (!p.fits.empty()) {
      q["field_rmse"] = p.field_rmse;
      std::vector<double> phi;
      for (const auto& f : p.fits) phi.push_back(f.phi);
      q["phi_hat"] = phi;
    }
    j[p.name] = q;
  }
  if (res.phi_true.size()) j["phi_true"] = to_std(res.phi_true);
  if (res.pipelines.size() == 2 && !res.pipelines[0].fits.empty() && res.pipelines[0].field_rmse > 0.0)
    j["rmse_improvement"] = res.pipelines[1].field_rmse / res.pipelines[0].field_rmse;
  return j.dump();
}

CsvTable monte_carlo_table(const MonteCarloResult& res) {
  CsvTable t({"trial", "K", "d_min", "pipeline", "eps_r", "eps_b", "seed"});
  for (const auto& r : res.rows)
    t.row().cell(r.trial).cell(r.k).cell(r.d_min).cell(r.pipeline).cell(r.eps_r).cell(r.eps_b).cell(r.seed);
  return t;
}

CsvTable monte_carlo_summary_table(const MonteCarloResult& res) {
  CsvTable t({"d_min", "pipeline", "trials", "mean_eps_r", "sem_eps_r", "mean_eps_b", "sem_eps_b", "pearson_rb",
              "slope_rb"});
  for (const auto& s : res.summary)
    t.row()
        .cell(s.d_min)
        .cell(s.pipeline)
        .cell(s.trials)
        .cell(s.mean_eps_r)
        .cell(s.sem_eps_r)
        .cell(s.mean_eps_b)
        .cell(s.sem_eps_b)
        .cell(s.correlation.pearson)
        .cell(s.correlation.slope);
  return t;
}

std::string monte_carlo_summary_json(const MonteCarloResult& res) {
  json arr = json::array();
  for (const auto& s : res.summary)
    arr.push_back({{"d_min", s.d_min},
                   {"pipeline", s.pipeline},
                   {"trials", s.trials},
                   {"mean_eps_r", s.mean_eps_r},
                   {"mean_eps_b", s.mean_eps_b},
                   {"pearson_rb", s.correlation.pearson},
                   {"slope_rb", s.correlation.slope}});
  return json{{"bins", arr}}.dump();
}

CsvTable fisher_table(const std::vector<FisherRow>& rows) {
  CsvTable t({"x0", "s", "kappa", "measurement", "F_x0", "F_s", "F_kappa"});
  for (const auto& r : rows)
    t.row().cell(r.x0).cell(r.s).cell(r.kappa).cell(r.measurement).cell(r.f_x0).cell(r.f_s).cell(r.f_kappa);
  return t;
}

CsvTable bayes_trajectory_table(const BayesDemoResult& res) {
  CsvTable t({"step", "stage", "photons", "s_mean", "s_var", "kappa_mean", "kappa_var"});
  for (size_t i = 0; i < res.trajectory.size(); ++i) {
    const auto& s = res.trajectory[i];
    t.row()
        .cell(static_cast<std::int64_t>(i))
        .cell(s.stage)
        .cell(s.photons)
        .cell(s.s_mean)
        .cell(s.s_var)
        .cell(s.kappa_mean)
        .cell(s.kappa_var);
  }
  return t;
}

CsvTable posterior_table(const std::vector<std::string>& names, const std::vector<const PosteriorGrid*>& grids) {
  std::vector<std::string> header{"x"};
  header.insert(header.end(), names.begin(), names.end());
  CsvTable t(header);
  if (grids.empty()) return t;
  const Vec& x = grids.front()->grid;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    t.row().cell(x(i));
    for (const auto* g : grids) t.cell(g->density(i));
  }
  return t;
}

std::string bayes_summary_json(const BayesDemoResult& res) {
  json j = {{"constraint", res.rule == SwitchRule::TypeI ? "I" : "II"},
            {"switched", res.switched},
            {"flagged", res.flagged},
            {"di_photons", res.di_photons},
            {"spade_photons", res.spade_photons},
            {"switch_fraction", res.switch_fraction},
            {"variance_history", res.variance_history},
            {"s_mmse", res.separation_posterior.mean()},
            {"kappa_mmse", res.kappa_posterior.mean()},
            {"kappa_flagged", res.kappa_flagged}};
  return j.dump();
}

CsvTable ykl_modes_table(const YklModeTable& table) {
  CsvTable t({"mode", "x", "y", "re", "im"});
  for (size_t k = 0; k < table.modes.size(); ++k) {
    const auto& m = table.modes[k];
    for (Eigen::Index i = 0; i < m.ys.size(); ++i)
      for (Eigen::Index j = 0; j < m.xs.size(); ++j)
        t.row()
            .cell(static_cast<std::int64_t>(k))
            .cell(m.xs(j))
            .cell(m.ys(i))
            .cell(m.values(i, j).real())
            .cell(m.values(i, j).imag());
  }
  return t;
}

}  // namespace nvspade
