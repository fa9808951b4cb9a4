#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "nvspade/bayes.hpp"
#include "nvspade/harness.hpp"
#include "nvspade/information.hpp"
#include "nvspade/io.hpp"
#include "nvspade/measurements.hpp"
#include "nvspade/protocol.hpp"
#include "nvspade/sensing_models.hpp"

namespace py = pybind11;
using namespace nvspade;

namespace {

py::dict posterior_dict(const PosteriorGrid& g) {
  py::dict d;
  d["grid"] = g.grid;
  d["density"] = g.density;
  d["mean"] = g.mean();
  d["variance"] = g.variance();
  d["flagged"] = g.flagged;
  return d;
}

py::dict protocol_dict(const ProtocolResult& r) {
  py::dict out;
  out["seed"] = r.seed;
  out["config_hash"] = r.config_hash;
  out["truth"] = r.truth;
  out["gammas"] = r.gammas;
  out["true_brightnesses"] = r.true_brightnesses;
  out["phi_true"] = r.phi_true;
  py::dict pipes;
  for (const auto& p : r.pipelines) {
    py::dict d;
    d["positions"] = p.positions;
    d["permutation"] = p.permutation;
    d["eps_r"] = p.eps_r;
    d["brightnesses"] = p.brightnesses;
    d["eps_b"] = p.eps_b;
    d["intensities"] = p.intensities;
    d["field_rmse"] = p.field_rmse;
    std::vector<double> phi;
    for (const auto& f : p.fits) phi.push_back(f.phi);
    d["phi"] = phi;
    pipes[py::str(p.name)] = d;
  }
  out["pipelines"] = pipes;
  return out;
}

}  // namespace

PYBIND11_MODULE(_nvspade, m) {
  m.doc() = "Sub-diffraction calibration and field sensing of NV-centre ensembles";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  m.def("gram_matrix", [](const Positions& r) { return gram_matrix(r).entries; }, py::arg("positions"));
  m.def("min_pairwise_separation", &min_pairwise_separation, py::arg("positions"));
  m.def("generate_random_scene", &generate_random_scene, py::arg("k"), py::arg("d_min"), py::arg("seed"),
        py::arg("max_draws") = 10'000'000);

  m.def(
      "pad_probabilities",
      [](const Positions& r, const Vec& b, int order, const Point& origin) {
        PadSpadeConfig c;
        c.max_total_order = order;
        c.origin = origin;
        return pad_probabilities(r, b, c);
      },
      py::arg("positions"), py::arg("brightnesses"), py::arg("max_total_order") = 10,
      py::arg("origin") = Point(Point::Zero()));
  m.def("pad_mode_indices", &pad_mode_indices, py::arg("max_total_order"));

  m.def(
      "helstrom_binary",
      [](double b1, double b2, double overlap) {
        const HelstromResult h = helstrom_binary(b1, b2, overlap);
        return py::make_tuple(h.error_probability, Mat(h.projectors));
      },
      py::arg("b1"), py::arg("b2"), py::arg("overlap"));

  m.def(
      "ykl_measurement",
      [](const Positions& design, const Vec& priors, const Vec& truth_brightnesses) {
        const YklMeasurement y = build_ykl_measurement(design, priors);
        py::dict d;
        d["min_error"] = y.min_error;
        d["converged"] = y.converged;
        d["unitary"] = y.unitary;
        d["psi"] = y.psi;
        if (truth_brightnesses.size() > 0)
          d["probabilities"] = ykl_outcome_probabilities(y, EmitterEnsemble(design, truth_brightnesses));
        return d;
      },
      py::arg("design_positions"), py::arg("priors"), py::arg("truth_brightnesses") = Vec());

  m.def(
      "qfim_two_source",
      [](double x0, double s, double kappa) {
        TwoSourceParams p;
        p.x0 = x0;
        p.s = s;
        p.kappa = kappa;
        return qfim_two_source(p).values;
      },
      py::arg("x0"), py::arg("s"), py::arg("kappa"));
  m.def(
      "qfim_brightness",
      [](const Positions& r, const Vec& b) {
        return qfim_brightness_block(eigenbasis_representation(gram_matrix(r), b)).values;
      },
      py::arg("positions"), py::arg("brightnesses"));
  m.def("optimal_allocation", &optimal_allocation, py::arg("kappa"));
  m.def("allocation_quartic", &allocation_quartic, py::arg("beta"), py::arg("kappa"));

  m.def("odmr_intensity", &odmr_intensity_dimensionless, py::arg("gamma"), py::arg("phi"), py::arg("chi") = 0.5);
  m.def("rabi_intensity", &rabi_intensity_dimensionless, py::arg("gamma"), py::arg("phi"));
  m.def("bspade_xi", &bspade_xi, py::arg("s"), py::arg("eps"));

  m.def("default_config", [] { return config_to_json_string(ExperimentConfig{}); });
  m.def(
      "normalize_config", [](const std::string& text) { return config_to_json_string(config_from_json_string(text)); },
      py::arg("config_json"));
  m.def(
      "config_hash", [](const std::string& text) { return config_hash(config_from_json_string(text)); },
      py::arg("config_json"));

  m.def(
      "run_protocol",
      [](const std::string& text) {
        const ExperimentConfig c = config_from_json_string(text);
        ProtocolResult r;
        {
          py::gil_scoped_release release;
          r = run_protocol(c);
        }
        return protocol_dict(r);
      },
      py::arg("config_json"));

  m.def(
      "run_monte_carlo",
      [](const std::string& text) {
        const ExperimentConfig c = config_from_json_string(text);
        MonteCarloResult r;
        {
          py::gil_scoped_release release;
          r = run_monte_carlo(c);
        }
        py::list rows, summary;
        for (const auto& row : r.rows)
          rows.append(py::dict(py::arg("trial") = row.trial, py::arg("k") = row.k, py::arg("d_min") = row.d_min,
                               py::arg("pipeline") = row.pipeline, py::arg("eps_r") = row.eps_r,
                               py::arg("eps_b") = row.eps_b));
        for (const auto& s : r.summary)
          summary.append(py::dict(py::arg("d_min") = s.d_min, py::arg("pipeline") = s.pipeline,
                                  py::arg("trials") = s.trials, py::arg("mean_eps_r") = s.mean_eps_r,
                                  py::arg("mean_eps_b") = s.mean_eps_b, py::arg("pearson") = s.correlation.pearson));
        return py::dict(py::arg("rows") = rows, py::arg("summary") = summary);
      },
      py::arg("config_json"));

  m.def(
      "run_fisher_sweep",
      [](const std::string& text) {
        py::list out;
        for (const auto& r : run_fisher_sweep(config_from_json_string(text)))
          out.append(py::dict(py::arg("x0") = r.x0, py::arg("s") = r.s, py::arg("kappa") = r.kappa,
                              py::arg("measurement") = r.measurement, py::arg("f_x0") = r.f_x0,
                              py::arg("f_s") = r.f_s, py::arg("f_kappa") = r.f_kappa));
        return out;
      },
      py::arg("config_json"));

  m.def(
      "run_bayes_demo",
      [](const std::string& text) {
        const BayesDemoResult r = run_bayes_demo(config_from_json_string(text));
        py::dict d;
        d["switched"] = r.switched;
        d["flagged"] = r.flagged;
        d["di_photons"] = r.di_photons;
        d["spade_photons"] = r.spade_photons;
        d["switch_fraction"] = r.switch_fraction;
        d["separation_prior"] = posterior_dict(r.separation_prior);
        d["separation_posterior"] = posterior_dict(r.separation_posterior);
        d["kappa_posterior"] = posterior_dict(r.kappa_posterior);
        return d;
      },
      py::arg("config_json"));
}
