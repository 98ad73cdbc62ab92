#include <sstream>

#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "chanimp/bounds.hpp"
#include "chanimp/config.hpp"
#include "chanimp/error.hpp"
#include "chanimp/estimators.hpp"
#include "chanimp/montecarlo.hpp"

namespace py = pybind11;
using namespace chanimp;

namespace {

Method method_from(const std::string& name) { return parse_method(name); }

// Runs the [sweep] table of a TOML document and returns the metrics CSV.
std::string run_sweep(const std::string& toml_text, std::optional<std::uint64_t> seed) {
  RunConfig cfg = parse_run_config(toml_text);
  if (!cfg.sweep) throw ConfigError("sweep", "config has no [sweep] table");
  if (seed) cfg.sweep->seed = *seed;
  std::ostringstream out;
  write_metrics_csv(out, run_study(*cfg.sweep));
  return out.str();
}

}  // namespace

PYBIND11_MODULE(_chanimp, m) {
  m.doc() = "Joint channel and antenna-impedance estimation";
  m.attr("__version__") = CHANIMP_VERSION;

  static py::exception<Error> error(m, "Error", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const DomainError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const Error& e) {
      error(e.what());
    }
  });

  py::class_<Impedance>(m, "Impedance")
      .def(py::init<double, double>(), py::arg("resistance"), py::arg("reactance") = 0.0)
      .def(py::init<cdouble>())
      .def_readonly("resistance", &Impedance::resistance)
      .def_readonly("reactance", &Impedance::reactance)
      .def_property_readonly("value", &Impedance::value)
      .def("__repr__", [](const Impedance& z) {
        std::ostringstream s;
        s << "Impedance(" << z.resistance << ", " << z.reactance << ")";
        return s.str();
      });

  m.def("f_from_impedance", &f_from_impedance, py::arg("antenna"), py::arg("z1"), py::arg("z2"));
  m.def("impedance_from_f", &impedance_from_f, py::arg("f"), py::arg("z1"), py::arg("z2"));
  m.def("effective_channel", &effective_channel, py::arg("path_gain"), py::arg("antenna"),
        py::arg("z1"));
  m.def(
      "zadoff_chu",
      [](std::size_t length, std::size_t root) {
        return CVector(zadoff_chu(length, root, length / 2).symbols());
      },
      py::arg("length") = 64, py::arg("root") = 1);
  m.def("reference_f", [] { return reference_scenario().f(); });

  py::class_<SufficientStats>(m, "SufficientStats")
      .def(py::init<CVector, CVector, double, double, double>(), py::arg("v1"), py::arg("v2"),
           py::arg("s1"), py::arg("s2"), py::arg("noise_var"))
      .def_readonly("v1", &SufficientStats::v1)
      .def_readonly("v2", &SufficientStats::v2)
      .def_readonly("s1", &SufficientStats::s1)
      .def_readonly("s2", &SufficientStats::s2)
      .def_readonly("noise_var", &SufficientStats::noise_var)
      .def_property_readonly("packets", &SufficientStats::packets);

  py::class_<ChannelPrior>(m, "ChannelPrior")
      .def_static("iid", &ChannelPrior::iid, py::arg("packets"), py::arg("sigma_h2") = 1.0)
      .def_static("slow_fading", &ChannelPrior::slow_fading, py::arg("packets"),
                  py::arg("sigma_h2") = 1.0)
      .def_static("exponential", &ChannelPrior::exponential, py::arg("packets"),
                  py::arg("sigma_h2"), py::arg("r"))
      .def_static("explicit", &ChannelPrior::explicit_covariance, py::arg("covariance"))
      .def_property_readonly("packets", &ChannelPrior::packets)
      .def_property_readonly("sigma_h2", &ChannelPrior::sigma_h2)
      .def_property_readonly("is_singular", &ChannelPrior::is_singular)
      .def("covariance", &ChannelPrior::covariance);

  m.def(
      "draw_stats",
      [](const ChannelPrior& prior, double snr_db, std::uint64_t seed) {
        const double nv = prior.sigma_h2() / std::pow(10.0, snr_db / 10.0);
        const auto sc = reference_scenario(nv);
        Rng rng(seed);
        const CVector h = sample_channels(prior, rng);
        return std::make_pair(h, draw_stats(h, sc.f(), sc, rng));
      },
      py::arg("prior"), py::arg("snr_db"), py::arg("seed") = 1,
      "Draws H and its sufficient statistic for the reference scenario.");

  py::class_<RootCandidate>(m, "RootCandidate")
      .def_readonly("f", &RootCandidate::f)
      .def_readonly("loglik", &RootCandidate::loglik)
      .def_readonly("residual", &RootCandidate::residual);

  py::class_<HybridEstimate>(m, "HybridEstimate")
      .def_readonly("h", &HybridEstimate::h)
      .def_readonly("f", &HybridEstimate::f)
      .def_readonly("loglik", &HybridEstimate::loglik)
      .def_readonly("identifiable", &HybridEstimate::identifiable)
      .def_readonly("candidates", &HybridEstimate::candidates)
      .def_property_readonly("method",
                             [](const HybridEstimate& e) { return std::string(to_string(e.method)); });

  m.def(
      "estimate",
      [](const SufficientStats& stats, const ChannelPrior& prior, const std::string& method) {
        return estimate(method_from(method), stats, prior);
      },
      py::arg("stats"), py::arg("prior"), py::arg("method") = "map_ml_general");

  py::class_<HcrbReport>(m, "HcrbReport")
      .def_readonly("h_block", &HcrbReport::h_block)
      .def_readonly("f_bound", &HcrbReport::f_bound);
  m.def("hcrb", &hcrb, py::arg("f"), py::arg("prior"), py::arg("s1"), py::arg("s2"),
        py::arg("noise_var"));
  m.def("asymptotic_ml_limit", &asymptotic_ml_limit, py::arg("f"), py::arg("sigma_h2"),
        py::arg("noise_var"), py::arg("s1"), py::arg("s2"));

  m.def("run_sweep", &run_sweep, py::arg("toml_text"), py::arg("seed") = py::none(),
        "Runs the [sweep] table of a TOML document and returns the metrics CSV.");
}
