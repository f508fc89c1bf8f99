#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fhmm/decode.hpp"
#include "fhmm/evaluate.hpp"
#include "fhmm/inference.hpp"
#include "fhmm/learning.hpp"
#include "fhmm/mi.hpp"
#include "fhmm/model.hpp"

namespace py = pybind11;
using namespace fhmm;

namespace {

Eigen::VectorXi path_to_vector(const StatePath& p) {
  Eigen::VectorXi out(p.states.size());
  for (size_t t = 0; t < p.states.size(); ++t)
    out[t] = joint_index(p.states[t]);
  return out;
}

DecodeConfig make_config(const std::string& weighting, double omega, double v,
                         const std::string& rule,
                         const std::optional<Matrix>& weights) {
  DecodeConfig cfg;
  cfg.weighting = weighting == "raw"          ? Weighting::RawMi
                  : weighting == "normalized" ? Weighting::NormalizedMi
                                              : Weighting::None;
  cfg.omega = omega;
  cfg.v = v;
  cfg.reclassify = rule == "merge_to_clear"      ? ReclassifyRule::MergeToClear
                   : rule == "humidity_wind_rule"
                       ? ReclassifyRule::HumidityWindRule
                       : ReclassifyRule::None;
  if (weights) {
    WeightMatrix w;
    w.w = *weights;
    cfg.weights = w;
  }
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_pyfhmm, m) {
  m.doc() = "two-chain factorial HMM: inference, learning, decoding";

  py::class_<FhmmModel>(m, "Model")
      .def_static("from_json", &model_from_json)
      .def_static("load", &load_model)
      .def("to_json", &model_to_json)
      .def("save", &save_model)
      .def_property_readonly("feature_names",
                             [](const FhmmModel& mo) { return mo.feature_names; })
      .def_property_readonly(
          "mu", [](const FhmmModel& mo) { return mo.emissions.mu; })
      .def_property_readonly(
          "sigma", [](const FhmmModel& mo) { return mo.emissions.sigma; })
      .def_property_readonly(
          "R", [](const FhmmModel& mo) { return mo.emissions.R_global; })
      .def_property_readonly("A", [](const FhmmModel& mo) {
        return std::vector<Matrix>{mo.chains[0].A, mo.chains[1].A};
      });

  m.def("validate", [](const FhmmModel& mo) {
    std::vector<std::string> out;
    for (const auto& v : validate_model(mo).violations)
      out.push_back(v.location + ": " + v.message);
    return out;
  });

  m.def(
      "sample",
      [](const FhmmModel& mo, int T, std::uint64_t seed) {
        const auto s = sample_sequence(mo, T, seed);
        Eigen::VectorXi states(T);
        for (int t = 0; t < T; ++t) states[t] = s.states[t];
        return py::make_tuple(s.obs, states);
      },
      py::arg("model"), py::arg("length"), py::arg("seed") = 0);

  m.def("loglik", [](const FhmmModel& mo, const Matrix& obs) {
    return forward(mo, obs).loglik;
  });

  m.def("posteriors", [](const FhmmModel& mo, const Matrix& obs) {
    const auto p = posteriors(mo, obs, false);
    return py::make_tuple(p.gamma, p.loglik);
  });

  m.def(
      "viterbi",
      [](const FhmmModel& mo, const Matrix& obs, const std::string& weighting,
         double omega, double v, const std::string& reclassify,
         const std::optional<Matrix>& weights) {
        const auto cfg = make_config(weighting, omega, v, reclassify, weights);
        StatePath p = fhmm::viterbi(mo, obs, cfg);
        p = fhmm::reclassify(p, obs, cfg.reclassify);
        return py::make_tuple(path_to_vector(p), p.score);
      },
      py::arg("model"), py::arg("obs"), py::arg("weighting") = "none",
      py::arg("omega") = 1.0, py::arg("v") = 1.0,
      py::arg("reclassify") = "none", py::arg("weights") = std::nullopt);

  m.def("forecast", [](const FhmmModel& mo, const Vector& alpha_T, int h) {
    return forecast(mo, alpha_T, h);
  });

  m.def(
      "supervised_fit",
      [](const Matrix& obs, const Eigen::MatrixXi& labels,
         const std::string& family) {
        return supervised_fit(obs, labels, family_from_name(family));
      },
      py::arg("obs"), py::arg("labels"), py::arg("family") = "LogNormalCopula");

  m.def(
      "em_fit",
      [](const Matrix& obs, const FhmmModel& init, int max_iters, double tol) {
        EmConfig cfg;
        cfg.max_iters = max_iters;
        cfg.tol = tol;
        const auto r = em_fit(obs, init, cfg);
        return py::make_tuple(r.model, r.loglik_trace, r.converged);
      },
      py::arg("obs"), py::arg("init"), py::arg("max_iters") = 200,
      py::arg("tol") = 1e-6);

  m.def(
      "kmeans_init",
      [](const Matrix& obs, std::uint64_t seed, const std::string& family) {
        return kmeans_init(obs, default_class_priors(), seed,
                           family_from_name(family));
      },
      py::arg("obs"), py::arg("seed") = 0, py::arg("family") = "LogNormalCopula");

  m.def(
      "knn_mi",
      [](const Vector& x, const std::vector<int>& z, int k) {
        const auto r = fhmm::knn_mi(x, z, k);
        return py::make_tuple(r.value, r.degenerate);
      },
      py::arg("x"), py::arg("z"), py::arg("k") = 3);

  m.def(
      "mi_weights",
      [](const Matrix& obs, const std::vector<int>& labels, double omega,
         const std::string& mode, int k) {
        const auto mi = mi_state_conditional(obs, labels, k);
        return weight_matrix(mi.per_state, omega,
                             mode == "raw" ? WeightMode::Raw
                                           : WeightMode::Normalized)
            .w;
      },
      py::arg("obs"), py::arg("labels"), py::arg("omega") = 1.0,
      py::arg("mode") = "normalized", py::arg("k") = 3);

  m.def("f1_scores", [](const Eigen::Matrix3d& counts) {
    ConfusionMatrix cm;
    cm.counts = counts;
    const auto r = fhmm::f1_scores(cm);
    return py::make_tuple(r.per_class, r.micro, r.macro);
  });

  m.def("confusion", [](const std::vector<int>& truth,
                        const std::vector<int>& pred) {
    return fhmm::confusion(truth, pred).counts;
  });

  m.def("roc_auc", [](const Matrix& scores, const std::vector<int>& truth) {
    const auto r = fhmm::roc_auc(scores, truth);
    py::dict out;
    py::list per_class;
    for (const auto& c : r.per_class)
      per_class.append(c.defined ? py::object(py::float_(c.auc))
                                 : py::object(py::none()));
    out["per_class"] = per_class;
    out["micro"] = r.micro_auc;
    out["macro"] = r.macro_auc;
    return out;
  });

  m.def("kron_transition", &kron_transition);
}
