// fhmm: train, decode, evaluate, forecast, simulate, gridsearch, mi-report

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>

#include "fhmm/decode.hpp"
#include "fhmm/evaluate.hpp"
#include "fhmm/inference.hpp"
#include "fhmm/io.hpp"
#include "fhmm/learning.hpp"
#include "fhmm/mi.hpp"
#include "fhmm/model.hpp"

namespace {

using fhmm::Matrix;
using fhmm::Vector;
using json = nlohmann::json;

// User-facing problems (bad files, missing labels) exit 1; library faults
// exit 2.
struct UserError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

struct VariantSpec {
  fhmm::EmissionFamily family;
  fhmm::Weighting weighting;
  bool identity_correlation;  // "regular" model: no dependence term
  double omega = 1.0;
  double v = 1.0;
};

VariantSpec variant_spec(const std::string& name) {
  using F = fhmm::EmissionFamily;
  using W = fhmm::Weighting;
  if (name == "m0") return {F::LogNormalCopula, W::None, true};
  if (name == "m1a") return {F::JointGaussian, W::None, false};
  if (name == "m1b") return {F::JointGaussian, W::NormalizedMi, false};
  if (name == "m2a") return {F::LogNormalCopula, W::None, false};
  if (name == "m2b") return {F::LogNormalCopula, W::RawMi, false};
  if (name == "m2c") return {F::LogNormalCopula, W::NormalizedMi, false};
  if (name == "m2d")
    return {F::LogNormalCopula, W::NormalizedMi, false, 1.10, 16.47};
  throw UserError("unknown variant: " + name);
}

fhmm::Weighting parse_weighting(const std::string& s) {
  if (s == "none") return fhmm::Weighting::None;
  if (s == "raw") return fhmm::Weighting::RawMi;
  if (s == "normalized") return fhmm::Weighting::NormalizedMi;
  throw UserError("unknown weighting: " + s);
}

fhmm::ReclassifyRule parse_rule(const std::string& s) {
  if (s == "merge_to_clear") return fhmm::ReclassifyRule::MergeToClear;
  if (s == "humidity_wind_rule") return fhmm::ReclassifyRule::HumidityWindRule;
  if (s == "none") return fhmm::ReclassifyRule::None;
  throw UserError("unknown reclassify rule: " + s);
}

fhmm::Dataset load_dataset(const std::string& path, double wind_floor) {
  try {
    fhmm::LoadOptions opts;
    opts.wind_floor = wind_floor;
    return fhmm::load_csv(path, opts);
  } catch (const std::exception& e) {
    throw UserError(e.what());
  }
}

fhmm::FhmmModel load_model_or_fail(const std::string& path) {
  try {
    return fhmm::load_model(path);
  } catch (const std::exception& e) {
    throw UserError(e.what());
  }
}

std::vector<int> joint_labels(const Eigen::MatrixXi& labels) {
  std::vector<int> out(labels.rows());
  for (Eigen::Index t = 0; t < labels.rows(); ++t)
    out[t] = fhmm::joint_index(labels(t, 0), labels(t, 1));
  return out;
}

std::vector<int> three_class_truth(const Eigen::MatrixXi& labels) {
  std::vector<int> out(labels.rows());
  for (Eigen::Index t = 0; t < labels.rows(); ++t)
    out[t] = labels(t, 0) == 1 ? fhmm::kHaze
             : labels(t, 1) == 1 ? fhmm::kDust
                                 : fhmm::kClear;
  return out;
}

fhmm::WeightMatrix mi_weights(const fhmm::Dataset& data,
                              fhmm::Weighting weighting, double omega,
                              int k) {
  if (!data.labels)
    throw UserError("MI weighting requires label columns in the input CSV");
  const fhmm::MiEstimate mi =
      fhmm::mi_state_conditional(data.feature_matrix, joint_labels(*data.labels), k);
  const auto mode = weighting == fhmm::Weighting::RawMi
                        ? fhmm::WeightMode::Raw
                        : fhmm::WeightMode::Normalized;
  return fhmm::weight_matrix(mi.per_state, omega, mode);
}

fhmm::DecodeConfig build_decode_config(const fhmm::Dataset& data,
                                       const std::string& weighting,
                                       double omega, double v,
                                       const std::string& rule, int mi_k) {
  fhmm::DecodeConfig cfg;
  cfg.weighting = parse_weighting(weighting);
  cfg.omega = omega;
  cfg.v = v;
  cfg.reclassify = parse_rule(rule);
  if (cfg.weighting != fhmm::Weighting::None)
    cfg.weights = mi_weights(data, cfg.weighting, omega, mi_k);
  return cfg;
}

// Three-class posterior scores; (1,1) mass follows the reclassification rule
// (merge_to_clear -> Clear, otherwise Haze, the rule's default branch).
Matrix class_scores(const Matrix& gamma, fhmm::ReclassifyRule rule) {
  Matrix s(gamma.rows(), 3);
  s.col(fhmm::kClear) = gamma.col(0);
  s.col(fhmm::kDust) = gamma.col(1);
  s.col(fhmm::kHaze) = gamma.col(2);
  if (rule == fhmm::ReclassifyRule::MergeToClear)
    s.col(fhmm::kClear) += gamma.col(3);
  else
    s.col(fhmm::kHaze) += gamma.col(3);
  return s;
}

int cmd_train(const std::string& input, const std::string& variant,
              const std::string& mode, const std::string& out,
              std::uint64_t seed, int max_iters, double tol,
              double wind_floor) {
  const VariantSpec vs = variant_spec(variant);
  const fhmm::Dataset data = load_dataset(input, wind_floor);
  fhmm::FhmmModel model;
  if (mode == "supervised") {
    if (!data.labels) throw UserError("supervised training requires labels");
    model = fhmm::supervised_fit(data.feature_matrix, *data.labels, vs.family);
  } else if (mode == "em") {
    fhmm::FhmmModel init = fhmm::kmeans_init(
        data.feature_matrix, fhmm::default_class_priors(), seed, vs.family);
    fhmm::EmConfig cfg;
    cfg.max_iters = max_iters;
    cfg.tol = tol;
    cfg.seed = seed;
    auto res = fhmm::em_fit(data.feature_matrix, init, cfg);
    model = res.model;
    std::cerr << "em: " << res.iterations << " iterations, loglik "
              << fmt(res.loglik_trace.back())
              << (res.converged ? " (converged)\n" : " (max iters)\n");
  } else {
    throw UserError("unknown mode: " + mode);
  }
  if (vs.identity_correlation)
    model.emissions.R_global = Matrix::Identity(model.num_features(),
                                                model.num_features());
  fhmm::save_model(model, out);
  return 0;
}

int cmd_decode(const std::string& model_path, const std::string& input,
               const std::string& out, const std::string& weighting,
               double omega, double v, const std::string& rule, int mi_k,
               double wind_floor) {
  const fhmm::FhmmModel model = load_model_or_fail(model_path);
  const fhmm::Dataset data = load_dataset(input, wind_floor);
  const fhmm::DecodeConfig cfg =
      build_decode_config(data, weighting, omega, v, rule, mi_k);
  fhmm::StatePath path = fhmm::viterbi(model, data.feature_matrix, cfg);
  path = fhmm::reclassify(path, data.feature_matrix, cfg.reclassify);

  static const char* kNames[] = {"Clear", "Dust", "Haze", "Haze&Dust"};
  std::ostringstream os;
  os << "timestamp,k1,k2,class_label\n";
  for (size_t t = 0; t < path.states.size(); ++t) {
    const auto& s = path.states[t];
    os << data.records[t].timestamp << ',' << s.k1 << ',' << s.k2 << ','
       << kNames[fhmm::joint_index(s)] << '\n';
  }
  fhmm::atomic_write(out, os.str());
  return 0;
}

int cmd_evaluate(const std::string& model_path, const std::string& input,
                 const std::string& out, const std::string& weighting,
                 double omega, double v, const std::string& rule, int mi_k,
                 double wind_floor, const std::string& roc_out) {
  const fhmm::FhmmModel model = load_model_or_fail(model_path);
  const fhmm::Dataset data = load_dataset(input, wind_floor);
  if (!data.labels) throw UserError("evaluate requires label columns");
  fhmm::DecodeConfig cfg =
      build_decode_config(data, weighting, omega, v, rule, mi_k);
  if (cfg.reclassify == fhmm::ReclassifyRule::None)
    cfg.reclassify = fhmm::ReclassifyRule::MergeToClear;

  fhmm::StatePath path = fhmm::viterbi(model, data.feature_matrix, cfg);
  path = fhmm::reclassify(path, data.feature_matrix, cfg.reclassify);
  const std::vector<int> truth = three_class_truth(*data.labels);
  const auto cm = fhmm::confusion(truth, fhmm::to_three_class(path.states));
  const auto f1 = fhmm::f1_scores(cm);

  const auto post = fhmm::posteriors(model, data.feature_matrix, false);
  const auto roc =
      fhmm::roc_auc(class_scores(post.gamma, cfg.reclassify), truth);

  json j;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) j["confusion"][r][c] = cm.counts(r, c);
  j["per_class_f1"] = {f1.per_class[0], f1.per_class[1], f1.per_class[2]};
  j["micro_f1"] = f1.micro;
  j["macro_f1"] = f1.macro;
  for (int c = 0; c < 3; ++c)
    j["auc"]["per_class"].push_back(roc.per_class[c].defined
                                        ? json(roc.per_class[c].auc)
                                        : json(nullptr));
  j["auc"]["micro"] = roc.micro_auc;
  j["auc"]["macro"] = roc.macro_auc;
  fhmm::atomic_write(out, j.dump(2) + "\n");

  if (!roc_out.empty()) {
    std::ostringstream os;
    os << "class,fpr,tpr\n";
    static const char* kCls[] = {"Clear", "Haze", "Dust"};
    for (int c = 0; c < 3; ++c)
      for (const auto& [fpr, tpr] : roc.per_class[c].points)
        os << kCls[c] << ',' << fmt(fpr) << ',' << fmt(tpr) << '\n';
    fhmm::atomic_write(roc_out, os.str());
  }
  return 0;
}

int cmd_forecast(const std::string& model_path, const std::string& input,
                 int horizon, const std::string& out, double wind_floor) {
  if (horizon < 1) throw UserError("horizon must be >= 1");
  const fhmm::FhmmModel model = load_model_or_fail(model_path);
  const fhmm::Dataset data = load_dataset(input, wind_floor);
  const auto fw = fhmm::forward(model, data.feature_matrix);
  const Vector alpha_T = fw.alpha.row(fw.alpha.rows() - 1);
  std::ostringstream os;
  os << "h,p_clear,p_haze,p_dust,p_both\n";
  for (int h = 1; h <= horizon; ++h) {
    const Vector p = fhmm::forecast(model, alpha_T, h);
    os << h << ',' << fmt(p[0]) << ',' << fmt(p[2]) << ',' << fmt(p[1]) << ','
       << fmt(p[3]) << '\n';
  }
  fhmm::atomic_write(out, os.str());
  return 0;
}

int cmd_simulate(const std::string& model_path, int length,
                 std::uint64_t seed, const std::string& out) {
  if (length < 1) throw UserError("length must be >= 1");
  const fhmm::FhmmModel model = load_model_or_fail(model_path);
  const auto seq = fhmm::sample_sequence(model, length, seed);
  std::ostringstream os;
  os << "timestamp,pm10,wind,visibility,humidity,label_haze,label_dust\n";
  const long epoch_days = 18262;  // 2020-01-01 in days since 1970-01-01
  for (int t = 0; t < length; ++t) {
    // synthetic hourly timestamps starting 2020-01-01T00:00
    const long days = epoch_days + t / 24;
    const long z = days + 719468;
    const long era = z / 146097;
    const long doe = z - era * 146097;
    const long yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const long doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const long mp = (5 * doy + 2) / 153;
    const long d = doy - (153 * mp + 2) / 5 + 1;
    const long m = mp < 10 ? mp + 3 : mp - 9;
    const long y = yoe + era * 400 + (m <= 2 ? 1 : 0);
    char ts[48];
    std::snprintf(ts, sizeof ts, "%04ld-%02ld-%02ldT%02d:00:00", y, m, d,
                  t % 24);
    const auto s = fhmm::joint_state(seq.states[t]);
    os << ts;
    for (int i = 0; i < seq.obs.cols(); ++i) os << ',' << fmt(seq.obs(t, i));
    os << ',' << s.k1 << ',' << s.k2 << '\n';
  }
  fhmm::atomic_write(out, os.str());
  return 0;
}

std::tuple<double, double, int> parse_range(const std::string& s) {
  double lo, hi;
  int steps;
  char c1, c2;
  std::istringstream is(s);
  if (!(is >> lo >> c1 >> hi >> c2 >> steps) || c1 != ':' || c2 != ':' ||
      steps < 1)
    throw UserError("bad range (want LO:HI:STEPS): " + s);
  return {lo, hi, steps};
}

int cmd_gridsearch(const std::string& model_path, const std::string& input,
                   const std::string& omega_range, const std::string& v_range,
                   const std::string& out, const std::string& weighting,
                   const std::string& rule, int mi_k, double wind_floor) {
  const fhmm::FhmmModel model = load_model_or_fail(model_path);
  const fhmm::Dataset data = load_dataset(input, wind_floor);
  if (!data.labels) throw UserError("gridsearch requires label columns");
  const auto [olo, ohi, osteps] = parse_range(omega_range);
  const auto [vlo, vhi, vsteps] = parse_range(v_range);
  fhmm::DecodeConfig base =
      build_decode_config(data, weighting, 1.0, 1.0, rule, mi_k);
  const auto res = fhmm::grid_search(model, data.feature_matrix, *data.labels,
                                     base, olo, ohi, osteps, vlo, vhi, vsteps);
  std::ostringstream os;
  os << "omega,v,micro_f1,macro_f1\n";
  for (const auto& p : res.points)
    os << fmt(p.omega) << ',' << fmt(p.v) << ',' << fmt(p.micro_f1) << ','
       << fmt(p.macro_f1) << '\n';
  fhmm::atomic_write(out, os.str());
  const auto& b = res.points[res.best_index];
  std::cout << "best: omega=" << fmt(b.omega) << " v=" << fmt(b.v)
            << " micro_f1=" << fmt(b.micro_f1) << " macro_f1="
            << fmt(b.macro_f1) << '\n';
  return 0;
}

int cmd_mi_report(const std::string& input, int k, const std::string& out,
                  const std::string& delta_out, int bins, double wind_floor) {
  const fhmm::Dataset data = load_dataset(input, wind_floor);
  if (!data.labels) throw UserError("mi-report requires label columns");
  const auto labels = joint_labels(*data.labels);
  const auto mi = fhmm::mi_state_conditional(data.feature_matrix, labels, k);
  const auto w =
      fhmm::weight_matrix(mi.per_state, 1.0, fhmm::WeightMode::Normalized);

  static const char* kFeat[] = {"pm10", "wind", "visibility", "humidity"};
  static const char* kState[] = {"clear", "dust", "haze", "haze_dust"};
  std::ostringstream os;
  os << "state,feature,mi,weight\n";
  for (int s = 0; s < fhmm::kNumJointStates; ++s)
    for (int i = 0; i < 4; ++i)
      os << kState[s] << ',' << kFeat[i] << ','
         << fmt(mi.fallback[s] ? 0.0 : mi.per_state(s, i)) << ','
         << fmt(w.w(i, s)) << '\n';
  fhmm::atomic_write(out, os.str());

  if (!delta_out.empty()) {
    std::ostringstream ds;
    ds << "feature,bin_lo,bin_hi,class,delta_i\n";
    for (int i = 0; i < 4; ++i) {
      // binary indicator per the dominant non-clear class: one-vs-rest on
      // each state gives 4 tables; keep the joint-label decomposition
      const auto dec =
          fhmm::local_mi_decomposition(data.feature_matrix.col(i), labels, bins);
      for (const auto& b : dec.bins)
        ds << kFeat[i] << ',' << fmt(b.lo) << ',' << fmt(b.hi) << ','
           << kState[b.cls] << ',' << fmt(b.delta_i) << '\n';
    }
    fhmm::atomic_write(delta_out, ds.str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"two-chain factorial HMM for joint haze/dust classification"};
  app.require_subcommand(1);

  std::string input, model_path, out, variant = "m2c", mode = "supervised";
  std::string weighting = "none", rule = "merge_to_clear";
  std::string omega_range, v_range, roc_out, delta_out;
  std::uint64_t seed = 0;
  int max_iters = 200, horizon = 24, length = 1000, mi_k = 3, bins = 20;
  double tol = 1e-6, omega = 1.0, v = 1.0, wind_floor = 0.05;

  auto* train = app.add_subcommand("train", "fit a model from CSV data");
  train->add_option("--input", input)->required();
  train->add_option("--variant", variant)
      ->check(CLI::IsMember({"m0", "m1a", "m1b", "m2a", "m2b", "m2c", "m2d"}));
  train->add_option("--mode", mode)->check(CLI::IsMember({"supervised", "em"}));
  train->add_option("--out", out)->required();
  train->add_option("--seed", seed);
  train->add_option("--max-iters", max_iters);
  train->add_option("--tol", tol);
  train->add_option("--wind-floor", wind_floor);

  auto* decode = app.add_subcommand("decode", "Viterbi-decode a CSV");
  decode->add_option("--model", model_path)->required();
  decode->add_option("--input", input)->required();
  decode->add_option("--out", out)->required();
  decode->add_option("--omega", omega);
  decode->add_option("--v", v);
  decode->add_option("--weighting", weighting)
      ->check(CLI::IsMember({"none", "raw", "normalized"}));
  decode->add_option("--reclassify", rule)
      ->check(CLI::IsMember({"merge_to_clear", "humidity_wind_rule", "none"}));
  decode->add_option("--mi-k", mi_k);
  decode->add_option("--wind-floor", wind_floor);

  auto* evaluate = app.add_subcommand("evaluate", "decode and score vs labels");
  evaluate->add_option("--model", model_path)->required();
  evaluate->add_option("--input", input)->required();
  evaluate->add_option("--out", out)->required();
  evaluate->add_option("--omega", omega);
  evaluate->add_option("--v", v);
  evaluate->add_option("--weighting", weighting)
      ->check(CLI::IsMember({"none", "raw", "normalized"}));
  evaluate->add_option("--reclassify", rule)
      ->check(CLI::IsMember({"merge_to_clear", "humidity_wind_rule", "none"}));
  evaluate->add_option("--mi-k", mi_k);
  evaluate->add_option("--roc-out", roc_out);
  evaluate->add_option("--wind-floor", wind_floor);

  auto* forecast = app.add_subcommand("forecast", "h-step state probabilities");
  forecast->add_option("--model", model_path)->required();
  forecast->add_option("--input", input)->required();
  forecast->add_option("--horizon", horizon);
  forecast->add_option("--out", out)->required();
  forecast->add_option("--wind-floor", wind_floor);

  auto* simulate = app.add_subcommand("simulate", "sample a synthetic CSV");
  simulate->add_option("--model", model_path)->required();
  simulate->add_option("--length", length);
  simulate->add_option("--seed", seed);
  simulate->add_option("--out", out)->required();

  auto* gridsearch = app.add_subcommand("gridsearch", "(omega, v) F1 landscape");
  gridsearch->add_option("--model", model_path)->required();
  gridsearch->add_option("--input", input)->required();
  gridsearch->add_option("--omega-range", omega_range)->required();
  gridsearch->add_option("--v-range", v_range)->required();
  gridsearch->add_option("--out", out)->required();
  gridsearch->add_option("--weighting", weighting)
      ->check(CLI::IsMember({"none", "raw", "normalized"}));
  gridsearch->add_option("--reclassify", rule);
  gridsearch->add_option("--mi-k", mi_k);
  gridsearch->add_option("--wind-floor", wind_floor);

  auto* mi_report = app.add_subcommand("mi-report", "per-state MI and weights");
  mi_report->add_option("--input", input)->required();
  mi_report->add_option("--k", mi_k);
  mi_report->add_option("--out", out)->required();
  mi_report->add_option("--delta-out", delta_out);
  mi_report->add_option("--bins", bins);
  mi_report->add_option("--wind-floor", wind_floor);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (app.got_subcommand(train))
      return cmd_train(input, variant, mode, out, seed, max_iters, tol,
                       wind_floor);
    if (app.got_subcommand(decode))
      return cmd_decode(model_path, input, out, weighting, omega, v, rule,
                        mi_k, wind_floor);
    if (app.got_subcommand(evaluate))
      return cmd_evaluate(model_path, input, out, weighting, omega, v, rule,
                          mi_k, wind_floor, roc_out);
    if (app.got_subcommand(forecast))
      return cmd_forecast(model_path, input, horizon, out, wind_floor);
    if (app.got_subcommand(simulate))
      return cmd_simulate(model_path, length, seed, out);
    if (app.got_subcommand(gridsearch))
      return cmd_gridsearch(model_path, input, omega_range, v_range, out,
                            weighting, rule, mi_k, wind_floor);
    if (app.got_subcommand(mi_report))
      return cmd_mi_report(input, mi_k, out, delta_out, bins, wind_floor);
  } catch (const UserError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
