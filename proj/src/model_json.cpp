#include <fstream>
#include <sstream>

#include "fhmm/model.hpp"
#include "json.hpp"

namespace fhmm {

namespace {
using nlohmann::json;

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& j) {
  const auto rows = j.size();
  const auto cols = rows ? j[0].size() : 0;
  Matrix m(rows, cols);
  for (size_t r = 0; r < rows; ++r)
    for (size_t c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  return m;
}
}  // namespace

std::string model_to_json(const FhmmModel& model) {
  json j;
  j["version"] = 1;
  j["family"] = family_name(model.emissions.family);
  json phi = json::array(), A = json::array();
  for (const auto& ch : model.chains) {
    json p = json::array();
    for (int k = 0; k < ch.phi.size(); ++k) p.push_back(ch.phi[k]);
    phi.push_back(std::move(p));
    A.push_back(matrix_to_json(ch.A));
  }
  j["phi"] = std::move(phi);
  j["A"] = std::move(A);
  j["mu"] = matrix_to_json(model.emissions.mu);
  j["sigma"] = matrix_to_json(model.emissions.sigma);
  if (model.emissions.family == EmissionFamily::LogNormalCopula) {
    j["R"] = matrix_to_json(model.emissions.R_global);
  } else {
    json sig = json::array();
    for (const auto& S : model.emissions.Sigma_jg) sig.push_back(matrix_to_json(S));
    j["Sigma"] = std::move(sig);
  }
  const auto& inf = model.emissions.inflated;
  j["inflated"] = {{"pi0", inf.pi0}, {"theta", inf.theta},
                   {"eta2", inf.eta2}, {"c", inf.c}};
  j["feature_names"] = model.feature_names;
  return j.dump(2);
}

FhmmModel model_from_json(const std::string& text) {
  json j = json::parse(text);
  FhmmModel model;
  model.emissions.family = family_from_name(j.at("family").get<std::string>());
  for (int i = 0; i < kNumChains; ++i) {
    const auto& p = j.at("phi")[i];
    model.chains[i].phi.resize(p.size());
    for (size_t k = 0; k < p.size(); ++k) model.chains[i].phi[k] = p[k].get<double>();
    model.chains[i].A = matrix_from_json(j.at("A")[i]);
  }
  model.emissions.mu = matrix_from_json(j.at("mu"));
  model.emissions.sigma = matrix_from_json(j.at("sigma"));
  const int E = model.emissions.num_features();
  if (j.contains("R")) {
    model.emissions.R_global = matrix_from_json(j.at("R"));
  } else {
    model.emissions.R_global = Matrix::Identity(E, E);
  }
  if (j.contains("Sigma")) {
    for (int s = 0; s < kNumJointStates; ++s)
      model.emissions.Sigma_jg[s] = matrix_from_json(j.at("Sigma")[s]);
  } else {
    for (auto& S : model.emissions.Sigma_jg) S = Matrix::Identity(E, E);
  }
  const auto& inf = j.at("inflated");
  model.emissions.inflated = {inf.at("pi0").get<double>(),
                              inf.at("theta").get<double>(),
                              inf.at("eta2").get<double>(),
                              inf.at("c").get<double>()};
  model.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  return model;
}

void save_model(const FhmmModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << model_to_json(model) << '\n';
}

FhmmModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return model_from_json(ss.str());
}

}  // namespace fhmm
