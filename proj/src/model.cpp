#include "fhmm/model.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "fhmm/special.hpp"

namespace fhmm {

namespace {
constexpr double kStochasticTol = 1e-12;
constexpr double kEigFloor = 1e-6;

void check_stochastic(const Matrix& A, const std::string& loc,
                      std::vector<Violation>& out) {
  for (Eigen::Index r = 0; r < A.rows(); ++r) {
    double sum = 0.0;
    for (Eigen::Index c = 0; c < A.cols(); ++c) {
      if (A(r, c) < 0.0) {
        out.push_back({loc, "negative entry at row " + std::to_string(r)});
        return;
      }
      sum += A(r, c);
    }
    if (std::abs(sum - 1.0) > kStochasticTol) {
      out.push_back({loc, "row " + std::to_string(r) + " not stochastic (sum=" +
                              std::to_string(sum) + ")"});
      return;
    }
  }
}
}  // namespace

std::string family_name(EmissionFamily f) {
  return f == EmissionFamily::JointGaussian ? "JointGaussian" : "LogNormalCopula";
}

EmissionFamily family_from_name(const std::string& name) {
  if (name == "JointGaussian") return EmissionFamily::JointGaussian;
  if (name == "LogNormalCopula") return EmissionFamily::LogNormalCopula;
  throw std::invalid_argument("unknown emission family: " + name);
}

ValidationResult validate_model(const FhmmModel& model) {
  ValidationResult res;
  const int E = model.num_features();
  for (int j = 0; j < kNumChains; ++j) {
    const auto& ch = model.chains[j];
    const std::string loc = "chains[" + std::to_string(j) + "]";
    if (ch.phi.size() != kStatesPerChain) {
      res.violations.push_back({loc + ".phi", "wrong length"});
      continue;
    }
    double psum = 0.0;
    bool neg = false;
    for (int k = 0; k < kStatesPerChain; ++k) {
      if (ch.phi[k] < 0.0) neg = true;
      psum += ch.phi[k];
    }
    if (neg) res.violations.push_back({loc + ".phi", "negative entry"});
    if (std::abs(psum - 1.0) > kStochasticTol)
      res.violations.push_back({loc + ".phi", "does not sum to 1"});
    if (ch.A.rows() != kStatesPerChain || ch.A.cols() != kStatesPerChain)
      res.violations.push_back({loc + ".A", "wrong shape"});
    else
      check_stochastic(ch.A, loc + ".A", res.violations);
  }

  const auto& em = model.emissions;
  if (em.mu.rows() != kNumJointStates || em.sigma.rows() != kNumJointStates ||
      em.sigma.cols() != em.mu.cols()) {
    res.violations.push_back({"emissions", "mu/sigma shape mismatch"});
    return res;
  }
  if (!model.feature_names.empty() &&
      static_cast<int>(model.feature_names.size()) != E)
    res.violations.push_back({"feature_names", "length does not match E"});
  for (int s = 0; s < kNumJointStates; ++s)
    for (int i = 0; i < E; ++i)
      if (!(em.sigma(s, i) > 0.0)) {
        res.violations.push_back(
            {"emissions.sigma", "nonpositive sigma at state " + std::to_string(s) +
                                    " feature " + std::to_string(i)});
        s = kNumJointStates;  // report first only for this block
        break;
      }

  const auto& inf = em.inflated;
  if (!(inf.pi0 > 0.0 && inf.pi0 < 1.0))
    res.violations.push_back({"emissions.inflated.pi0", "outside (0,1)"});
  if (!(inf.eta2 > 0.0))
    res.violations.push_back({"emissions.inflated.eta2", "nonpositive"});
  if (!(inf.c > 0.0))
    res.violations.push_back({"emissions.inflated.c", "nonpositive"});

  if (em.family == EmissionFamily::LogNormalCopula) {
    if (em.R_global.rows() != E || em.R_global.cols() != E) {
      res.violations.push_back({"emissions.R_global", "wrong shape"});
    } else {
      if (!em.R_global.isApprox(em.R_global.transpose(), 1e-12))
        res.violations.push_back({"emissions.R_global", "not symmetric"});
      for (int i = 0; i < E; ++i)
        if (std::abs(em.R_global(i, i) - 1.0) > 1e-10) {
          res.violations.push_back({"emissions.R_global", "diagonal not unit"});
          break;
        }
      Eigen::SelfAdjointEigenSolver<Matrix> es(em.R_global,
                                               Eigen::EigenvaluesOnly);
      if (es.eigenvalues().minCoeff() < kEigFloor * (1.0 - 1e-6))
        res.violations.push_back(
            {"emissions.R_global", "smallest eigenvalue below floor"});
    }
  } else {
    for (int s = 0; s < kNumJointStates; ++s) {
      const Matrix& S = em.Sigma_jg[s];
      const std::string loc = "emissions.Sigma_jg[" + std::to_string(s) + "]";
      if (S.rows() != E || S.cols() != E) {
        res.violations.push_back({loc, "wrong shape"});
        continue;
      }
      if (!S.isApprox(S.transpose(), 1e-10)) {
        res.violations.push_back({loc, "not symmetric"});
        continue;
      }
      Eigen::SelfAdjointEigenSolver<Matrix> es(S, Eigen::EigenvaluesOnly);
      if (es.eigenvalues().minCoeff() < -1e-10)
        res.violations.push_back({loc, "not positive semidefinite"});
    }
  }
  return res;
}

void require_valid(const FhmmModel& model) {
  auto res = validate_model(model);
  if (!res.ok())
    throw std::invalid_argument("invalid model: " + res.violations[0].location +
                                ": " + res.violations[0].message);
}

Matrix kron_transition(const Matrix& A1, const Matrix& A2) {
  std::vector<Violation> v;
  check_stochastic(A1, "A1", v);
  check_stochastic(A2, "A2", v);
  if (!v.empty())
    throw std::invalid_argument("kron_transition: " + v[0].location + ": " +
                                v[0].message);
  const Eigen::Index K1 = A1.rows(), K2 = A2.rows();
  Matrix out(K1 * K2, K1 * K2);
  for (Eigen::Index a = 0; a < K1; ++a)
    for (Eigen::Index b = 0; b < K2; ++b)
      for (Eigen::Index c = 0; c < K1; ++c)
        for (Eigen::Index d = 0; d < K2; ++d)
          out(a * K2 + b, c * K2 + d) = A1(a, c) * A2(b, d);
  return out;
}

SampledSequence sample_sequence(const FhmmModel& model, int T,
                                std::uint64_t seed) {
  if (T < 1) throw std::invalid_argument("sample_sequence: T < 1");
  require_valid(model);
  const int E = model.num_features();
  const auto& em = model.emissions;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  auto draw_discrete = [&](const Vector& p) {
    double u = unif(rng), acc = 0.0;
    for (int k = 0; k < p.size(); ++k) {
      acc += p[k];
      if (u < acc) return k;
    }
    return static_cast<int>(p.size()) - 1;
  };

  // Lower-triangular factors for correlated normal draws.
  std::array<Matrix, kNumJointStates> chol;
  if (em.family == EmissionFamily::LogNormalCopula) {
    Eigen::LLT<Matrix> llt(em.R_global);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("sample_sequence: R_global not positive definite");
    chol.fill(llt.matrixL());
  } else {
    for (int s = 0; s < kNumJointStates; ++s) {
      Matrix S = em.Sigma_jg[s];
      S.diagonal().array() += 1e-12;  // PSD guard
      Eigen::LLT<Matrix> llt(S);
      if (llt.info() != Eigen::Success)
        throw std::runtime_error("sample_sequence: Sigma_jg[" +
                                 std::to_string(s) + "] not factorizable");
      chol[s] = llt.matrixL();
    }
  }

  SampledSequence out;
  out.states.resize(T);
  out.obs.resize(T, E);

  std::array<int, kNumChains> k{};
  for (int t = 0; t < T; ++t) {
    for (int j = 0; j < kNumChains; ++j) {
      if (t == 0)
        k[j] = draw_discrete(model.chains[j].phi);
      else
        k[j] = draw_discrete(model.chains[j].A.row(k[j]).transpose());
    }
    const int s = joint_index(k[0], k[1]);
    out.states[t] = s;

    Vector e(E);
    for (int i = 0; i < E; ++i) e[i] = gauss(rng);
    e = chol[s] * e;

    const bool inflate_state = (s == 0);
    const bool atom = inflate_state && unif(rng) < em.inflated.pi0;
    for (int i = 0; i < E; ++i) {
      if (inflate_state && i == kVisibilityDim) {
        if (atom) {
          out.obs(t, i) = em.inflated.c;
        } else {
          double z = e[i];
          if (em.family == EmissionFamily::JointGaussian) z = gauss(rng);
          out.obs(t, i) = std::exp(em.inflated.theta + em.inflated.eta() * z);
        }
      } else if (em.family == EmissionFamily::LogNormalCopula) {
        out.obs(t, i) = std::exp(em.mu(s, i) + em.sigma(s, i) * e[i]);
      } else {
        // e already carries Sigma_jg scale; mu gives the location.
        out.obs(t, i) = std::exp(em.mu(s, i) + e[i]);
      }
    }
  }
  return out;
}

}  // namespace fhmm
