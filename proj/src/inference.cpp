#include "fhmm/inference.hpp"

#include <cmath>
#include <stdexcept>

#include "fhmm/emissions.hpp"

namespace fhmm {

namespace {

// out[(j1,j2)] = sum_{k1,k2} A1(k1,j1) A2(k2,j2) v[(k1,k2)], as two per-chain
// contractions.
Eigen::Vector4d contract_forward(const Matrix& A1, const Matrix& A2,
                                 const Eigen::Vector4d& v) {
  double w[2][2];  // w[j1][k2]
  for (int j1 = 0; j1 < 2; ++j1)
    for (int k2 = 0; k2 < 2; ++k2)
      w[j1][k2] = A1(0, j1) * v[joint_index(0, k2)] +
                  A1(1, j1) * v[joint_index(1, k2)];
  Eigen::Vector4d out;
  for (int j1 = 0; j1 < 2; ++j1)
    for (int j2 = 0; j2 < 2; ++j2)
      out[joint_index(j1, j2)] = A2(0, j2) * w[j1][0] + A2(1, j2) * w[j1][1];
  return out;
}

// out[(l1,l2)] = sum_{k1,k2} A1(l1,k1) A2(l2,k2) v[(k1,k2)] (transposed
// orientation, used by the backward pass).
Eigen::Vector4d contract_backward(const Matrix& A1, const Matrix& A2,
                                  const Eigen::Vector4d& v) {
  double w[2][2];  // w[l1][k2]
  for (int l1 = 0; l1 < 2; ++l1)
    for (int k2 = 0; k2 < 2; ++k2)
      w[l1][k2] = A1(l1, 0) * v[joint_index(0, k2)] +
                  A1(l1, 1) * v[joint_index(1, k2)];
  Eigen::Vector4d out;
  for (int l1 = 0; l1 < 2; ++l1)
    for (int l2 = 0; l2 < 2; ++l2)
      out[joint_index(l1, l2)] = A2(l2, 0) * w[l1][0] + A2(l2, 1) * w[l1][1];
  return out;
}

// Emission weights scaled by the row max; returns the max separately so the
// scaling constants stay exact in log space.
Eigen::Vector4d scaled_emissions(const Matrix& log_b, Eigen::Index t,
                                 double& m_out) {
  const double m = log_b.row(t).maxCoeff();
  if (!std::isfinite(m))
    throw std::runtime_error("all emission densities underflow at t=" +
                             std::to_string(t));
  Eigen::Vector4d b;
  for (int s = 0; s < kNumJointStates; ++s) b[s] = std::exp(log_b(t, s) - m);
  m_out = m;
  return b;
}

}  // namespace

Matrix log_emission_matrix(const FhmmModel& model, const Matrix& obs) {
  const Eigen::Index T = obs.rows();
  Matrix log_b(T, kNumJointStates);
  for (Eigen::Index t = 0; t < T; ++t) {
    const Vector x = obs.row(t).transpose();
    for (int s = 0; s < kNumJointStates; ++s)
      log_b(t, s) = log_emission(x, s, model.emissions);
  }
  return log_b;
}

ForwardResult forward_core(const FhmmModel& model, const Matrix& log_b) {
  const Eigen::Index T = log_b.rows();
  if (T < 1) throw std::invalid_argument("forward: empty sequence");
  const Matrix& A1 = model.chains[0].A;
  const Matrix& A2 = model.chains[1].A;

  ForwardResult res;
  res.alpha.resize(T, kNumJointStates);
  res.log_c.resize(T);

  Eigen::Vector4d prev;
  for (Eigen::Index t = 0; t < T; ++t) {
    double m;
    const Eigen::Vector4d b = scaled_emissions(log_b, t, m);
    Eigen::Vector4d a;
    if (t == 0) {
      for (int s = 0; s < kNumJointStates; ++s) {
        const auto [k1, k2] = joint_state(static_cast<int>(s));
        a[s] = model.chains[0].phi[k1] * model.chains[1].phi[k2] * b[s];
      }
    } else {
      a = contract_forward(A1, A2, prev).cwiseProduct(b);
    }
    const double c_raw = a.sum();
    if (!(c_raw > 0.0))
      throw std::runtime_error("forward: zero emission mass at t=" +
                               std::to_string(t));
    a /= c_raw;
    res.alpha.row(t) = a.transpose();
    res.log_c[t] = std::log(c_raw) + m;
    prev = a;
  }
  res.loglik = res.log_c.sum();
  return res;
}

Matrix backward_core(const FhmmModel& model, const Matrix& log_b,
                     const Vector& log_c) {
  const Eigen::Index T = log_b.rows();
  const Matrix& A1 = model.chains[0].A;
  const Matrix& A2 = model.chains[1].A;

  Matrix beta(T, kNumJointStates);
  beta.row(T - 1).setOnes();
  for (Eigen::Index t = T - 2; t >= 0; --t) {
    double m;
    const Eigen::Vector4d b = scaled_emissions(log_b, t + 1, m);
    const double c_hat = std::exp(log_c[t + 1] - m);
    const Eigen::Vector4d v =
        b.cwiseProduct(Eigen::Vector4d(beta.row(t + 1).transpose()));
    beta.row(t) = (contract_backward(A1, A2, v) / c_hat).transpose();
  }
  return beta;
}

PosteriorBundle posteriors_core(const FhmmModel& model, const Matrix& log_b,
                                bool want_xi) {
  const Eigen::Index T = log_b.rows();
  ForwardResult fwd = forward_core(model, log_b);
  Matrix beta = backward_core(model, log_b, fwd.log_c);

  PosteriorBundle out;
  out.loglik = fwd.loglik;
  out.log_c = fwd.log_c;
  out.gamma = fwd.alpha.cwiseProduct(beta);
  for (Eigen::Index t = 0; t < T; ++t) out.gamma.row(t) /= out.gamma.row(t).sum();

  if (want_xi) {
    const Matrix& A1 = model.chains[0].A;
    const Matrix& A2 = model.chains[1].A;
    out.xi.resize(T > 0 ? T - 1 : 0);
    for (Eigen::Index t = 0; t + 1 < T; ++t) {
      double m;
      const Eigen::Vector4d b = scaled_emissions(log_b, t + 1, m);
      const double c_hat = std::exp(fwd.log_c[t + 1] - m);
      Matrix x(kNumJointStates, kNumJointStates);
      for (int k = 0; k < kNumJointStates; ++k) {
        const auto [k1, k2] = joint_state(k);
        for (int l = 0; l < kNumJointStates; ++l) {
          const auto [l1, l2] = joint_state(l);
          x(k, l) = fwd.alpha(t, k) * A1(k1, l1) * A2(k2, l2) * b[l] *
                    beta(t + 1, l) / c_hat;
        }
      }
      out.xi[t] = std::move(x);
    }
  }
  out.alpha = std::move(fwd.alpha);
  out.beta = std::move(beta);
  return out;
}

ForwardResult forward(const FhmmModel& model, const Matrix& obs) {
  return forward_core(model, log_emission_matrix(model, obs));
}

Matrix backward(const FhmmModel& model, const Matrix& obs, const Vector& log_c) {
  return backward_core(model, log_emission_matrix(model, obs), log_c);
}

PosteriorBundle posteriors(const FhmmModel& model, const Matrix& obs,
                           bool want_xi) {
  return posteriors_core(model, log_emission_matrix(model, obs), want_xi);
}

}  // namespace fhmm
