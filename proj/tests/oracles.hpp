// Independent reference implementations used only by tests: a flattened
// 4-state HMM, brute-force path search, adaptive quadrature, and random
// model generation.
#ifndef FHMM_TESTS_ORACLES_HPP
#define FHMM_TESTS_ORACLES_HPP

#include <Eigen/Eigenvalues>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "fhmm/model.hpp"

namespace oracles {

using fhmm::Matrix;
using fhmm::Vector;

struct FlatHmmResult {
  Matrix alpha;   // T x 4, scaled
  Matrix gamma;   // T x 4
  std::vector<Matrix> xi;
  double loglik = 0.0;
};

// Textbook scaled forward-backward on the flattened joint chain.
inline FlatHmmResult flat_hmm(const Vector& pi, const Matrix& A,
                              const Matrix& log_b) {
  const int T = static_cast<int>(log_b.rows());
  const int N = static_cast<int>(A.rows());
  FlatHmmResult r;
  r.alpha.resize(T, N);
  Matrix beta(T, N);
  Vector c(T);

  Matrix b(T, N);
  Vector m(T);
  for (int t = 0; t < T; ++t) {
    m[t] = log_b.row(t).maxCoeff();
    b.row(t) = (log_b.row(t).array() - m[t]).exp();
  }

  Vector a = pi.cwiseProduct(b.row(0).transpose());
  c[0] = a.sum();
  r.alpha.row(0) = a / c[0];
  for (int t = 1; t < T; ++t) {
    a = (r.alpha.row(t - 1) * A).transpose().cwiseProduct(b.row(t).transpose());
    c[t] = a.sum();
    r.alpha.row(t) = a / c[t];
  }
  beta.row(T - 1).setOnes();
  for (int t = T - 2; t >= 0; --t)
    beta.row(t) =
        (A * beta.row(t + 1).transpose().cwiseProduct(b.row(t + 1).transpose()))
            .transpose() /
        c[t + 1];

  r.loglik = c.array().log().sum() + m.sum();
  r.gamma = r.alpha.cwiseProduct(beta);
  for (int t = 0; t < T; ++t) r.gamma.row(t) /= r.gamma.row(t).sum();
  for (int t = 0; t + 1 < T; ++t) {
    Matrix xi(N, N);
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j)
        xi(i, j) = r.alpha(t, i) * A(i, j) * b(t + 1, j) * beta(t + 1, j) /
                   c[t + 1];
    r.xi.push_back(xi / xi.sum());
  }
  return r;
}

// Exhaustive max over all N^T paths; ties resolved toward the smaller path
// in lexicographic order (scanning paths in ascending numeric order and
// keeping strict improvements only).
inline std::vector<int> brute_force_map_path(const Vector& log_pi,
                                             const Matrix& log_A,
                                             const Matrix& log_b) {
  const int T = static_cast<int>(log_b.rows());
  const int N = static_cast<int>(log_A.rows());
  std::vector<int> best, cur(T, 0);
  double best_score = -std::numeric_limits<double>::infinity();
  long total = 1;
  for (int t = 0; t < T; ++t) total *= N;
  for (long code = 0; code < total; ++code) {
    long c = code;
    for (int t = T - 1; t >= 0; --t) {
      cur[t] = static_cast<int>(c % N);
      c /= N;
    }
    double score = log_pi[cur[0]] + log_b(0, cur[0]);
    for (int t = 1; t < T; ++t)
      score += log_A(cur[t - 1], cur[t]) + log_b(t, cur[t]);
    if (score > best_score) {
      best_score = score;
      best = cur;
    }
  }
  return best;
}

// Stationary distribution of a 4x4 row-stochastic matrix via the left
// eigenvector of eigenvalue 1.
inline Vector stationary_distribution(const Matrix& A) {
  Eigen::EigenSolver<Matrix> es(A.transpose());
  int best = 0;
  for (int i = 1; i < A.rows(); ++i)
    if (std::abs(es.eigenvalues()[i].real() - 1.0) <
        std::abs(es.eigenvalues()[best].real() - 1.0))
      best = i;
  Vector v = es.eigenvectors().col(best).real();
  return v / v.sum();
}

// Adaptive Simpson quadrature.
inline double simpson(const std::function<double(double)>& f, double a,
                      double b, double eps = 1e-12, int depth = 30) {
  std::function<double(double, double, double, double, double, double, int)>
      rec = [&](double lo, double hi, double flo, double fmid, double fhi,
                double whole, int d) -> double {
    const double mid = 0.5 * (lo + hi);
    const double lm = 0.5 * (lo + mid), rm = 0.5 * (mid + hi);
    const double flm = f(lm), frm = f(rm);
    const double left = (mid - lo) / 6.0 * (flo + 4 * flm + fmid);
    const double right = (hi - mid) / 6.0 * (fmid + 4 * frm + fhi);
    if (d <= 0 || std::abs(left + right - whole) < 15 * eps)
      return left + right + (left + right - whole) / 15.0;
    return rec(lo, mid, flo, flm, fmid, left, d - 1) +
           rec(mid, hi, fmid, frm, fhi, right, d - 1);
  };
  const double mid = 0.5 * (a + b);
  const double fa = f(a), fm = f(mid), fb = f(b);
  const double whole = (b - a) / 6.0 * (fa + 4 * fm + fb);
  return rec(a, b, fa, fm, fb, whole, depth);
}

inline Matrix random_stochastic(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(0.1, 1.0);
  Matrix A(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) A(i, j) = u(rng);
    A.row(i) /= A.row(i).sum();
  }
  return A;
}

inline Matrix random_correlation(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix B(n, n + 2);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n + 2; ++j) B(i, j) = g(rng);
  Matrix S = B * B.transpose() + 0.05 * Matrix::Identity(n, n);
  const Vector d = S.diagonal().cwiseSqrt();
  Matrix R = S.cwiseQuotient(d * d.transpose());
  R.diagonal().setOnes();
  return R;
}

// Random valid model with moderately separated states.
inline fhmm::FhmmModel random_model(std::mt19937_64& rng,
                                    fhmm::EmissionFamily family,
                                    int E = 4) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);
  fhmm::FhmmModel m;
  m.feature_names = {"pm10", "wind", "visibility", "humidity"};
  for (auto& ch : m.chains) {
    ch.A = random_stochastic(rng, 2);
    const double p = 0.2 + 0.6 * u(rng);
    ch.phi = Vector(2);
    ch.phi << p, 1.0 - p;
  }
  auto& em = m.emissions;
  em.family = family;
  em.mu.resize(4, E);
  em.sigma.resize(4, E);
  for (int s = 0; s < 4; ++s)
    for (int i = 0; i < E; ++i) {
      em.mu(s, i) = 1.5 * g(rng);
      em.sigma(s, i) = 0.3 + 0.7 * u(rng);
    }
  em.inflated.pi0 = 0.3 + 0.5 * u(rng);
  em.inflated.c = 10.0;
  em.inflated.theta = std::log(5.0) + 0.3 * g(rng);
  em.inflated.eta2 = std::pow(0.3 + 0.4 * u(rng), 2);
  em.mu(0, fhmm::kVisibilityDim) = em.inflated.theta;
  em.sigma(0, fhmm::kVisibilityDim) = em.inflated.eta();
  em.R_global = random_correlation(rng, E);
  for (int s = 0; s < 4; ++s) {
    const Vector d = em.sigma.row(s).transpose();
    em.Sigma_jg[s] = d.asDiagonal() * random_correlation(rng, E) *
                     d.asDiagonal();
    if (s == 0) {
      for (int i = 0; i < E; ++i) {
        em.Sigma_jg[s](fhmm::kVisibilityDim, i) = 0.0;
        em.Sigma_jg[s](i, fhmm::kVisibilityDim) = 0.0;
      }
      em.Sigma_jg[s](fhmm::kVisibilityDim, fhmm::kVisibilityDim) =
          em.inflated.eta2;
    }
  }
  return m;
}

}  // namespace oracles

#endif
