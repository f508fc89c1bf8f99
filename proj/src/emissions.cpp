#include "fhmm/emissions.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <stdexcept>

#include "fhmm/special.hpp"

namespace fhmm {

namespace {
constexpr double kHalfLog2Pi = 0.9189385332046727;  // 0.5*ln(2*pi)
constexpr double kCdfClamp = 1e-12;

bool is_inflated_dim(int state, int dim) {
  return state == 0 && dim == kVisibilityDim;
}

double clamp_cdf(double u) {
  if (u < kCdfClamp) return kCdfClamp;
  if (u > 1.0 - kCdfClamp) return 1.0 - kCdfClamp;
  return u;
}

// ln|R| and R^{-1} via Cholesky; throws if R is not positive definite.
struct CorrFactor {
  Matrix inv;
  double logdet;
};

CorrFactor factor_correlation(const Matrix& R) {
  Eigen::LLT<Matrix> llt(R);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("correlation matrix not positive definite");
  const Matrix L = llt.matrixL();
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < L.rows(); ++i) logdet += 2.0 * std::log(L(i, i));
  return {llt.solve(Matrix::Identity(R.rows(), R.cols())), logdet};
}
}  // namespace

double lognormal_logpdf(double x, double mu, double sigma) {
  if (!(x > 0.0)) throw std::domain_error("lognormal_logpdf: x <= 0");
  if (!(sigma > 0.0)) throw std::domain_error("lognormal_logpdf: sigma <= 0");
  const double d = (std::log(x) - mu) / sigma;
  return -std::log(x) - std::log(sigma) - kHalfLog2Pi - 0.5 * d * d;
}

double lognormal_cdf(double x, double mu, double sigma) {
  if (!(x > 0.0)) return 0.0;
  return norm_cdf((std::log(x) - mu) / sigma);
}

double inflated_logpdf(double x, const InflatedMixtureParams& params) {
  if (!(x > 0.0)) throw std::domain_error("inflated_logpdf: x <= 0");
  if (x == params.c) return std::log(params.pi0);
  return std::log1p(-params.pi0) + lognormal_logpdf(x, params.theta, params.eta());
}

double marginal_log_emission(const Vector& x, int state,
                             const EmissionParams& params) {
  const int E = params.num_features();
  double acc = 0.0;
  for (int i = 0; i < E; ++i) {
    if (is_inflated_dim(state, i))
      acc += inflated_logpdf(x[i], params.inflated);
    else
      acc += lognormal_logpdf(x[i], params.mu(state, i), params.sigma(state, i));
  }
  return acc;
}

double jg_log_emission(const Vector& x, HiddenState state,
                       const EmissionParams& params) {
  if (params.family != EmissionFamily::JointGaussian)
    throw std::invalid_argument("jg_log_emission: family is not JointGaussian");
  const int s = joint_index(state);
  const int E = params.num_features();

  // Dimensions entering the joint Gaussian block; visibility is handled by the
  // inflated marginal in state (0,0).
  std::vector<int> dims;
  for (int i = 0; i < E; ++i)
    if (!is_inflated_dim(s, i)) dims.push_back(i);

  const int D = static_cast<int>(dims.size());
  Vector r(D);
  double jac = 0.0;
  for (int d = 0; d < D; ++d) {
    const int i = dims[d];
    if (!(x[i] > 0.0)) throw std::domain_error("jg_log_emission: x <= 0");
    const double lx = std::log(x[i]);
    r[d] = lx - params.mu(s, i);
    jac -= lx;
  }
  Matrix S(D, D);
  for (int a = 0; a < D; ++a)
    for (int b = 0; b < D; ++b) S(a, b) = params.Sigma_jg[s](dims[a], dims[b]);
  Eigen::LLT<Matrix> llt(S);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("jg_log_emission: singular covariance in state (" +
                             std::to_string(state.k1) + "," +
                             std::to_string(state.k2) + ")");
  double logdet = 0.0;
  const Matrix L = llt.matrixL();
  for (int d = 0; d < D; ++d) logdet += 2.0 * std::log(L(d, d));
  const double quad = r.dot(llt.solve(r));
  double out = jac - D * kHalfLog2Pi - 0.5 * logdet - 0.5 * quad;
  if (s == 0) out += inflated_logpdf(x[kVisibilityDim], params.inflated);
  return out;
}

CopulaTransformed copula_transform(const Vector& x, HiddenState state,
                                   const EmissionParams& params) {
  const int s = joint_index(state);
  const int E = params.num_features();
  CopulaTransformed out;
  out.z.resize(E);
  for (int i = 0; i < E; ++i) {
    double u;
    if (is_inflated_dim(s, i))
      u = lognormal_cdf(x[i], params.inflated.theta, params.inflated.eta());
    else
      u = lognormal_cdf(x[i], params.mu(s, i), params.sigma(s, i));
    out.z[i] = norm_ppf(clamp_cdf(u));
  }
  return out;
}

double lnc_log_emission(const Vector& x, HiddenState state,
                        const EmissionParams& params) {
  if (params.family != EmissionFamily::LogNormalCopula)
    throw std::invalid_argument("lnc_log_emission: family is not LogNormalCopula");
  const int s = joint_index(state);
  const double marginals = marginal_log_emission(x, s, params);

  const bool at_atom = (s == 0) && (x[kVisibilityDim] == params.inflated.c);
  const CopulaTransformed ct = copula_transform(x, state, params);

  Matrix R;
  Vector z;
  if (at_atom) {
    // Visibility carries no continuous coordinate at the atom: use the
    // complementary sub-correlation.
    const int E = params.num_features();
    R.resize(E - 1, E - 1);
    z.resize(E - 1);
    int a = 0;
    for (int i = 0; i < E; ++i) {
      if (i == kVisibilityDim) continue;
      z[a] = ct.z[i];
      int b = 0;
      for (int j = 0; j < E; ++j) {
        if (j == kVisibilityDim) continue;
        R(a, b++) = params.R_global(i, j);
      }
      ++a;
    }
  } else {
    R = params.R_global;
    z = ct.z;
  }
  const CorrFactor f = factor_correlation(R);
  const double quad = z.dot((f.inv * z)) - z.squaredNorm();
  return marginals - 0.5 * f.logdet - 0.5 * quad;
}

double log_emission(const Vector& x, int state, const EmissionParams& params) {
  if (params.family == EmissionFamily::JointGaussian)
    return jg_log_emission(x, joint_state(state), params);
  return lnc_log_emission(x, joint_state(state), params);
}

double lognormal_power_log_integral(double w, double mu, double sigma) {
  if (!(w > 0.0)) throw std::domain_error("power integral: w <= 0");
  if (!(sigma > 0.0)) throw std::domain_error("power integral: sigma <= 0");
  const double wm1 = w - 1.0;
  return (1.0 - w) * std::log(sigma) + 0.5 * (1.0 - w) * std::log(2.0 * M_PI) -
         0.5 * std::log(w) - wm1 * mu + wm1 * wm1 / (2.0 * w) * sigma * sigma;
}

double hybrid_normalization_constant(double w,
                                     const InflatedMixtureParams& params) {
  if (!(w > 0.0)) throw std::domain_error("hybrid constant: w <= 0");
  const double pi0 = params.pi0;
  const double d = std::exp(
      lognormal_logpdf(params.c, params.theta, params.eta()));
  double interact =
      std::pow(pi0, w) + w * std::pow(pi0, w - 1.0) * (1.0 - pi0) * d +
      0.5 * w * (w - 1.0) * std::pow(pi0, w - 2.0) * (1.0 - pi0) * (1.0 - pi0) *
          d * d;
  // The quadratic correction is an expansion around pi0 near 1 and can turn
  // the atom part negative for small pi0; the true atom contribution never
  // drops below the leading term.
  interact = std::max(interact, std::pow(pi0, w));
  const double body =
      std::pow(1.0 - pi0, w) *
      std::exp(lognormal_power_log_integral(w, params.theta, params.eta()));
  return std::log(interact + body);
}

double weighted_log_emission(const Vector& x, HiddenState state,
                             const EmissionParams& params,
                             const WeightMatrix& weights) {
  const int s = joint_index(state);
  const int E = params.num_features();
  double acc = 0.0;
  for (int i = 0; i < E; ++i) {
    const double w = weights.w(i, s);
    if (!(w > 0.0))
      throw std::invalid_argument("weighted_log_emission: weight <= 0");
    if (is_inflated_dim(s, i)) {
      acc += w * inflated_logpdf(x[i], params.inflated);
      // The mixture integrates to 1, so the constant vanishes exactly at w=1;
      // the hybrid approximation is only needed for fractional powers.
      if (w != 1.0) acc -= hybrid_normalization_constant(w, params.inflated);
    } else {
      acc += w * lognormal_logpdf(x[i], params.mu(s, i), params.sigma(s, i));
      acc -= lognormal_power_log_integral(w, params.mu(s, i), params.sigma(s, i));
    }
  }
  return acc;
}

std::array<double, kNumJointStates> global_weighted_log_scores(
    const Vector& x, const EmissionParams& params, const WeightMatrix& weights,
    double v) {
  if (!(v > 0.0)) throw std::invalid_argument("global scores: v <= 0");
  std::array<double, kNumJointStates> s{};
  for (int st = 0; st < kNumJointStates; ++st)
    s[st] = weighted_log_emission(x, joint_state(st), params, weights) / v;
  const double lse = logsumexp(s);
  for (double& v2 : s) v2 -= lse;
  return s;
}

}  // namespace fhmm
