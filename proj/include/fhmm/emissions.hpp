#ifndef FHMM_EMISSIONS_HPP
#define FHMM_EMISSIONS_HPP

#include <array>

#include "fhmm/model.hpp"

namespace fhmm {

/// Copula scores z_i = Phi^{-1}(F_LN(x_i)), CDF clamped to [1e-12, 1-1e-12].
struct CopulaTransformed {
  Vector z;
};

/// Per-feature, per-state emission exponents. In normalized mode each state
/// column sums to omega.
struct WeightMatrix {
  Matrix w;  // E x 4, nonnegative
  double omega = 1.0;
};

double lognormal_logpdf(double x, double mu, double sigma);
double lognormal_cdf(double x, double mu, double sigma);

/// Log-density of the point-mass-plus-log-normal mixture w.r.t. its mixed
/// dominating measure: ln pi0 at the atom, ln(1-pi0) + LN log-pdf elsewhere.
double inflated_logpdf(double x, const InflatedMixtureParams& params);

/// Multivariate log-normal log-density (JG family). State (0,0) factorizes
/// into the non-visibility block times the inflated visibility marginal.
double jg_log_emission(const Vector& x, HiddenState state,
                       const EmissionParams& params);

CopulaTransformed copula_transform(const Vector& x, HiddenState state,
                                   const EmissionParams& params);

/// Gaussian-copula emission: marginal log-normal terms plus the copula factor
/// -0.5 ln|R| - 0.5 z'(R^{-1}-I)z. At the visibility atom in state (0,0) the
/// visibility dimension is dropped and R reduced to the complementary block.
double lnc_log_emission(const Vector& x, HiddenState state,
                        const EmissionParams& params);

/// ln of the integral of f_LN(x; mu, sigma)^w over (0, inf), closed form.
double lognormal_power_log_integral(double w, double mu, double sigma);

/// ln of the integral of the inflated mixture density raised to w, hybrid
/// point-mass-expansion plus continuous-body approximation (rel. err < 2e-4
/// on the documented parameter ranges).
double hybrid_normalization_constant(double w, const InflatedMixtureParams& params);

/// Product of per-feature marginals raised to MI weights, each renormalized by
/// its analytic (or hybrid, for the inflated marginal) constant.
double weighted_log_emission(const Vector& x, HiddenState state,
                             const EmissionParams& params,
                             const WeightMatrix& weights);

/// Log-softmax over the four joint states of weighted_log_emission / v.
std::array<double, kNumJointStates> global_weighted_log_scores(
    const Vector& x, const EmissionParams& params, const WeightMatrix& weights,
    double v);

/// Plain per-state log-emission as used by training/inference for the family:
/// JG joint density or LNC copula density.
double log_emission(const Vector& x, int state, const EmissionParams& params);

/// Marginal-product log-emission (no dependence term). Used by JG decoding and
/// as the base of the weighted forms.
double marginal_log_emission(const Vector& x, int state,
                             const EmissionParams& params);

}  // namespace fhmm

#endif
