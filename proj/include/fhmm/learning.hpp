#ifndef FHMM_LEARNING_HPP
#define FHMM_LEARNING_HPP

#include <cstdint>
#include <optional>
#include <vector>

#include "fhmm/model.hpp"

namespace fhmm {

struct EmConfig {
  int max_iters = 200;
  double tol = 1e-6;      // minimum log-likelihood gain per iteration
  double eps_pd = 1e-6;   // positive-definiteness floor for R
  std::uint64_t seed = 0; // K-means restarts
};

/// Historical per-class mean log-observation vectors, used to order K-means
/// clusters onto the four hidden classes.
struct ClassPriors {
  Matrix prior_means;  // 4 x E
};

/// Labels are T x 2 binary columns (haze, dust).
using LabelMatrix = Eigen::MatrixXi;

/// Maximum-likelihood fit from labeled data: empirical transitions with
/// add-one smoothing, per-state log-moments, inflated-mixture parameters, and
/// pooled copula correlation (LNC) or per-state covariance (JG). States with
/// fewer than 2 samples fall back to init when provided, except that an
/// absent (1,1) class always falls back.
FhmmModel supervised_fit(const Matrix& obs, const LabelMatrix& labels,
                         EmissionFamily family,
                         const std::optional<FhmmModel>& init = std::nullopt,
                         double eps_pd = 1e-6);

/// Semi-supervised K-means initialization; clusters are greedily matched to
/// the four classes by ascending distance to the prior means.
FhmmModel kmeans_init(const Matrix& obs, const ClassPriors& priors,
                      std::uint64_t seed, EmissionFamily family);

struct EmResult {
  FhmmModel model;
  std::vector<double> loglik_trace;
  int iterations = 0;
  bool converged = false;
};

EmResult em_fit(const Matrix& obs, const FhmmModel& init, const EmConfig& cfg);

/// Ridge-shift repair toward lambda_min >= eps, rescaled to unit diagonal.
/// A matrix already above the floor is returned bitwise unchanged.
Matrix pd_repair(const Matrix& R, double eps);

/// Prior means matching the historical per-class log-observation profiles
/// used for cluster ordering (pm10, wind, visibility, humidity).
ClassPriors default_class_priors();

}  // namespace fhmm

#endif
