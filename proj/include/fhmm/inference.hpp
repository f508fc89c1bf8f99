#ifndef FHMM_INFERENCE_HPP
#define FHMM_INFERENCE_HPP

#include <vector>

#include "fhmm/model.hpp"

namespace fhmm {

/// Scaled forward/backward tensors and smoothed posteriors for one sequence.
/// alpha rows and gamma rows each sum to 1; loglik = sum of ln c_t.
struct PosteriorBundle {
  Matrix alpha;              // T x 4
  Matrix beta;               // T x 4
  Vector log_c;              // length T (log of per-step scaling constants)
  Matrix gamma;              // T x 4
  std::vector<Matrix> xi;    // (T-1) entries of 4 x 4, each sums to 1
  double loglik = 0.0;
};

struct ForwardResult {
  Matrix alpha;  // T x 4, scaled
  Vector log_c;  // length T
  double loglik = 0.0;
};

/// Per-step log-emission matrix (T x 4) for the model's family.
Matrix log_emission_matrix(const FhmmModel& model, const Matrix& obs);

// Core recursions over a precomputed T x 4 log-emission matrix. The transition
// step is two per-chain K^3 contractions; the joint K^4 matrix is never formed.
ForwardResult forward_core(const FhmmModel& model, const Matrix& log_b);
Matrix backward_core(const FhmmModel& model, const Matrix& log_b,
                     const Vector& log_c);
PosteriorBundle posteriors_core(const FhmmModel& model, const Matrix& log_b,
                                bool want_xi = true);

ForwardResult forward(const FhmmModel& model, const Matrix& obs);
Matrix backward(const FhmmModel& model, const Matrix& obs, const Vector& log_c);
PosteriorBundle posteriors(const FhmmModel& model, const Matrix& obs,
                           bool want_xi = true);

}  // namespace fhmm

#endif
