#ifndef FHMM_MI_HPP
#define FHMM_MI_HPP

#include <array>
#include <vector>

#include "fhmm/emissions.hpp"
#include "fhmm/model.hpp"

namespace fhmm {

struct KnnMiResult {
  double value = 0.0;   // nats, clipped at 0
  bool degenerate = false;
};

/// Nearest-neighbor mutual information between a continuous feature and a
/// discrete label. Distances are absolute differences; ties are broken by
/// point index.
KnnMiResult knn_mi(const Vector& x, const std::vector<int>& z, int k = 3);

struct MiEstimate {
  Matrix per_state;              // 4 x E, one-vs-rest MI per state and feature
  std::array<bool, kNumJointStates> fallback{};  // state too rare to estimate
  int k = 3;
};

/// One-vs-rest MI of each feature against each joint state indicator.
/// States with fewer than 5(k+1) members get a uniform 1/E row and are
/// flagged as fallback.
MiEstimate mi_state_conditional(const Matrix& obs,
                                const std::vector<int>& labels, int k = 3);

enum class WeightMode { Raw, Normalized };

/// Builds the E x 4 feature-weight matrix from per-state MI values.
/// Normalized mode scales each state column to sum to omega.
WeightMatrix weight_matrix(const Matrix& mi, double omega, WeightMode mode);

struct LocalMiBin {
  double lo = 0.0;
  double hi = 0.0;
  int cls = 0;
  double delta_i = 0.0;
};

struct LocalMiDecomposition {
  std::vector<LocalMiBin> bins;
  double total = 0.0;   // plug-in MI of the binned variables
};

/// Histogram decomposition of MI into per-bin, per-class contributions.
LocalMiDecomposition local_mi_decomposition(const Vector& x,
                                            const std::vector<int>& z,
                                            int bins);

}  // namespace fhmm

#endif
