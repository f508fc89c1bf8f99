#ifndef FHMM_EVALUATE_HPP
#define FHMM_EVALUATE_HPP

#include <array>
#include <string>
#include <vector>

#include "fhmm/model.hpp"

namespace fhmm {

// Three-way class scheme after reclassification.
enum ThreeClass : int { kClear = 0, kHaze = 1, kDust = 2 };

/// Maps hidden states to {Clear, Haze, Dust}. Throws if a (1,1) state
/// remains; run reclassification first.
std::vector<int> to_three_class(const std::vector<HiddenState>& states);

struct ConfusionMatrix {
  Eigen::Matrix3d counts = Eigen::Matrix3d::Zero();  // rows = truth
  double total() const { return counts.sum(); }
};

ConfusionMatrix confusion(const std::vector<int>& truth,
                          const std::vector<int>& predicted);

struct F1Result {
  Eigen::Vector3d per_class;
  double micro = 0.0;
  double macro = 0.0;
};

F1Result f1_scores(const ConfusionMatrix& cm);

struct RocCurve {
  std::vector<std::pair<double, double>> points;  // (fpr, tpr) by threshold
  double auc = 0.0;
  bool defined = true;  // false when the class is absent from truth
};

struct RocResult {
  std::array<RocCurve, 3> per_class;
  double micro_auc = 0.0;
  double macro_auc = 0.0;
};

/// One-vs-rest ROC/AUC from a T x 3 posterior matrix (rows sum to 1).
/// Micro pools all (score, indicator) pairs; macro averages defined classes.
RocResult roc_auc(const Matrix& scores, const std::vector<int>& truth);

enum class AicFamily { LogNormal, Gamma, Weibull, Normal };

struct AicEntry {
  AicFamily family;
  std::string name;
  double aic = 0.0;
  double delta = 0.0;
  bool skipped = false;  // positive-support family on non-positive data
};

/// Maximum-likelihood AIC comparison across candidate families, sorted by
/// ascending AIC (delta = AIC - min AIC).
std::vector<AicEntry> delta_aic(const Vector& samples,
                                const std::vector<AicFamily>& candidates = {
                                    AicFamily::LogNormal, AicFamily::Gamma,
                                    AicFamily::Weibull, AicFamily::Normal});

}  // namespace fhmm

#endif
