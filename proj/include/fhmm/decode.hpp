#ifndef FHMM_DECODE_HPP
#define FHMM_DECODE_HPP

#include <optional>
#include <vector>

#include "fhmm/emissions.hpp"
#include "fhmm/model.hpp"

namespace fhmm {

enum class Weighting { None, RawMi, NormalizedMi };
enum class ReclassifyRule { MergeToClear, HumidityWindRule, None };

struct DecodeConfig {
  Weighting weighting = Weighting::None;
  double omega = 1.0;  // column sum of normalized weights
  double v = 1.0;      // global flattening exponent, > 0
  ReclassifyRule reclassify = ReclassifyRule::None;
  // Per-state feature weights (E x 4); required when weighting != None.
  std::optional<WeightMatrix> weights;
};

struct StatePath {
  std::vector<HiddenState> states;
  double score = 0.0;  // terminal log-Viterbi value
};

/// MAP path via per-chain max-contractions (never a 4x4 joint table in the
/// recursion); ties broken toward the lower joint index.
StatePath viterbi(const FhmmModel& model, const Matrix& obs,
                  const DecodeConfig& cfg);

/// Resolves (1,1) states. merge_to_clear maps them to (0,0); the
/// humidity/wind rule sends a step to Dust when wind is at or above the
/// median wind of decoded Dust steps and humidity at or below their median
/// humidity, else to Haze. With no decoded Dust steps the medians fall back
/// to the whole input and *fallback is set.
StatePath reclassify(const StatePath& path, const Matrix& obs,
                     ReclassifyRule rule, bool* fallback = nullptr);

/// h-step state distribution from filtered terminal weights, via repeated
/// factorized contractions.
Vector forecast(const FhmmModel& model, const Vector& alpha_T, int h);

struct GridPoint {
  double omega = 0.0;
  double v = 0.0;
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
};

struct GridSearchResult {
  std::vector<GridPoint> points;  // row-major over (omega, v)
  int best_index = 0;             // argmax of micro F1 (macro breaks ties)
};

/// Evaluates viterbi + reclassify + F1 over an (omega, v) grid. labels is
/// the T x 2 truth; base supplies weighting mode, weights and the
/// reclassification rule.
GridSearchResult grid_search(const FhmmModel& model, const Matrix& obs,
                             const Eigen::MatrixXi& labels,
                             const DecodeConfig& base, double omega_lo,
                             double omega_hi, int omega_steps, double v_lo,
                             double v_hi, int v_steps);

}  // namespace fhmm

#endif
