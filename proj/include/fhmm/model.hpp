#ifndef FHMM_MODEL_HPP
#define FHMM_MODEL_HPP

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace fhmm {

inline constexpr int kNumChains = 2;     // haze, dust
inline constexpr int kStatesPerChain = 2;
inline constexpr int kNumJointStates = 4;

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Joint hidden state: k1 = haze indicator, k2 = dust indicator.
struct HiddenState {
  int k1 = 0;
  int k2 = 0;
  bool operator==(const HiddenState&) const = default;
};

// Row-major joint indexing, fixed ordering: (0,0)=0, (0,1)=1, (1,0)=2, (1,1)=3.
inline int joint_index(int k1, int k2) { return 2 * k1 + k2; }
inline int joint_index(HiddenState s) { return joint_index(s.k1, s.k2); }
inline HiddenState joint_state(int idx) { return {idx / 2, idx % 2}; }

enum class EmissionFamily { JointGaussian, LogNormalCopula };

std::string family_name(EmissionFamily f);
EmissionFamily family_from_name(const std::string& name);

/// One hidden chain: initial distribution phi and row-stochastic transition A.
struct ChainParams {
  Vector phi;  // length K
  Matrix A;    // K x K, rows = from-state
};

/// Point mass at c plus a continuous log-normal component (visibility under Clear).
struct InflatedMixtureParams {
  double pi0 = 0.5;
  double theta = 0.0;
  double eta2 = 1.0;   // log-scale variance
  double c = 10.0;     // inflation point (km)
  double eta() const { return std::sqrt(eta2); }
};

struct EmissionParams {
  EmissionFamily family = EmissionFamily::LogNormalCopula;
  Matrix mu;     // 4 x E log-scale means, row = joint state
  Matrix sigma;  // 4 x E log-scale standard deviations
  std::array<Matrix, kNumJointStates> Sigma_jg;  // per-state E x E covariance (JG)
  Matrix R_global;  // E x E correlation matrix (LNC)
  InflatedMixtureParams inflated;  // visibility marginal in state (0,0)
  int num_features() const { return static_cast<int>(mu.cols()); }
};

struct FhmmModel {
  std::array<ChainParams, kNumChains> chains;  // [0] = haze, [1] = dust
  EmissionParams emissions;
  std::vector<std::string> feature_names;  // (pm10, wind, visibility, humidity)
  int num_features() const { return emissions.num_features(); }
};

// Index of the visibility dimension in the fixed feature order.
inline constexpr int kVisibilityDim = 2;

struct Violation {
  std::string location;
  std::string message;
};

struct ValidationResult {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

/// Checks every type invariant; reports all violations with their location.
ValidationResult validate_model(const FhmmModel& model);
void require_valid(const FhmmModel& model);

/// Kronecker product of the per-chain transition matrices. Oracle/test use only;
/// production inference never materializes the joint matrix.
Matrix kron_transition(const Matrix& A1, const Matrix& A2);

struct SampledSequence {
  std::vector<int> states;  // joint indices, length T
  Matrix obs;               // T x E
};

/// Draws a state path and observations from the generative model. Deterministic
/// for a fixed seed.
SampledSequence sample_sequence(const FhmmModel& model, int T, std::uint64_t seed);

// JSON model persistence (17-significant-digit round trip).
std::string model_to_json(const FhmmModel& model);
FhmmModel model_from_json(const std::string& text);
void save_model(const FhmmModel& model, const std::string& path);
FhmmModel load_model(const std::string& path);

}  // namespace fhmm

#endif
