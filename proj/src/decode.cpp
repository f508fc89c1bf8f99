#include "fhmm/decode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "fhmm/evaluate.hpp"
#include "fhmm/special.hpp"

namespace fhmm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double median(std::vector<double> v) {
  const size_t n = v.size();
  std::nth_element(v.begin(), v.begin() + n / 2, v.end());
  double hi = v[n / 2];
  if (n % 2 == 1) return hi;
  std::nth_element(v.begin(), v.begin() + n / 2 - 1, v.end());
  return 0.5 * (v[n / 2 - 1] + hi);
}

// Per-step log scores over the four joint states for the configured mode.
Eigen::Vector4d step_scores(const FhmmModel& model, const Vector& x,
                            const DecodeConfig& cfg) {
  const auto& em = model.emissions;
  Eigen::Vector4d s;
  if (cfg.weighting == Weighting::None) {
    for (int k = 0; k < kNumJointStates; ++k)
      s[k] = em.family == EmissionFamily::JointGaussian
                 ? marginal_log_emission(x, k, em)
                 : log_emission(x, k, em);
  } else {
    for (int k = 0; k < kNumJointStates; ++k)
      s[k] = weighted_log_emission(x, joint_state(k), em, *cfg.weights);
  }
  if (cfg.v != 1.0) {
    s /= cfg.v;
    s.array() -= logsumexp({s.data(), static_cast<size_t>(s.size())});
  }
  return s;
}

}  // namespace

StatePath viterbi(const FhmmModel& model, const Matrix& obs,
                  const DecodeConfig& cfg) {
  require_valid(model);
  if (!(cfg.v > 0.0) || !(cfg.omega > 0.0))
    throw std::invalid_argument("viterbi: v and omega must be positive");
  if (cfg.weighting != Weighting::None && !cfg.weights)
    throw std::invalid_argument("viterbi: weighting requested without weights");

  const Eigen::Index T = obs.rows();
  const Matrix lnA1 = model.chains[0].A.array().log();
  const Matrix lnA2 = model.chains[1].A.array().log();

  Matrix omega_t(T, kNumJointStates);
  Eigen::MatrixXi back(T, kNumJointStates);

  Eigen::Vector4d prev;
  {
    const Eigen::Vector4d b0 = step_scores(model, obs.row(0).transpose(), cfg);
    for (int k = 0; k < kNumJointStates; ++k) {
      const auto st = joint_state(k);
      prev[k] = std::log(model.chains[0].phi[st.k1]) +
                std::log(model.chains[1].phi[st.k2]) + b0[k];
    }
    omega_t.row(0) = prev;
  }

  for (Eigen::Index t = 1; t < T; ++t) {
    const Eigen::Vector4d bt = step_scores(model, obs.row(t).transpose(), cfg);
    // chain-2 contraction first, then chain-1; picking the lower index at
    // each step makes ties resolve to the smallest joint predecessor
    double U[2][2];
    int arg2[2][2];
    for (int k1 = 0; k1 < 2; ++k1)
      for (int j2 = 0; j2 < 2; ++j2) {
        U[k1][j2] = kNegInf;
        arg2[k1][j2] = 0;
        for (int k2 = 0; k2 < 2; ++k2) {
          const double v = prev[joint_index(k1, k2)] + lnA2(k2, j2);
          if (v > U[k1][j2]) {
            U[k1][j2] = v;
            arg2[k1][j2] = k2;
          }
        }
      }
    Eigen::Vector4d cur;
    for (int j1 = 0; j1 < 2; ++j1)
      for (int j2 = 0; j2 < 2; ++j2) {
        double best = kNegInf;
        int arg1 = 0;
        for (int k1 = 0; k1 < 2; ++k1) {
          const double v = U[k1][j2] + lnA1(k1, j1);
          if (v > best) {
            best = v;
            arg1 = k1;
          }
        }
        const int j = joint_index(j1, j2);
        cur[j] = best + bt[j];
        back(t, j) = joint_index(arg1, arg2[arg1][j2]);
      }
    if (!(cur.maxCoeff() > kNegInf) || cur.hasNaN())
      throw std::runtime_error("viterbi: non-finite score at t=" +
                               std::to_string(t));
    prev = cur;
    omega_t.row(t) = cur;
  }

  StatePath path;
  path.states.resize(T);
  int best = 0;
  for (int k = 1; k < kNumJointStates; ++k)
    if (prev[k] > prev[best]) best = k;
  path.score = prev[best];
  for (Eigen::Index t = T - 1; t >= 0; --t) {
    path.states[t] = joint_state(best);
    if (t > 0) best = back(t, best);
  }
  return path;
}

StatePath reclassify(const StatePath& path, const Matrix& obs,
                     ReclassifyRule rule, bool* fallback) {
  if (fallback) *fallback = false;
  if (rule == ReclassifyRule::None) return path;

  StatePath out = path;
  if (rule == ReclassifyRule::MergeToClear) {
    for (auto& s : out.states)
      if (s.k1 == 1 && s.k2 == 1) s = {0, 0};
    return out;
  }

  // humidity/wind rule: thresholds are the medians over decoded Dust steps
  constexpr int kWindDim = 1, kHumidityDim = 3;
  std::vector<double> wind, humidity;
  for (size_t t = 0; t < path.states.size(); ++t)
    if (path.states[t].k1 == 0 && path.states[t].k2 == 1) {
      wind.push_back(obs(t, kWindDim));
      humidity.push_back(obs(t, kHumidityDim));
    }
  if (wind.empty()) {
    if (fallback) *fallback = true;
    for (Eigen::Index t = 0; t < obs.rows(); ++t) {
      wind.push_back(obs(t, kWindDim));
      humidity.push_back(obs(t, kHumidityDim));
    }
  }
  const double wind_med = median(wind);
  const double hum_med = median(humidity);
  for (size_t t = 0; t < out.states.size(); ++t) {
    auto& s = out.states[t];
    if (s.k1 != 1 || s.k2 != 1) continue;
    const bool dusty =
        obs(t, kWindDim) >= wind_med && obs(t, kHumidityDim) <= hum_med;
    s = dusty ? HiddenState{0, 1} : HiddenState{1, 0};
  }
  return out;
}

Vector forecast(const FhmmModel& model, const Vector& alpha_T, int h) {
  if (h < 1) throw std::invalid_argument("forecast: h >= 1");
  if (alpha_T.size() != kNumJointStates ||
      std::abs(alpha_T.sum() - 1.0) > 1e-9 || alpha_T.minCoeff() < 0.0)
    throw std::invalid_argument("forecast: alpha_T must be a distribution");

  Eigen::Matrix2d P;
  P << alpha_T[0], alpha_T[1], alpha_T[2], alpha_T[3];
  for (int step = 0; step < h; ++step)
    P = model.chains[0].A.transpose() * P * model.chains[1].A;
  Vector out(kNumJointStates);
  out << P(0, 0), P(0, 1), P(1, 0), P(1, 1);
  return out;
}

GridSearchResult grid_search(const FhmmModel& model, const Matrix& obs,
                             const Eigen::MatrixXi& labels,
                             const DecodeConfig& base, double omega_lo,
                             double omega_hi, int omega_steps, double v_lo,
                             double v_hi, int v_steps) {
  if (omega_steps < 1 || v_steps < 1)
    throw std::invalid_argument("grid_search: steps must be >= 1");
  if (labels.rows() != obs.rows() || labels.cols() != 2)
    throw std::invalid_argument("grid_search: labels must be T x 2");

  std::vector<int> truth(obs.rows());
  for (Eigen::Index t = 0; t < obs.rows(); ++t)
    truth[t] =
        labels(t, 0) == 1 ? kHaze : (labels(t, 1) == 1 ? kDust : kClear);

  auto grid_value = [](double lo, double hi, int steps, int i) {
    return steps == 1 ? lo : lo + (hi - lo) * i / (steps - 1);
  };

  GridSearchResult res;
  for (int io = 0; io < omega_steps; ++io) {
    const double omega = grid_value(omega_lo, omega_hi, omega_steps, io);
    DecodeConfig cfg = base;
    cfg.omega = omega;
    if (cfg.weighting == Weighting::NormalizedMi && cfg.weights) {
      // rescale each state column to sum to omega
      WeightMatrix w = *base.weights;
      for (int s = 0; s < w.w.cols(); ++s) {
        const double c = w.w.col(s).sum();
        if (c > 0.0) w.w.col(s) *= omega / c;
      }
      w.omega = omega;
      cfg.weights = w;
    }
    for (int iv = 0; iv < v_steps; ++iv) {
      cfg.v = grid_value(v_lo, v_hi, v_steps, iv);
      StatePath p = viterbi(model, obs, cfg);
      p = reclassify(p, obs,
                     base.reclassify == ReclassifyRule::None
                         ? ReclassifyRule::MergeToClear
                         : base.reclassify);
      const F1Result f1 = f1_scores(confusion(truth, to_three_class(p.states)));
      res.points.push_back({omega, cfg.v, f1.micro, f1.macro});
    }
  }
  for (size_t i = 1; i < res.points.size(); ++i) {
    const auto& a = res.points[res.best_index];
    const auto& b = res.points[i];
    if (b.micro_f1 > a.micro_f1 ||
        (b.micro_f1 == a.micro_f1 && b.macro_f1 > a.macro_f1))
      res.best_index = static_cast<int>(i);
  }
  return res;
}

}  // namespace fhmm
