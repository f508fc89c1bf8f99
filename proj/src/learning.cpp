#include "fhmm/learning.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "fhmm/emissions.hpp"
#include "fhmm/inference.hpp"
#include "fhmm/optim.hpp"

namespace fhmm {

namespace {

constexpr double kSigmaFloor = 1e-4;
constexpr double kPi0Clamp = 1e-6;
constexpr double kMinEffectiveSamples = 10.0;

double clamp_pi0(double p) {
  return std::clamp(p, kPi0Clamp, 1.0 - kPi0Clamp);
}

/// Most frequent value in a column; the inflation point of visibility data.
double modal_value(const Vector& col) {
  std::vector<double> v(col.data(), col.data() + col.size());
  std::sort(v.begin(), v.end());
  double best = v.empty() ? 0.0 : v[0];
  size_t best_count = 0, i = 0;
  while (i < v.size()) {
    size_t j = i;
    while (j < v.size() && v[j] == v[i]) ++j;
    if (j - i > best_count || (j - i == best_count && v[i] > best)) {
      best_count = j - i;
      best = v[i];
    }
    i = j;
  }
  return best;
}

struct WeightedMoments {
  Vector mean;
  Vector sd;
};

// Weighted moments of ln(x) over rows, per column.
WeightedMoments log_moments(const Matrix& log_obs, const Vector& w,
                            const std::vector<int>& rows) {
  const int E = static_cast<int>(log_obs.cols());
  Vector mean = Vector::Zero(E), m2 = Vector::Zero(E);
  double wsum = 0.0;
  for (int t : rows) wsum += w[t];
  for (int t : rows) mean += (w[t] / wsum) * log_obs.row(t).transpose();
  for (int t : rows) {
    const Vector d = log_obs.row(t).transpose() - mean;
    m2 += (w[t] / wsum) * d.cwiseProduct(d);
  }
  WeightedMoments out;
  out.mean = mean;
  out.sd = m2.cwiseSqrt().cwiseMax(kSigmaFloor);
  return out;
}

Matrix smoothed_transition_counts(const std::vector<int>& states, int chain) {
  Matrix counts = Matrix::Ones(kStatesPerChain, kStatesPerChain);
  auto of = [chain](int s) { return chain == 0 ? s / 2 : s % 2; };
  for (size_t t = 1; t < states.size(); ++t)
    counts(of(states[t - 1]), of(states[t])) += 1.0;
  for (int k = 0; k < kStatesPerChain; ++k) counts.row(k) /= counts.row(k).sum();
  return counts;
}

Vector smoothed_initial(int first_state, int chain) {
  Vector phi = Vector::Ones(kStatesPerChain);
  phi[chain == 0 ? first_state / 2 : first_state % 2] += 1.0;
  return phi / phi.sum();
}

// Pooled copula correlation from per-row z-scores under each state's fitted
// marginals. Rows at the visibility atom contribute only the complementary
// entries (pairwise-complete accumulation).
Matrix pooled_copula_correlation(const Matrix& obs, const EmissionParams& em,
                                 const Matrix& gamma, double eps_pd) {
  const int E = em.num_features();
  const Eigen::Index T = obs.rows();
  Matrix num = Matrix::Zero(E, E), den = Matrix::Zero(E, E);
  for (Eigen::Index t = 0; t < T; ++t) {
    const Vector x = obs.row(t).transpose();
    for (int s = 0; s < kNumJointStates; ++s) {
      const double g = gamma(t, s);
      if (g <= 0.0) continue;
      const Vector z = copula_transform(x, joint_state(s), em).z;
      const bool atom = (s == 0) && (x[kVisibilityDim] == em.inflated.c);
      for (int i = 0; i < E; ++i) {
        if (atom && i == kVisibilityDim) continue;
        for (int j = 0; j < E; ++j) {
          if (atom && j == kVisibilityDim) continue;
          num(i, j) += g * z[i] * z[j];
          den(i, j) += g;
        }
      }
    }
  }
  Matrix S = num.cwiseQuotient(den.cwiseMax(1e-12));
  Vector d = S.diagonal().cwiseMax(1e-12).cwiseSqrt();
  Matrix R = S.cwiseQuotient(d * d.transpose());
  R.diagonal().setOnes();
  return pd_repair(R, eps_pd);
}

// Per-state covariance of ln(x); state (0,0) keeps visibility independent
// with variance eta2.
Matrix jg_state_covariance(const Matrix& log_obs, const Vector& w, int state,
                           const std::vector<int>& rows, double eta2) {
  const int E = static_cast<int>(log_obs.cols());
  WeightedMoments mom = log_moments(log_obs, w, rows);
  double wsum = 0.0;
  for (int t : rows) wsum += w[t];
  Matrix S = Matrix::Zero(E, E);
  for (int t : rows) {
    const Vector d = log_obs.row(t).transpose() - mom.mean;
    S += (w[t] / wsum) * (d * d.transpose());
  }
  S.diagonal() = S.diagonal().cwiseMax(kSigmaFloor * kSigmaFloor);
  if (state == 0) {
    for (int i = 0; i < E; ++i) {
      S(kVisibilityDim, i) = 0.0;
      S(i, kVisibilityDim) = 0.0;
    }
    S(kVisibilityDim, kVisibilityDim) = eta2;
  }
  return S;
}

// Fallback emission row for a state with too little data.
void fallback_emission_row(EmissionParams& em, int state,
                           const std::optional<FhmmModel>& init,
                           const Matrix& log_obs) {
  if (init) {
    em.mu.row(state) = init->emissions.mu.row(state);
    em.sigma.row(state) = init->emissions.sigma.row(state);
    em.Sigma_jg[state] = init->emissions.Sigma_jg[state];
    return;
  }
  const int E = static_cast<int>(log_obs.cols());
  std::vector<int> all(log_obs.rows());
  for (size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  WeightedMoments mom = log_moments(log_obs, Vector::Ones(log_obs.rows()), all);
  em.mu.row(state) = mom.mean.transpose();
  em.sigma.row(state) = mom.sd.transpose();
  em.Sigma_jg[state] = Matrix(mom.sd.cwiseProduct(mom.sd).asDiagonal());
  (void)E;
}

}  // namespace

Matrix pd_repair(const Matrix& R, double eps) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(R, Eigen::EigenvaluesOnly);
  double lmin = es.eigenvalues().minCoeff();
  if (lmin >= eps) return R;
  Matrix out = R;
  for (int pass = 0; pass < 64 && lmin < eps * (1.0 - 1e-6); ++pass) {
    out.diagonal().array() += eps - lmin;
    const Vector d = out.diagonal().cwiseSqrt();
    out = out.cwiseQuotient(d * d.transpose());
    out.diagonal().setOnes();
    es.compute(out, Eigen::EigenvaluesOnly);
    lmin = es.eigenvalues().minCoeff();
  }
  return out;
}

ClassPriors default_class_priors() {
  ClassPriors p;
  p.prior_means.resize(kNumJointStates, 4);
  p.prior_means << 2.8276, 0.3483, 1.9637, 3.6430,   // clear
                   4.9151, 1.4853, 1.4630, 2.8348,   // dust
                   3.9571, -4.6052, 0.9672, 4.3288,  // haze
                   3.8999, -0.9239, 1.4646, 3.6022;  // haze & dust
  return p;
}

FhmmModel supervised_fit(const Matrix& obs, const LabelMatrix& labels,
                         EmissionFamily family,
                         const std::optional<FhmmModel>& init, double eps_pd) {
  const Eigen::Index T = obs.rows();
  const int E = static_cast<int>(obs.cols());
  if (labels.rows() != T || labels.cols() != 2)
    throw std::invalid_argument("supervised_fit: labels must be T x 2");

  std::vector<int> states(T);
  std::array<std::vector<int>, kNumJointStates> by_state;
  for (Eigen::Index t = 0; t < T; ++t) {
    states[t] = joint_index(labels(t, 0), labels(t, 1));
    by_state[states[t]].push_back(static_cast<int>(t));
  }
  for (int s = 0; s < kNumJointStates; ++s)
    if (by_state[s].size() == 1 && s != joint_index(1, 1) && !init)
      throw std::runtime_error("supervised_fit: state (" +
                               std::to_string(s / 2) + "," +
                               std::to_string(s % 2) +
                               ") has a single sample; cannot estimate spread");

  const Matrix log_obs = obs.array().log().matrix();
  FhmmModel model;
  model.feature_names = {"pm10", "wind", "visibility", "humidity"};
  for (int j = 0; j < kNumChains; ++j) {
    model.chains[j].A = smoothed_transition_counts(states, j);
    model.chains[j].phi = smoothed_initial(states[0], j);
  }

  auto& em = model.emissions;
  em.family = family;
  em.mu.resize(kNumJointStates, E);
  em.sigma.resize(kNumJointStates, E);

  // Inflation point: the repeated maximal visibility value in Clear rows.
  double atom = init ? init->emissions.inflated.c : 10.0;
  if (!by_state[0].empty()) {
    Vector vis(by_state[0].size());
    for (size_t i = 0; i < by_state[0].size(); ++i)
      vis[i] = obs(by_state[0][i], kVisibilityDim);
    atom = modal_value(vis);
  }

  const Vector ones = Vector::Ones(T);
  for (int s = 0; s < kNumJointStates; ++s) {
    if (by_state[s].size() < 2) {
      fallback_emission_row(em, s, init, log_obs);
      continue;
    }
    WeightedMoments mom = log_moments(log_obs, ones, by_state[s]);
    em.mu.row(s) = mom.mean.transpose();
    em.sigma.row(s) = mom.sd.transpose();
  }

  // Inflated mixture for visibility under Clear.
  {
    std::vector<int> cont;
    size_t n_atom = 0;
    for (int t : by_state[0]) {
      if (obs(t, kVisibilityDim) == atom)
        ++n_atom;
      else
        cont.push_back(t);
    }
    const size_t n0 = by_state[0].size();
    em.inflated.c = atom;
    em.inflated.pi0 =
        clamp_pi0(n0 ? static_cast<double>(n_atom) / n0 : 0.5);
    if (cont.size() >= 2) {
      Vector lv(cont.size());
      for (size_t i = 0; i < cont.size(); ++i)
        lv[i] = log_obs(cont[i], kVisibilityDim);
      const double theta = lv.mean();
      const double eta =
          std::max(kSigmaFloor, std::sqrt((lv.array() - theta).square().mean()));
      em.inflated.theta = theta;
      em.inflated.eta2 = eta * eta;
    } else if (init) {
      em.inflated.theta = init->emissions.inflated.theta;
      em.inflated.eta2 = init->emissions.inflated.eta2;
    } else if (!by_state[0].empty()) {
      em.inflated.theta = std::log(atom);
      em.inflated.eta2 = 0.25;
    }
    if (!by_state[0].empty()) {
      em.mu(0, kVisibilityDim) = em.inflated.theta;
      em.sigma(0, kVisibilityDim) = em.inflated.eta();
    }
  }

  if (family == EmissionFamily::JointGaussian) {
    for (int s = 0; s < kNumJointStates; ++s) {
      if (by_state[s].size() < 2) continue;  // fallback already set
      em.Sigma_jg[s] =
          jg_state_covariance(log_obs, ones, s, by_state[s], em.inflated.eta2);
    }
    for (int s = 0; s < kNumJointStates; ++s)
      if (em.Sigma_jg[s].rows() != E) fallback_emission_row(em, s, init, log_obs);
    em.R_global = Matrix::Identity(E, E);
  } else {
    for (auto& S : em.Sigma_jg) S = Matrix::Identity(E, E);
    Matrix gamma = Matrix::Zero(T, kNumJointStates);
    for (Eigen::Index t = 0; t < T; ++t) gamma(t, states[t]) = 1.0;
    em.R_global = pooled_copula_correlation(obs, em, gamma, eps_pd);
  }

  require_valid(model);
  return model;
}

FhmmModel kmeans_init(const Matrix& obs, const ClassPriors& priors,
                      std::uint64_t seed, EmissionFamily family) {
  const Eigen::Index T = obs.rows();
  const int E = static_cast<int>(obs.cols());
  if (priors.prior_means.rows() != kNumJointStates ||
      priors.prior_means.cols() != E)
    throw std::invalid_argument("kmeans_init: prior means must be 4 x E");

  const Matrix log_obs = obs.array().log().matrix();
  const double atom = modal_value(obs.col(kVisibilityDim));

  std::vector<int> active;  // rows clustered (visibility off the atom)
  for (Eigen::Index t = 0; t < T; ++t)
    if (obs(t, kVisibilityDim) != atom) active.push_back(static_cast<int>(t));
  if (active.size() < kNumJointStates)
    throw std::runtime_error("kmeans_init: too few non-inflated rows");

  std::mt19937_64 rng(seed);
  std::vector<int> assign(active.size());
  Matrix centers(kNumJointStates, E);

  bool ok = false;
  for (int restart = 0; restart < 10 && !ok; ++restart) {
    if (restart == 0) {
      // Seed the first run at the prior class means so rare classes keep a
      // center instead of the big cluster being split.
      centers = priors.prior_means;
    } else {
      // k-means++ seeding.
      std::uniform_int_distribution<size_t> pick(0, active.size() - 1);
      centers.row(0) = log_obs.row(active[pick(rng)]);
      std::vector<double> d2(active.size(),
                             std::numeric_limits<double>::infinity());
      for (int cidx = 1; cidx < kNumJointStates; ++cidx) {
        double total = 0.0;
        for (size_t i = 0; i < active.size(); ++i) {
          const double d =
              (log_obs.row(active[i]) - centers.row(cidx - 1)).squaredNorm();
          d2[i] = std::min(d2[i], d);
          total += d2[i];
        }
        std::uniform_real_distribution<double> u(0.0, total);
        double r = u(rng), acc = 0.0;
        size_t chosen = active.size() - 1;
        for (size_t i = 0; i < active.size(); ++i) {
          acc += d2[i];
          if (r <= acc) {
            chosen = i;
            break;
          }
        }
        centers.row(cidx) = log_obs.row(active[chosen]);
      }
    }

    for (int iter = 0; iter < 200; ++iter) {
      bool changed = false;
      for (size_t i = 0; i < active.size(); ++i) {
        int best = 0;
        double bestd = std::numeric_limits<double>::infinity();
        for (int c = 0; c < kNumJointStates; ++c) {
          const double d = (log_obs.row(active[i]) - centers.row(c)).squaredNorm();
          if (d < bestd) {
            bestd = d;
            best = c;
          }
        }
        if (assign[i] != best) {
          assign[i] = best;
          changed = true;
        }
      }
      Matrix sums = Matrix::Zero(kNumJointStates, E);
      Eigen::Vector4d counts = Eigen::Vector4d::Zero();
      for (size_t i = 0; i < active.size(); ++i) {
        sums.row(assign[i]) += log_obs.row(active[i]);
        counts[assign[i]] += 1.0;
      }
      if (counts.minCoeff() < 1.0) break;  // empty cluster: reseed
      for (int c = 0; c < kNumJointStates; ++c) centers.row(c) = sums.row(c) / counts[c];
      if (!changed) {
        ok = true;
        break;
      }
    }
  }
  if (!ok)
    throw std::runtime_error("kmeans_init: empty cluster after 10 restarts");

  // Greedy matching of clusters to classes by ascending distance to priors.
  std::vector<std::tuple<double, int, int>> pairs;  // (dist, cluster, class)
  for (int c = 0; c < kNumJointStates; ++c)
    for (int s = 0; s < kNumJointStates; ++s)
      pairs.emplace_back((centers.row(c) - priors.prior_means.row(s)).norm(), c, s);
  std::sort(pairs.begin(), pairs.end());
  std::array<int, kNumJointStates> cluster_to_class;
  cluster_to_class.fill(-1);
  std::array<bool, kNumJointStates> class_used{};
  for (const auto& [d, c, s] : pairs) {
    if (cluster_to_class[c] >= 0 || class_used[s]) continue;
    cluster_to_class[c] = s;
    class_used[s] = true;
  }

  // Labels over the full sequence; atom rows join the Clear class.
  LabelMatrix labels(T, 2);
  size_t ai = 0;
  for (Eigen::Index t = 0; t < T; ++t) {
    int cls = 0;
    if (obs(t, kVisibilityDim) != atom) cls = cluster_to_class[assign[ai++]];
    labels(t, 0) = cls / 2;
    labels(t, 1) = cls % 2;
  }

  FhmmModel model = supervised_fit(obs, labels, family);
  model.emissions.R_global = Matrix::Identity(E, E);
  return model;
}

EmResult em_fit(const Matrix& obs, const FhmmModel& init, const EmConfig& cfg) {
  require_valid(init);
  if (cfg.max_iters < 1 || !(cfg.tol > 0.0))
    throw std::invalid_argument("em_fit: bad config");
  const Eigen::Index T = obs.rows();
  const int E = static_cast<int>(obs.cols());
  const Matrix log_obs = obs.array().log().matrix();

  EmResult res;
  res.model = init;
  double prev_ll = -std::numeric_limits<double>::infinity();

  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    PosteriorBundle post = posteriors(res.model, obs, /*want_xi=*/true);
    res.loglik_trace.push_back(post.loglik);
    res.iterations = iter + 1;
    if (!std::isfinite(post.loglik))
      throw std::runtime_error("em_fit: non-finite log-likelihood");
    if (iter > 0 && post.loglik < prev_ll - 1e-8)
      throw std::runtime_error("em_fit: log-likelihood decreased by " +
                               std::to_string(prev_ll - post.loglik));
    if (iter > 0 && post.loglik - prev_ll < cfg.tol) {
      res.converged = true;
      break;
    }
    prev_ll = post.loglik;

    auto& em = res.model.emissions;

    // Per-chain transition update: marginalize xi over the other chain.
    for (int j = 0; j < kNumChains; ++j) {
      Matrix num = Matrix::Zero(kStatesPerChain, kStatesPerChain);
      for (const Matrix& xi : post.xi)
        for (int k = 0; k < kNumJointStates; ++k)
          for (int l = 0; l < kNumJointStates; ++l) {
            const int kj = (j == 0) ? k / 2 : k % 2;
            const int lj = (j == 0) ? l / 2 : l % 2;
            num(kj, lj) += xi(k, l);
          }
      for (int k = 0; k < kStatesPerChain; ++k) {
        const double rsum = num.row(k).sum();
        if (rsum > 0.0) res.model.chains[j].A.row(k) = num.row(k) / rsum;
      }
      Vector phi = Vector::Zero(kStatesPerChain);
      for (int s = 0; s < kNumJointStates; ++s)
        phi[(j == 0) ? s / 2 : s % 2] += post.gamma(0, s);
      res.model.chains[j].phi = phi / phi.sum();
    }

    // The transition and phi updates above are exact M-steps; the emission
    // moment and pooled-correlation updates below are the surrogate forms,
    // which can overshoot, so each block is kept only when the observed
    // log-likelihood does not drop.
    double cur_ll = forward(res.model, obs).loglik;
    EmissionParams snapshot = res.model.emissions;

    // Emission updates, gamma-weighted.
    std::vector<int> all_rows(T);
    for (Eigen::Index t = 0; t < T; ++t) all_rows[t] = static_cast<int>(t);
    for (int s = 0; s < kNumJointStates; ++s) {
      const Vector g = post.gamma.col(s);
      const double mass = g.sum();
      const bool rare_hold = (s == joint_index(1, 1)) && mass < kMinEffectiveSamples;
      if (rare_hold || mass < 1e-8) continue;  // hold at current values
      WeightedMoments mom = log_moments(log_obs, g, all_rows);
      for (int i = 0; i < E; ++i) {
        if (s == 0 && i == kVisibilityDim) continue;
        em.mu(s, i) = mom.mean[i];
        em.sigma(s, i) = mom.sd[i];
      }
      if (em.family == EmissionFamily::JointGaussian && s != 0)
        em.Sigma_jg[s] = jg_state_covariance(log_obs, g, s, all_rows, em.inflated.eta2);
    }

    // Inflated mixture: closed-form pi0 at the atom, direct search for
    // (theta, eta2) on the continuous branch.
    {
      const Vector g = post.gamma.col(0);
      double mass_atom = 0.0, mass_all = 0.0;
      std::vector<int> cont;
      for (Eigen::Index t = 0; t < T; ++t) {
        if (g[t] <= 0.0) continue;
        mass_all += g[t];
        if (obs(t, kVisibilityDim) == em.inflated.c)
          mass_atom += g[t];
        else
          cont.push_back(static_cast<int>(t));
      }
      if (mass_all > 1e-8) {
        em.inflated.pi0 = clamp_pi0(mass_atom / mass_all);
        double wsum = 0.0, wmean = 0.0;
        for (int t : cont) {
          wsum += g[t];
          wmean += g[t] * log_obs(t, kVisibilityDim);
        }
        if (wsum > 1e-8) {
          wmean /= wsum;
          double wvar = 0.0;
          for (int t : cont) {
            const double d = log_obs(t, kVisibilityDim) - wmean;
            wvar += g[t] * d * d;
          }
          wvar = std::max(wvar / wsum, kSigmaFloor * kSigmaFloor);
          auto neg_ll = [&](const std::vector<double>& p) {
            const double theta = p[0], eta = std::exp(p[1]);
            double acc = 0.0;
            for (int t : cont) {
              const double d = (log_obs(t, kVisibilityDim) - theta) / eta;
              acc += g[t] * (std::log(eta) + 0.5 * d * d);
            }
            return acc;
          };
          auto best = nelder_mead(neg_ll, {wmean, 0.5 * std::log(wvar)}, 0.05);
          em.inflated.theta = best[0];
          em.inflated.eta2 =
              std::max(std::exp(2.0 * best[1]), kSigmaFloor * kSigmaFloor);
          em.mu(0, kVisibilityDim) = em.inflated.theta;
          em.sigma(0, kVisibilityDim) = em.inflated.eta();
        }
      }
      if (em.family == EmissionFamily::JointGaussian) {
        const Vector g0 = post.gamma.col(0);
        if (g0.sum() > 1e-8)
          em.Sigma_jg[0] =
              jg_state_covariance(log_obs, g0, 0, all_rows, em.inflated.eta2);
      }
    }

    {
      const double try_ll = forward(res.model, obs).loglik;
      if (std::isfinite(try_ll) && try_ll >= cur_ll) {
        cur_ll = try_ll;
        snapshot = em;
      } else {
        em = snapshot;
      }
    }

    if (em.family == EmissionFamily::LogNormalCopula) {
      em.R_global = pooled_copula_correlation(obs, em, post.gamma, cfg.eps_pd);
      const double try_ll = forward(res.model, obs).loglik;
      if (!(std::isfinite(try_ll) && try_ll >= cur_ll)) em = snapshot;
    }

    require_valid(res.model);
  }
  return res;
}

}  // namespace fhmm
