#include "fhmm/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "fhmm/emissions.hpp"
#include "fhmm/optim.hpp"

namespace fhmm {

namespace {

// Mann-Whitney AUC with midranks; equivalent to the trapezoid rule over
// tied score blocks.
double binary_auc(const std::vector<double>& score,
                  const std::vector<int>& pos) {
  const size_t n = score.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return score[a] < score[b]; });
  std::vector<double> rank(n);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j < n && score[order[j]] == score[order[i]]) ++j;
    const double mid = 0.5 * (i + 1 + j);  // midrank, 1-based
    for (size_t u = i; u < j; ++u) rank[order[u]] = mid;
    i = j;
  }
  double rpos = 0.0;
  size_t np = 0;
  for (size_t t = 0; t < n; ++t)
    if (pos[t]) {
      rpos += rank[t];
      ++np;
    }
  const size_t nn = n - np;
  if (np == 0 || nn == 0) return std::numeric_limits<double>::quiet_NaN();
  return (rpos - 0.5 * np * (np + 1)) / (static_cast<double>(np) * nn);
}

std::vector<std::pair<double, double>> roc_points(
    const std::vector<double>& score, const std::vector<int>& pos) {
  const size_t n = score.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return score[a] > score[b]; });
  double np = 0, nn = 0;
  for (int p : pos) (p ? np : nn) += 1;
  std::vector<std::pair<double, double>> pts{{0.0, 0.0}};
  double tp = 0, fp = 0;
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j < n && score[order[j]] == score[order[i]]) ++j;
    for (size_t u = i; u < j; ++u) (pos[order[u]] ? tp : fp) += 1;
    pts.emplace_back(nn ? fp / nn : 0.0, np ? tp / np : 0.0);
    i = j;
  }
  return pts;
}

double neg_loglik_gamma(const Vector& x, double log_k, double log_theta) {
  const double k = std::exp(log_k), theta = std::exp(log_theta);
  double ll = 0.0;
  for (double v : x)
    ll += (k - 1.0) * std::log(v) - v / theta - k * std::log(theta) -
          std::lgamma(k);
  return -ll;
}

double neg_loglik_weibull(const Vector& x, double log_k, double log_lam) {
  const double k = std::exp(log_k), lam = std::exp(log_lam);
  double ll = 0.0;
  for (double v : x) {
    const double r = v / lam;
    ll += std::log(k / lam) + (k - 1.0) * std::log(r) - std::pow(r, k);
  }
  return -ll;
}

}  // namespace

std::vector<int> to_three_class(const std::vector<HiddenState>& states) {
  std::vector<int> out(states.size());
  for (size_t t = 0; t < states.size(); ++t) {
    const auto& s = states[t];
    if (s.k1 == 1 && s.k2 == 1)
      throw std::runtime_error(
          "to_three_class: residual (1,1) state at t=" + std::to_string(t) +
          "; apply reclassification first");
    out[t] = s.k1 == 1 ? kHaze : (s.k2 == 1 ? kDust : kClear);
  }
  return out;
}

ConfusionMatrix confusion(const std::vector<int>& truth,
                          const std::vector<int>& predicted) {
  if (truth.size() != predicted.size())
    throw std::invalid_argument("confusion: length mismatch");
  ConfusionMatrix cm;
  for (size_t t = 0; t < truth.size(); ++t) {
    if (truth[t] < 0 || truth[t] > 2 || predicted[t] < 0 || predicted[t] > 2)
      throw std::invalid_argument("confusion: class out of range");
    cm.counts(truth[t], predicted[t]) += 1.0;
  }
  return cm;
}

F1Result f1_scores(const ConfusionMatrix& cm) {
  if (cm.total() <= 0.0) throw std::invalid_argument("f1_scores: empty matrix");
  F1Result r;
  double tp_sum = 0.0, fp_sum = 0.0, fn_sum = 0.0;
  for (int k = 0; k < 3; ++k) {
    const double tp = cm.counts(k, k);
    const double fp = cm.counts.col(k).sum() - tp;
    const double fn = cm.counts.row(k).sum() - tp;
    tp_sum += tp;
    fp_sum += fp;
    fn_sum += fn;
    const double den = 2.0 * tp + fp + fn;
    r.per_class[k] = den > 0.0 ? 2.0 * tp / den : 0.0;
  }
  r.micro = 2.0 * tp_sum / (2.0 * tp_sum + fp_sum + fn_sum);
  r.macro = r.per_class.mean();
  return r;
}

RocResult roc_auc(const Matrix& scores, const std::vector<int>& truth) {
  const int T = static_cast<int>(scores.rows());
  if (scores.cols() != 3) throw std::invalid_argument("roc_auc: need 3 columns");
  if (static_cast<int>(truth.size()) != T)
    throw std::invalid_argument("roc_auc: length mismatch");
  for (int t = 0; t < T; ++t)
    if (std::abs(scores.row(t).sum() - 1.0) > 1e-6)
      throw std::invalid_argument("roc_auc: row " + std::to_string(t) +
                                  " does not sum to 1");

  RocResult out;
  std::vector<double> pooled_score;
  std::vector<int> pooled_pos;
  double macro_sum = 0.0;
  int defined = 0;
  for (int c = 0; c < 3; ++c) {
    std::vector<double> s(T);
    std::vector<int> p(T);
    for (int t = 0; t < T; ++t) {
      s[t] = scores(t, c);
      p[t] = truth[t] == c;
      pooled_score.push_back(s[t]);
      pooled_pos.push_back(p[t]);
    }
    const double auc = binary_auc(s, p);
    auto& curve = out.per_class[c];
    if (std::isnan(auc)) {
      curve.defined = false;
    } else {
      curve.auc = auc;
      curve.points = roc_points(s, p);
      macro_sum += auc;
      ++defined;
    }
  }
  out.macro_auc = defined ? macro_sum / defined : 0.0;
  out.micro_auc = binary_auc(pooled_score, pooled_pos);
  return out;
}

std::vector<AicEntry> delta_aic(const Vector& samples,
                                const std::vector<AicFamily>& candidates) {
  const int n = static_cast<int>(samples.size());
  if (n < 30) throw std::invalid_argument("delta_aic: need n >= 30");
  const bool positive = samples.minCoeff() > 0.0;

  std::vector<AicEntry> out;
  for (AicFamily fam : candidates) {
    AicEntry e;
    e.family = fam;
    double ll = 0.0;
    switch (fam) {
      case AicFamily::LogNormal: {
        e.name = "lognormal";
        if (!positive) {
          e.skipped = true;
          break;
        }
        const Vector lx = samples.array().log();
        const double mu = lx.mean();
        const double s2 = (lx.array() - mu).square().mean();
        const double s = std::sqrt(std::max(s2, 1e-300));
        for (double v : samples) ll += lognormal_logpdf(v, mu, s);
        break;
      }
      case AicFamily::Normal: {
        e.name = "normal";
        const double mu = samples.mean();
        const double s2 =
            std::max((samples.array() - mu).square().mean(), 1e-300);
        ll = -0.5 * n * (std::log(2.0 * M_PI * s2) + 1.0);
        break;
      }
      case AicFamily::Gamma: {
        e.name = "gamma";
        if (!positive) {
          e.skipped = true;
          break;
        }
        const double mean = samples.mean();
        const double lmean = samples.array().log().mean();
        // moment start: k ~ 1/(2(ln mean - mean ln))
        const double gap = std::max(std::log(mean) - lmean, 1e-8);
        const double k0 = std::max(0.5 / gap, 1e-2);
        auto f = [&](const std::vector<double>& p) {
          return neg_loglik_gamma(samples, p[0], p[1]);
        };
        auto best = nelder_mead(f, {std::log(k0), std::log(mean / k0)}, 0.2);
        ll = -neg_loglik_gamma(samples, best[0], best[1]);
        break;
      }
      case AicFamily::Weibull: {
        e.name = "weibull";
        if (!positive) {
          e.skipped = true;
          break;
        }
        auto f = [&](const std::vector<double>& p) {
          return neg_loglik_weibull(samples, p[0], p[1]);
        };
        auto best = nelder_mead(f, {0.0, std::log(samples.mean())}, 0.2);
        ll = -neg_loglik_weibull(samples, best[0], best[1]);
        break;
      }
    }
    if (!e.skipped) e.aic = 2.0 * 2.0 - 2.0 * ll;
    out.push_back(e);
  }

  double best = std::numeric_limits<double>::infinity();
  for (const auto& e : out)
    if (!e.skipped) best = std::min(best, e.aic);
  for (auto& e : out)
    if (!e.skipped) e.delta = e.aic - best;
  std::stable_sort(out.begin(), out.end(), [](const AicEntry& a,
                                              const AicEntry& b) {
    if (a.skipped != b.skipped) return !a.skipped;
    return a.aic < b.aic;
  });
  return out;
}

}  // namespace fhmm
