#include "fhmm/mi.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "fhmm/special.hpp"

namespace fhmm {

namespace {

// (value, original index) pairs sorted by value then index.
using Point = std::pair<double, int>;

// Lexicographic (distance, index) comparison relative to a query point.
struct NeighborOrder {
  double dist;
  int index;
  bool operator<(const NeighborOrder& o) const {
    if (dist != o.dist) return dist < o.dist;
    return index < o.index;
  }
};

// k-th nearest neighbor of query among `pts` (sorted, excluding the query
// itself), by expanding a window around the query's position.
NeighborOrder kth_neighbor(const std::vector<Point>& pts, double xq, int iq,
                           int k) {
  // position of the query within pts
  auto it = std::lower_bound(pts.begin(), pts.end(), Point{xq, iq});
  int pos = static_cast<int>(it - pts.begin());
  int left = pos - 1, right = pos;
  if (right < static_cast<int>(pts.size()) && pts[right].second == iq) ++right;
  NeighborOrder chosen{0.0, -1};
  for (int step = 0; step < k; ++step) {
    bool has_l = left >= 0, has_r = right < static_cast<int>(pts.size());
    if (!has_l && !has_r) break;
    NeighborOrder l{has_l ? xq - pts[left].first : 0.0,
                    has_l ? pts[left].second : 0};
    NeighborOrder r{has_r ? pts[right].first - xq : 0.0,
                    has_r ? pts[right].second : 0};
    if (has_l && (!has_r || l < r)) {
      chosen = l;
      --left;
    } else {
      chosen = r;
      ++right;
    }
  }
  return chosen;
}

}  // namespace

KnnMiResult knn_mi(const Vector& x, const std::vector<int>& z, int k) {
  const int n = static_cast<int>(x.size());
  if (static_cast<int>(z.size()) != n)
    throw std::invalid_argument("knn_mi: x and z lengths differ");
  if (n <= k + 1) throw std::invalid_argument("knn_mi: need n > k + 1");

  if ((x.array() == x[0]).all()) return {0.0, true};

  // With a single class N_c = n and every M_t = k, so the estimate is
  // identically zero; returning it directly avoids roundoff residue.
  if (std::all_of(z.begin(), z.end(), [&](int zi) { return zi == z[0]; }))
    return {0.0, false};

  std::vector<Point> all(n);
  std::map<int, std::vector<Point>> by_class;
  std::map<int, int> class_count;
  for (int i = 0; i < n; ++i) {
    all[i] = {x[i], i};
    by_class[z[i]].push_back({x[i], i});
    ++class_count[z[i]];
  }
  std::sort(all.begin(), all.end());
  for (auto& [c, pts] : by_class) std::sort(pts.begin(), pts.end());

  bool any_big = false;
  for (auto& [c, cnt] : class_count) any_big |= cnt > k;
  if (!any_big)
    throw std::invalid_argument("knn_mi: no class with more than k members");

  double sum_psi_nc = 0.0;
  for (auto& [c, cnt] : class_count) sum_psi_nc += cnt * digamma(cnt);

  double sum_psi_m = 0.0;
  for (int t = 0; t < n; ++t) {
    const auto& cls = by_class[z[t]];
    const int k_eff = std::min(k, static_cast<int>(cls.size()) - 1);
    int m;
    if (k_eff < 1) {
      m = k;  // isolated class member: neutral contribution
    } else {
      NeighborOrder nb = kth_neighbor(cls, x[t], t, k_eff);
      // Count points at or before nb in the global (distance, index) order:
      // strictly inside the radius via binary search, then a scan of the two
      // tie boundaries.
      const double rho = nb.dist;
      auto inner_lo =
          std::upper_bound(all.begin(), all.end(), Point{x[t] - rho, n});
      auto inner_hi =
          std::lower_bound(all.begin(), all.end(), Point{x[t] + rho, -1});
      m = rho > 0.0 ? static_cast<int>(inner_hi - inner_lo) - 1 : 0;
      // (the query itself sits strictly inside, hence the -1)
      for (double edge : {x[t] - rho, x[t] + rho}) {
        auto [b, e] = std::equal_range(
            all.begin(), all.end(), Point{edge, 0},
            [](const Point& a, const Point& c) { return a.first < c.first; });
        for (auto it = b; it != e; ++it) {
          if (it->second == t) continue;
          if (it->second <= nb.index) ++m;
        }
        if (rho == 0.0) break;  // both edges coincide
      }
    }
    sum_psi_m += digamma(std::max(1, m));
  }

  const double mi = digamma(n) + digamma(k) - sum_psi_nc / n - sum_psi_m / n;
  return {std::max(0.0, mi), false};
}

MiEstimate mi_state_conditional(const Matrix& obs,
                                const std::vector<int>& labels, int k) {
  const int T = static_cast<int>(obs.rows());
  const int E = static_cast<int>(obs.cols());
  if (static_cast<int>(labels.size()) != T)
    throw std::invalid_argument("mi_state_conditional: label length mismatch");

  MiEstimate out;
  out.k = k;
  out.per_state = Matrix::Zero(kNumJointStates, E);
  for (int s = 0; s < kNumJointStates; ++s) {
    int members = 0;
    for (int t = 0; t < T; ++t) members += labels[t] == s;
    if (members < 5 * (k + 1)) {
      out.fallback[s] = true;
      out.per_state.row(s).setConstant(1.0 / E);
      continue;
    }
    std::vector<int> ind(T);
    for (int t = 0; t < T; ++t) ind[t] = labels[t] == s;
    for (int i = 0; i < E; ++i)
      out.per_state(s, i) = knn_mi(obs.col(i), ind, k).value;
  }
  return out;
}

WeightMatrix weight_matrix(const Matrix& mi, double omega, WeightMode mode) {
  const int S = static_cast<int>(mi.rows());
  const int E = static_cast<int>(mi.cols());
  if (S != kNumJointStates)
    throw std::invalid_argument("weight_matrix: expected 4 state rows");
  if (mi.minCoeff() < 0.0)
    throw std::invalid_argument("weight_matrix: negative MI value");

  WeightMatrix out;
  out.omega = omega;
  out.w = Matrix::Zero(E, S);
  for (int s = 0; s < S; ++s) {
    // The estimator clips at 0, but downstream emission weighting needs
    // strictly positive exponents, so zero entries get a tiny share of the
    // dominant feature's MI.
    const double floor = 1e-3 * mi.row(s).maxCoeff();
    const Vector row = mi.row(s).transpose().cwiseMax(floor);
    if (mode == WeightMode::Raw) {
      out.w.col(s) = row;
      continue;
    }
    const double total = row.sum();
    if (total <= 0.0)
      throw std::runtime_error("weight_matrix: all-zero MI row for state (" +
                               std::to_string(s / 2) + "," +
                               std::to_string(s % 2) + ")");
    out.w.col(s) = omega * row / total;
  }
  return out;
}

LocalMiDecomposition local_mi_decomposition(const Vector& x,
                                            const std::vector<int>& z,
                                            int bins) {
  const int n = static_cast<int>(x.size());
  if (bins < 2) throw std::invalid_argument("local_mi_decomposition: bins < 2");
  if (static_cast<int>(z.size()) != n)
    throw std::invalid_argument("local_mi_decomposition: length mismatch");

  std::vector<int> classes(z);
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  const int C = static_cast<int>(classes.size());
  auto class_of = [&](int zi) {
    return static_cast<int>(std::lower_bound(classes.begin(), classes.end(),
                                             zi) -
                            classes.begin());
  };

  const double xmin = x.minCoeff(), xmax = x.maxCoeff();
  const double width = (xmax > xmin) ? (xmax - xmin) / bins : 1.0;
  auto bin_of = [&](double v) {
    int b = static_cast<int>((v - xmin) / width);
    return std::clamp(b, 0, bins - 1);
  };

  Matrix joint = Matrix::Zero(bins, C);
  for (int t = 0; t < n; ++t) joint(bin_of(x[t]), class_of(z[t])) += 1.0 / n;
  const Vector p_bin = joint.rowwise().sum();
  const Vector p_cls = joint.colwise().sum().transpose();

  LocalMiDecomposition out;
  for (int b = 0; b < bins; ++b)
    for (int c = 0; c < C; ++c) {
      LocalMiBin row;
      row.lo = xmin + b * width;
      row.hi = xmin + (b + 1) * width;
      row.cls = classes[c];
      if (joint(b, c) > 0.0)
        row.delta_i = joint(b, c) * std::log(joint(b, c) / (p_bin[b] * p_cls[c]));
      out.total += row.delta_i;
      out.bins.push_back(row);
    }
  return out;
}

}  // namespace fhmm
