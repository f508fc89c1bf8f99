#include "fhmm/optim.hpp"

#include <algorithm>
#include <cmath>

namespace fhmm {

std::vector<double> nelder_mead(
    const std::function<double(const std::vector<double>&)>& f,
    std::vector<double> x0, double step, double tol, int max_iters) {
  const size_t n = x0.size();
  std::vector<std::vector<double>> simplex(n + 1, x0);
  for (size_t i = 0; i < n; ++i) simplex[i + 1][i] += step;
  std::vector<double> fx(n + 1);
  for (size_t i = 0; i <= n; ++i) fx[i] = f(simplex[i]);

  std::vector<size_t> order(n + 1);
  for (int it = 0; it < max_iters; ++it) {
    for (size_t i = 0; i <= n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return fx[a] < fx[b]; });
    const size_t best = order[0], worst = order[n], second = order[n - 1];
    if (std::abs(fx[worst] - fx[best]) < tol) break;

    std::vector<double> centroid(n, 0.0);
    for (size_t i = 0; i <= n; ++i) {
      if (i == worst) continue;
      for (size_t d = 0; d < n; ++d) centroid[d] += simplex[i][d] / n;
    }
    auto along = [&](double coef) {
      std::vector<double> p(n);
      for (size_t d = 0; d < n; ++d)
        p[d] = centroid[d] + coef * (simplex[worst][d] - centroid[d]);
      return p;
    };

    auto refl = along(-1.0);
    const double f_refl = f(refl);
    if (f_refl < fx[best]) {
      auto exp_p = along(-2.0);
      const double f_exp = f(exp_p);
      if (f_exp < f_refl) {
        simplex[worst] = std::move(exp_p);
        fx[worst] = f_exp;
      } else {
        simplex[worst] = std::move(refl);
        fx[worst] = f_refl;
      }
    } else if (f_refl < fx[second]) {
      simplex[worst] = std::move(refl);
      fx[worst] = f_refl;
    } else {
      auto contr = along(f_refl < fx[worst] ? -0.5 : 0.5);
      const double f_contr = f(contr);
      if (f_contr < std::min(f_refl, fx[worst])) {
        simplex[worst] = std::move(contr);
        fx[worst] = f_contr;
      } else {
        // Shrink toward the best vertex.
        for (size_t i = 0; i <= n; ++i) {
          if (i == best) continue;
          for (size_t d = 0; d < n; ++d)
            simplex[i][d] = simplex[best][d] + 0.5 * (simplex[i][d] - simplex[best][d]);
          fx[i] = f(simplex[i]);
        }
      }
    }
  }
  size_t best = 0;
  for (size_t i = 1; i <= n; ++i)
    if (fx[i] < fx[best]) best = i;
  return simplex[best];
}

}  // namespace fhmm
