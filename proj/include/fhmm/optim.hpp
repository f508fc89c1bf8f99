#ifndef FHMM_OPTIM_HPP
#define FHMM_OPTIM_HPP

#include <functional>
#include <vector>

namespace fhmm {

/// Nelder-Mead direct search (minimization). Stops when the simplex objective
/// spread falls below tol or max_iters is reached.
std::vector<double> nelder_mead(
    const std::function<double(const std::vector<double>&)>& f,
    std::vector<double> x0, double step = 0.1, double tol = 1e-8,
    int max_iters = 2000);

}  // namespace fhmm

#endif
