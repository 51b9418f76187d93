#pragma once

// Box-constrained maximization: projected L-BFGS with Armijo backtracking.
// Deterministic; convergence is tested on the projected gradient norm.

#include <functional>
#include <span>
#include <vector>

namespace aimix::optimize {

struct Box {
  std::vector<double> lo;
  std::vector<double> hi;
};

struct Result {
  std::vector<double> x;
  double f = 0.0;
  bool converged = false;
  int n_evals = 0;
  double proj_grad_norm = 0.0;
};

// objective(x, grad_out) -> f; grad_out has the same size as x.
using Objective =
    std::function<double(std::span<const double>, std::span<double>)>;

Result maximize(const Objective &objective, std::vector<double> x0,
                const Box &box, double tol = 1e-8, int max_evals = 2000);

// 1-D maximization by golden section on [lo, hi].
double maximize_scalar(const std::function<double(double)> &f, double lo,
                       double hi, double tol = 1e-10, int max_iter = 200);

} // namespace aimix::optimize
