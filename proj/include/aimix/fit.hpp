#pragma once

// Window-wise maximum-likelihood estimation: per-window mixture fits with
// exact forward-mode gradients, optional MAP regularization of the BetaNB
// concentration, standard errors from the observed information, and the
// global sweep over orientations, BAD partitions and fixed-allele counts.

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "aimix/distcore.hpp"
#include "aimix/models.hpp"

namespace aimix::fit {

enum class Orientation { RefGivenAlt = 0, AltGivenRef = 1 };

struct FitSettings {
  distcore::Kind kind = distcore::Kind::NB;
  long window_size = 10000; // minimum observations per window (m)
  long l = 5;               // left-truncation threshold
  double regul_alpha = 0.0; // MAP strength for the BetaNB kappa; 0 disables
  double tol = 1e-8;
  int max_evals = 2000;
  bool compute_se = true;
};

struct ParameterVector {
  double b = 1.0;
  double a = 0.0;
  double p = 0.5; // success probability (mu for BetaNB); fixed by BAD
  double kappa = 100.0;
  double w = 1.0; // weight of the component at p
};

struct WindowEstimate {
  long fixed_value = 0;
  long lo = 0;
  long hi = 0;
  long n_obs = 0;
  ParameterVector params;
  double loglik = 0.0; // unpenalized log-likelihood at the optimum
  bool converged = false;
  bool w_fixed = true; // true when BAD = 1 (w pinned to 1)
  // One entry per free parameter, in free_names() order; NaN at a box bound.
  std::vector<double> std_errors;
};

// Names of the free parameters, in packing order.
std::vector<std::string> free_names(distcore::Kind kind, bool free_w);

// Log-likelihood of a window slice under a fitted parameter vector. The
// component at p gets weight w; the mirrored component at 1-p gets 1-w and
// is skipped entirely when w == 1.
double window_loglik(const models::WindowSlice &slice, distcore::Kind kind,
                     long l, const ParameterVector &params);

// MAP penalty on kappa: n * (ln(2*bt) + 1/(kappa*bt) + 2*ln(kappa)) with
// bt = alpha * n * fixed_value. Returns 0 when alpha == 0.
double map_penalty(double kappa, double alpha, long n_obs, long fixed_value);

// Fit one window. p is pinned to BAD/(BAD+1); w is free only when BAD > 1.
WindowEstimate fit_window(const models::WindowSlice &slice, double bad,
                          const FitSettings &settings,
                          const ParameterVector *warm_start = nullptr);

// Penalized objective at params and, when grad is non-null, its exact
// gradient over the free parameters in free_names() order.
double window_objective(const models::WindowSlice &slice, double bad,
                        const FitSettings &settings,
                        const ParameterVector &params,
                        std::vector<double> *grad = nullptr);

// Standard errors of the free parameters at params, via a finite-difference
// Hessian of the objective's exact gradient. Parameters at a box bound get
// NaN. Throws SingularInformation when the information matrix is not
// positive definite.
std::vector<double> std_errors(const models::WindowSlice &slice, double bad,
                               const FitSettings &settings,
                               const ParameterVector &params);

// (orientation as int, BAD) -> partition of aggregated counts.
using PartitionKey = std::pair<int, double>;
using PartitionMap = std::map<PartitionKey, models::FixedIndex>;

struct FitResult {
  FitSettings settings;
  // partition -> fixed-allele count -> estimate
  std::map<PartitionKey, std::map<long, WindowEstimate>> estimates;
};

// Sweeps every partition over its observed fixed-allele counts in ascending
// order, warm-starting each window from the previous one. Windows that fail
// to fit are recorded with converged = false.
FitResult fit_global(const PartitionMap &partitions,
                     const FitSettings &settings);

} // namespace aimix::fit
