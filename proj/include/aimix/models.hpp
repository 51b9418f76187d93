#pragma once

// Assembles distributions into scoring models: linear reference bias,
// r-reparametrization, BAD mixtures, sliding-window slicing and the DTBin
// linearity diagnostic.

#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "aimix/distcore.hpp"
#include "aimix/errors.hpp"

namespace aimix::models {

struct LinearBias {
  double b = 1.0; // slope
  double a = 0.0; // intercept
};

struct BadValue {
  double bad = 1.0;
  void validate() const {
    if (!(bad >= 1.0))
      throw DomainError("BadValue: BAD must be >= 1");
  }
};

// p = BAD/(BAD+1)
double bad_to_p(const BadValue &bad);

// Raw r = b*x + a followed by the model-specific rescaling that aligns the
// distribution mean with the NB mean. NB passes through unchanged.
template <class T>
T effective_r_t(T raw_r, distcore::Kind kind, T p_or_mu, T kappa) {
  using std::pow;
  switch (kind) {
  case distcore::Kind::NB:
    return raw_r;
  case distcore::Kind::MCNB:
    return raw_r * (T(1.0) - pow(p_or_mu, raw_r)) / (T(1.0) - p_or_mu);
  default: {
    const T denom = kappa * (T(1.0) - p_or_mu);
    return raw_r * (denom - T(1.0)) / denom;
  }
  }
}

double effective_r(long x, const LinearBias &bias, distcore::Kind kind,
                   double p_or_mu, double kappa);

struct MixtureParams {
  double w = 1.0;
  distcore::DistributionSpec major; // component at p
  distcore::DistributionSpec minor; // component at 1-p
};

double mixture_logpmf(long x, const MixtureParams &mix);

// One sliding-window position: observations of the variable allele count
// conditioned on the fixed allele count. Each row keeps its own fixed count
// so that b and a stay identifiable inside the window.
struct WindowObs {
  long fixed = 0;
  long count = 0;
  long mult = 0;
};

struct WindowSlice {
  long fixed_value = 0;
  long lo = 0;
  long hi = 0;
  std::vector<WindowObs> observations;
  long n_obs = 0;
};

// Rows of one (orientation, BAD) partition: fixed count -> aggregated
// (variable_count, multiplicity) pairs.
using FixedIndex = std::map<long, std::vector<std::pair<long, long>>>;

// Expands alternately one count value per side (lower first, never below
// l_min) until n_obs >= m or the partition is exhausted.
WindowSlice build_window(const FixedIndex &index, long fixed_value, long m,
                         long l_min);

struct DTBinParams {
  double r = 0.0;
  long a = 0;
  long b = 0;
};

// Doubly truncated binomial log density at fixed p = 1/2, non-integer size r.
double dtbin_logpmf(long x, double r, long a, long b);

// ML fit of the DTBin size parameter on a window of counts; a, b are set to
// the window's min and max. Diagnostic only.
DTBinParams dtbin_fit(const std::vector<std::pair<long, long>> &window_counts);

} // namespace aimix::models
