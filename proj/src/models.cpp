#include "aimix/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace aimix::models {

double bad_to_p(const BadValue &bad) {
  bad.validate();
  return bad.bad / (bad.bad + 1.0);
}

double effective_r(long x, const LinearBias &bias, distcore::Kind kind,
                   double p_or_mu, double kappa) {
  const double raw = bias.b * static_cast<double>(x) + bias.a;
  if (!(raw > 0.0))
    throw DomainError("effective_r: b*x + a must be positive");
  const double r = effective_r_t<double>(raw, kind, p_or_mu, kappa);
  if (!(r > 0.0))
    throw DomainError("effective_r: reparametrized r is not positive");
  return r;
}

static double logaddexp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity())
    return b;
  if (b == -std::numeric_limits<double>::infinity())
    return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

double mixture_logpmf(long x, const MixtureParams &mix) {
  if (!(mix.w >= 0.0 && mix.w <= 1.0))
    throw DomainError("mixture_logpmf: w outside [0,1]");
  if (mix.major.trunc.l != mix.minor.trunc.l)
    throw DomainError("mixture_logpmf: components must share truncation");
  if (mix.w == 1.0)
    return distcore::trunc_logpmf(x, mix.major);
  if (mix.w == 0.0)
    return distcore::trunc_logpmf(x, mix.minor);
  return logaddexp(std::log(mix.w) + distcore::trunc_logpmf(x, mix.major),
                   std::log1p(-mix.w) + distcore::trunc_logpmf(x, mix.minor));
}

WindowSlice build_window(const FixedIndex &index, long fixed_value, long m,
                         long l_min) {
  if (index.empty())
    throw EmptyWindow("build_window: empty partition");
  const long data_max = index.rbegin()->first;
  WindowSlice slice;
  slice.fixed_value = fixed_value;
  slice.lo = fixed_value;
  slice.hi = fixed_value;

  auto add_row = [&](long fixed) {
    auto it = index.find(fixed);
    if (it == index.end())
      return;
    for (const auto &[count, mult] : it->second) {
      slice.observations.push_back(WindowObs{fixed, count, mult});
      slice.n_obs += mult;
    }
  };

  add_row(fixed_value);
  bool lower_turn = true;
  while (slice.n_obs < m && (slice.lo > l_min || slice.hi < data_max)) {
    if (lower_turn && slice.lo > l_min) {
      add_row(--slice.lo);
    } else if (slice.hi < data_max) {
      add_row(++slice.hi);
    } else if (slice.lo > l_min) {
      add_row(--slice.lo);
    }
    lower_turn = !lower_turn;
  }
  if (slice.observations.empty())
    throw EmptyWindow("build_window: no observations at any expansion");
  return slice;
}

double dtbin_logpmf(long x, double r, long a, long b) {
  if (!(a < b) || !(r >= static_cast<double>(b)))
    throw DomainError("dtbin_logpmf: need a < b <= r");
  // support [a, b]; normalizer G(b) - G(a-1)
  if (x < a || x > b)
    return -std::numeric_limits<double>::infinity();
  const double p = 0.5;
  const double xv = static_cast<double>(x);
  const double lbin = std::lgamma(r + 1.0) - std::lgamma(xv + 1.0) -
                      std::lgamma(r - xv + 1.0) + xv * std::log(p) +
                      (r - xv) * std::log1p(-p);
  const double gb = specfun::reg_inc_beta(1.0 - p, r - static_cast<double>(b),
                                          static_cast<double>(b) + 1.0);
  const double ga =
      a == 0 ? 0.0
             : specfun::reg_inc_beta(1.0 - p, r - static_cast<double>(a) + 1.0,
                                     static_cast<double>(a));
  const double norm = gb - ga;
  if (!(norm > 0.0))
    throw NumericFailure("dtbin_logpmf: non-positive normalizer");
  return lbin - std::log(norm);
}

DTBinParams dtbin_fit(const std::vector<std::pair<long, long>> &window_counts) {
  std::set<long> uniq;
  long lo = std::numeric_limits<long>::max(), hi = 0;
  for (const auto &[count, mult] : window_counts) {
    if (mult <= 0)
      continue;
    uniq.insert(count);
    lo = std::min(lo, count);
    hi = std::max(hi, count);
  }
  if (uniq.size() < 4)
    throw DegenerateWindow("dtbin_fit: fewer than 4 unique count values");

  const long a = lo;
  const long b = hi;
  auto loglik = [&](double r) {
    double ll = 0.0;
    for (const auto &[count, mult] : window_counts) {
      if (mult <= 0 || count < a || count > b)
        continue;
      ll += static_cast<double>(mult) * dtbin_logpmf(count, r, a, b);
    }
    return ll;
  };

  // golden section on log r
  double left = std::log(static_cast<double>(b) + 1e-3);
  double right = std::log(std::max(20.0 * static_cast<double>(b), 100.0));
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = right - gr * (right - left);
  double x2 = left + gr * (right - left);
  double f1 = loglik(std::exp(x1));
  double f2 = loglik(std::exp(x2));
  for (int it = 0; it < 200 && right - left > 1e-10; ++it) {
    if (f1 < f2) {
      left = x1;
      x1 = x2;
      f1 = f2;
      x2 = left + gr * (right - left);
      f2 = loglik(std::exp(x2));
    } else {
      right = x2;
      x2 = x1;
      f2 = f1;
      x1 = right - gr * (right - left);
      f1 = loglik(std::exp(x1));
    }
  }
  DTBinParams out;
  out.a = a;
  out.b = b;
  out.r = std::exp(0.5 * (left + right));
  return out;
}

} // namespace aimix::models
