#pragma once

// PMFs (recurrent and direct), CDFs, truncation and moments for the NB,
// BetaNB and MCNB distributions.
//
// BetaNB parameter convention: the per-read success probability of the
// counted allele is Beta(mu*kappa, (1-mu)*kappa) distributed, giving
//   f(x) = C(x+r-1, x) * B(mu*k + x, (1-mu)*k + r) / B(mu*k, (1-mu)*k),
// the convention consistent with the closed-form moments and the
// kappa -> infinity NB limit.

#include <cmath>
#include <cstdint>
#include <limits>
#include <variant>
#include <vector>

#include "aimix/bigfloat.hpp"
#include "aimix/errors.hpp"
#include "aimix/specfun.hpp"

namespace aimix::distcore {

enum class Kind { NB, BetaNB, MCNB };

struct NBParams {
  double r = 1.0;
  double p = 0.5;
  void validate() const {
    if (!(r > 0.0) || !(p > 0.0) || !(p < 1.0))
      throw DomainError("NBParams: need r > 0, p in (0,1)");
  }
};

struct BetaNBParams {
  double r = 1.0;
  double mu = 0.5;
  double kappa = 2.0;
  double alpha() const { return mu * kappa; }
  double beta() const { return (1.0 - mu) * kappa; }
  void validate() const {
    if (!(r > 0.0) || !(mu > 0.0) || !(mu < 1.0) || !(kappa > 0.0))
      throw DomainError("BetaNBParams: need r > 0, mu in (0,1), kappa > 0");
  }
};

struct MCNBParams {
  double r = 1.0;
  double p = 0.5;
  void validate() const {
    if (!(r > 0.0) || !(p > 0.0) || !(p < 1.0))
      throw DomainError("MCNBParams: need r > 0, p in (0,1)");
  }
};

struct Truncation {
  long l = 0;
  void validate() const {
    if (l < 0)
      throw DomainError("Truncation: l must be non-negative");
  }
};

struct DistributionSpec {
  Kind kind = Kind::NB;
  std::variant<NBParams, BetaNBParams, MCNBParams> params;
  Truncation trunc;

  static DistributionSpec nb(double r, double p, long l = 0) {
    return {Kind::NB, NBParams{r, p}, Truncation{l}};
  }
  static DistributionSpec betanb(double r, double mu, double kappa,
                                 long l = 0) {
    return {Kind::BetaNB, BetaNBParams{r, mu, kappa}, Truncation{l}};
  }
  static DistributionSpec mcnb(double r, double p, long l = 0) {
    return {Kind::MCNB, MCNBParams{r, p}, Truncation{l}};
  }
  void validate() const {
    trunc.validate();
    std::visit([](const auto &pp) { pp.validate(); }, params);
    const bool ok = (kind == Kind::NB &&
                     std::holds_alternative<NBParams>(params)) ||
                    (kind == Kind::BetaNB &&
                     std::holds_alternative<BetaNBParams>(params)) ||
                    (kind == Kind::MCNB &&
                     std::holds_alternative<MCNBParams>(params));
    if (!ok)
      throw DomainError("DistributionSpec: params variant does not match kind");
  }
};

// ---- templated kernels -----------------------------------------------------

template <class T> T nb_logpmf_t(long x, T r, T p) {
  using std::lgamma;
  using std::log;
  const T xv(static_cast<double>(x));
  return lgamma(xv + r) - lgamma(r) - lgamma(xv + T(1.0)) +
         r * log(T(1.0) - p) + xv * log(p);
}

template <class T> T betanb_logpmf_t(long x, T r, T mu, T kappa) {
  using std::lgamma;
  const T xv(static_cast<double>(x));
  const T a = mu * kappa;
  const T b = (T(1.0) - mu) * kappa;
  return lgamma(xv + r) - lgamma(r) - lgamma(xv + T(1.0)) +
         specfun::lbeta(a + xv, b + r) - specfun::lbeta(a, b);
}

// Panjer step for NB, run on log values (underflow-free).
template <class T> std::vector<T> nb_logpmf_table_t(long x_max, T r, T p) {
  using std::log;
  std::vector<T> lf(static_cast<size_t>(x_max) + 1);
  lf[0] = r * log(T(1.0) - p);
  const T logp = log(p);
  for (long x = 1; x <= x_max; ++x) {
    const T xv(static_cast<double>(x));
    lf[x] = lf[x - 1] + logp + log(r + xv - T(1.0)) - log(xv);
  }
  return lf;
}

// Hesselager step for BetaNB, log space.
template <class T>
std::vector<T> betanb_logpmf_table_t(long x_max, T r, T mu, T kappa) {
  using std::lgamma;
  using std::log;
  const T a = mu * kappa;
  const T b = (T(1.0) - mu) * kappa;
  std::vector<T> lf(static_cast<size_t>(x_max) + 1);
  lf[0] = lgamma(kappa) + lgamma(b + r) - lgamma(b) - lgamma(kappa + r);
  for (long x = 1; x <= x_max; ++x) {
    const T xv(static_cast<double>(x));
    lf[x] = lf[x - 1] + log((xv + r - T(1.0)) * (xv + a - T(1.0))) -
            log(xv * (xv + kappa + r - T(1.0)));
  }
  return lf;
}

// MCNB two-term recurrence, linear space with a tracked log offset.
// Returns log PMF values.
template <class T> std::vector<T> mcnb_logpmf_table_t(long x_max, T r, T p) {
  using std::exp;
  using std::expm1;
  using std::log;
  using std::pow;
  const T one(1.0);
  const T s = p + one / p - one;
  const T log_s = log(s);
  const T log_p = log(p);
  const T log_norm = log(one - pow(p, r)); // log(1 - p^r)

  std::vector<T> lf(static_cast<size_t>(x_max) + 1);
  const T a_exp = r * log_s;
  T lf0;
  if (value_of(a_exp) > std::log(1e15)) {
    // (s^r - 1) ~= s^r at these magnitudes; subtraction of 1 omitted
    lf0 = r * log_p + a_exp - log_norm;
  } else {
    lf0 = r * log_p + log(expm1(a_exp)) - log_norm;
  }
  lf[0] = lf0;
  if (x_max == 0)
    return lf;
  const T lf1 = log(r) + T(2.0) * log(one - p) + r * log_p +
                (r - one) * log_s - log_norm;
  lf[1] = lf1;

  // carried linear values f(x-1), f(x-2) relative to exp(offset)
  T offset = lf1;
  T u1 = one;                 // f(1) / exp(offset)
  T u2 = exp(lf0 - offset);   // f(0) / exp(offset)
  const T p2 = p * p;
  for (long x = 2; x <= x_max; ++x) {
    const T xv(static_cast<double>(x));
    const T den = xv * (p2 - p + one);
    const T ax = (p2 * (r + xv - one) - T(2.0) * p * r + r + xv - one) / den;
    const T bx = p * (T(2.0) - xv) / den;
    T u = ax * p * u1 + bx * p2 * u2;
    const double uv = value_of(u);
    if (uv < 0.0) {
      if (uv < -1e-12 * value_of(u1))
        throw NumericFailure("mcnb_pmf_table: recursion went negative");
      u = T(0.0);
    }
    if (value_of(u) > 0.0) {
      lf[x] = log(u) + offset;
    } else {
      lf[x] = T(-std::numeric_limits<double>::infinity());
    }
    u2 = u1;
    u1 = u;
    if (value_of(u1) > 0.0 && value_of(u1) < 1e-250) {
      const T scale = one / u1;
      offset = offset + log(u1);
      u2 = u2 * scale;
      u1 = one;
    }
  }
  return lf;
}

template <class T>
std::vector<T> logpmf_table_t(long x_max, Kind kind, T r, T p_or_mu, T kappa) {
  switch (kind) {
  case Kind::NB:
    return nb_logpmf_table_t(x_max, r, p_or_mu);
  case Kind::BetaNB:
    return betanb_logpmf_table_t(x_max, r, p_or_mu, kappa);
  default:
    return mcnb_logpmf_table_t(x_max, r, p_or_mu);
  }
}

// ---- public double-precision operations ------------------------------------

double nb_logpmf(long x, const NBParams &params);
std::vector<double> nb_pmf_table(long x_max, const NBParams &params);
double betanb_logpmf(long x, const BetaNBParams &params);
std::vector<double> betanb_pmf_table(long x_max, const BetaNBParams &params);
std::vector<double> mcnb_pmf_table(long x_max, const MCNBParams &params);

// Zeroes entries below l and renormalizes by (1 - cdf_below), the untruncated
// CDF mass strictly below l.
std::vector<double> truncate_pmf(const std::vector<double> &pmf_table,
                                 double cdf_below, long l);

double nb_cdf(long x, const NBParams &params);
double betanb_cdf(long x, const BetaNBParams &params);

struct Moments {
  double mean = 0.0;
  double variance = 0.0;
};
Moments moments(const DistributionSpec &spec);

// log PMF of the untruncated distribution at x.
double logpmf(long x, const DistributionSpec &spec);

// Untruncated CDF mass strictly below l (i.e. G(l-1)); 0 for l == 0.
double cdf_below(const DistributionSpec &spec);

// ln P(Z >= x) under the left-truncated distribution. Switches to extended
// precision when the double estimate drops below 1e-12.
double right_tail_logp(long x, const DistributionSpec &spec);

// ln f_trunc(x) under the left-truncated distribution.
double trunc_logpmf(long x, const DistributionSpec &spec);

// Mean of the left-truncated distribution.
double truncated_mean(const DistributionSpec &spec);

} // namespace aimix::distcore
