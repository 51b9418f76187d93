#include "aimix/distcore.hpp"

#include <algorithm>
#include <cmath>

namespace aimix::distcore {

double nb_logpmf(long x, const NBParams &params) {
  params.validate();
  if (x < 0)
    throw DomainError("nb_logpmf: x must be non-negative");
  return nb_logpmf_t<double>(x, params.r, params.p);
}

static std::vector<double> exp_all(const std::vector<double> &lf) {
  std::vector<double> f(lf.size());
  std::transform(lf.begin(), lf.end(), f.begin(),
                 [](double v) { return std::exp(v); });
  return f;
}

std::vector<double> nb_pmf_table(long x_max, const NBParams &params) {
  params.validate();
  if (x_max < 0)
    throw DomainError("nb_pmf_table: x_max must be non-negative");
  return exp_all(nb_logpmf_table_t<double>(x_max, params.r, params.p));
}

double betanb_logpmf(long x, const BetaNBParams &params) {
  params.validate();
  if (x < 0)
    throw DomainError("betanb_logpmf: x must be non-negative");
  return betanb_logpmf_t<double>(x, params.r, params.mu, params.kappa);
}

std::vector<double> betanb_pmf_table(long x_max, const BetaNBParams &params) {
  params.validate();
  if (x_max < 0)
    throw DomainError("betanb_pmf_table: x_max must be non-negative");
  return exp_all(
      betanb_logpmf_table_t<double>(x_max, params.r, params.mu, params.kappa));
}

std::vector<double> mcnb_pmf_table(long x_max, const MCNBParams &params) {
  params.validate();
  if (x_max < 0)
    throw DomainError("mcnb_pmf_table: x_max must be non-negative");
  return exp_all(mcnb_logpmf_table_t<double>(x_max, params.r, params.p));
}

std::vector<double> truncate_pmf(const std::vector<double> &pmf_table,
                                 double cdf_below, long l) {
  if (l < 0 || cdf_below < 0.0)
    throw DomainError("truncate_pmf: bad arguments");
  const double norm = 1.0 - cdf_below;
  if (!(norm > 0.0))
    throw DomainError("truncate_pmf: normalizer is not positive");
  std::vector<double> out(pmf_table.size(), 0.0);
  for (size_t x = 0; x < pmf_table.size(); ++x)
    if (static_cast<long>(x) >= l)
      out[x] = pmf_table[x] / norm;
  return out;
}

double nb_cdf(long x, const NBParams &params) {
  params.validate();
  if (x < 0)
    return 0.0;
  // G(x) = I_{1-p}(r, x+1); reg_inc_beta picks the numerically stable
  // continued-fraction branch internally.
  const double v = specfun::reg_inc_beta(1.0 - params.p, params.r,
                                         static_cast<double>(x) + 1.0);
  return std::clamp(v, 0.0, 1.0);
}

double betanb_cdf(long x, const BetaNBParams &params) {
  params.validate();
  if (x < 0)
    return 0.0;
  const double r = params.r;
  const double mu = params.mu;
  const double k = params.kappa;
  const double a = params.alpha();
  const double b = params.beta();
  const double xv = static_cast<double>(x);
  double v;
  if (r <= xv * (1.0 - mu) / mu) {
    // direct branch: survival beyond x as a 3F2 closed form
    const double f =
        specfun::hyp3f2_unit_t<double>(r + xv + 1.0, a + xv + 1.0, xv + 2.0,
                                       r + k + xv + 1.0);
    const double lc = specfun::lbeta(b + r, a + xv + 1.0) -
                      std::log(xv + 1.0) - specfun::lbeta(r, xv + 1.0) -
                      specfun::lbeta(a, b);
    v = 1.0 - std::exp(lc) * f;
  } else {
    // mirrored branch via G(x|r,mu,k) = 1 - G(r-1 | x+1, 1-mu, k)
    const double rp = xv + 1.0;  // mirror size
    const double y = r - 1.0;    // mirror evaluation point
    const double ap = b;         // mirror alpha = (1-mu)*k
    const double bp = a;
    const double f = specfun::hyp3f2_unit_t<double>(
        rp + y + 1.0, ap + y + 1.0, y + 2.0, rp + k + y + 1.0);
    const double lc = specfun::lbeta(bp + rp, ap + y + 1.0) -
                      std::log(y + 1.0) - specfun::lbeta(rp, y + 1.0) -
                      specfun::lbeta(ap, bp);
    v = std::exp(lc) * f;
  }
  return std::clamp(v, 0.0, 1.0);
}

Moments moments(const DistributionSpec &spec) {
  spec.validate();
  Moments m;
  switch (spec.kind) {
  case Kind::NB: {
    const auto &pp = std::get<NBParams>(spec.params);
    m.mean = pp.r * pp.p / (1.0 - pp.p);
    m.variance = pp.r * pp.p / ((1.0 - pp.p) * (1.0 - pp.p));
    break;
  }
  case Kind::MCNB: {
    const auto &pp = std::get<MCNBParams>(spec.params);
    const double pr = std::pow(pp.p, pp.r);
    m.mean = pp.r * pp.p / (1.0 - pr);
    m.variance = pp.p * pp.r *
                 (pp.p * pp.p +
                  (pp.p * pp.p * (pp.r - 1.0) - pp.p * pp.r - 1.0) * pr + 1.0) /
                 ((1.0 - pp.p) * (1.0 - pr) * (1.0 - pr));
    break;
  }
  case Kind::BetaNB: {
    const auto &pp = std::get<BetaNBParams>(spec.params);
    const double b = pp.beta();
    if (!(b > 1.0))
      throw DomainError("moments: BetaNB mean requires (1-mu)*kappa > 1");
    m.mean = pp.r * pp.alpha() / (b - 1.0);
    if (!(b > 2.0))
      throw DomainError("moments: BetaNB variance requires (1-mu)*kappa > 2");
    m.variance = (pp.kappa - 1.0) * pp.kappa * pp.mu * pp.r *
                 (b + pp.r - 1.0) / ((b - 1.0) * (b - 1.0) * (b - 2.0));
    break;
  }
  }
  return m;
}

double logpmf(long x, const DistributionSpec &spec) {
  spec.validate();
  if (x < 0)
    throw DomainError("logpmf: x must be non-negative");
  switch (spec.kind) {
  case Kind::NB: {
    const auto &pp = std::get<NBParams>(spec.params);
    return nb_logpmf_t<double>(x, pp.r, pp.p);
  }
  case Kind::BetaNB: {
    const auto &pp = std::get<BetaNBParams>(spec.params);
    return betanb_logpmf_t<double>(x, pp.r, pp.mu, pp.kappa);
  }
  default: {
    const auto &pp = std::get<MCNBParams>(spec.params);
    return mcnb_logpmf_table_t<double>(x, pp.r, pp.p).back();
  }
  }
}

template <class T> static std::vector<T> table_for(const DistributionSpec &spec,
                                                   long x_max) {
  switch (spec.kind) {
  case Kind::NB: {
    const auto &pp = std::get<NBParams>(spec.params);
    return nb_logpmf_table_t<T>(x_max, T(pp.r), T(pp.p));
  }
  case Kind::BetaNB: {
    const auto &pp = std::get<BetaNBParams>(spec.params);
    return betanb_logpmf_table_t<T>(x_max, T(pp.r), T(pp.mu), T(pp.kappa));
  }
  default: {
    const auto &pp = std::get<MCNBParams>(spec.params);
    return mcnb_logpmf_table_t<T>(x_max, T(pp.r), T(pp.p));
  }
  }
}

double cdf_below(const DistributionSpec &spec) {
  spec.validate();
  const long l = spec.trunc.l;
  if (l == 0)
    return 0.0;
  const auto lf = table_for<double>(spec, l - 1);
  double s = 0.0, comp = 0.0;
  for (long k = 0; k < l; ++k) {
    const double y = std::exp(lf[k]) - comp;
    const double t = s + y;
    comp = (t - s) - y;
    s = t;
  }
  return s;
}

double right_tail_logp(long x, const DistributionSpec &spec) {
  spec.validate();
  const long l = spec.trunc.l;
  if (x < l)
    throw DomainError("right_tail_logp: x below truncation threshold");
  if (x == l)
    return 0.0;

  // fast path: compensated double summation
  {
    const auto lf = table_for<double>(spec, x - 1);
    double below = 0.0, mid = 0.0, comp_b = 0.0, comp_m = 0.0;
    for (long k = 0; k < x; ++k) {
      const double f = std::exp(lf[k]);
      if (k < l) {
        const double y = f - comp_b;
        const double t = below + y;
        comp_b = (t - below) - y;
        below = t;
      } else {
        const double y = f - comp_m;
        const double t = mid + y;
        comp_m = (t - mid) - y;
        mid = t;
      }
    }
    const double norm = 1.0 - below;
    if (!(norm > 0.0))
      throw DomainError("right_tail_logp: empty truncated support");
    const double tail = 1.0 - mid / norm;
    if (tail >= 1e-12)
      return std::log(tail);
  }

  // extended precision path
  const auto lf = table_for<BigFloat>(spec, x - 1);
  BigFloat below(0), mid(0);
  for (long k = 0; k < x; ++k) {
    const BigFloat f = exp(lf[k]);
    if (k < l)
      below += f;
    else
      mid += f;
  }
  const BigFloat norm = BigFloat(1) - below;
  const BigFloat tail = BigFloat(1) - mid / norm;
  if (!(tail > 0))
    throw NumericFailure("right_tail_logp: tail below extended resolution");
  return log(tail).convert_to<double>();
}

double trunc_logpmf(long x, const DistributionSpec &spec) {
  spec.validate();
  if (x < spec.trunc.l)
    return -std::numeric_limits<double>::infinity();
  return logpmf(x, spec) - std::log1p(-cdf_below(spec));
}

double truncated_mean(const DistributionSpec &spec) {
  const Moments m = moments(spec);
  const long l = spec.trunc.l;
  if (l == 0)
    return m.mean;
  const auto lf = table_for<double>(spec, l - 1);
  double below = 0.0, below_x = 0.0;
  for (long k = 0; k < l; ++k) {
    const double f = std::exp(lf[k]);
    below += f;
    below_x += static_cast<double>(k) * f;
  }
  const double norm = 1.0 - below;
  if (!(norm > 0.0))
    throw DomainError("truncated_mean: empty truncated support");
  return (m.mean - below_x) / norm;
}

} // namespace aimix::distcore
