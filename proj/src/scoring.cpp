#include "aimix/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>

namespace aimix::scoring {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double logaddexp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity())
    return b;
  if (b == -std::numeric_limits<double>::infinity())
    return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// ln(1 - p) from ln(p), accurate at both ends.
double log1m_from_log(double lnp) {
  if (lnp < -0.6931471805599453)
    return std::log1p(-std::exp(lnp));
  return std::log(-std::expm1(lnp));
}

// ln P(T >= t) for Student-t with nu degrees of freedom.
double student_t_logsf(double t, double nu) {
  if (t == 0.0)
    return std::log(0.5);
  const double z = nu / (nu + t * t);
  if (t > 0.0)
    return std::log(0.5) +
           specfun::reg_inc_beta_log_t<double>(z, 0.5 * nu, 0.5);
  const double tail = 0.5 * specfun::reg_inc_beta(z, 0.5 * nu, 0.5);
  return std::log1p(-tail);
}

distcore::DistributionSpec component_spec(const fit::ParameterVector &pv,
                                          distcore::Kind kind, long l,
                                          long fixed_value, double p_comp) {
  const double r = models::effective_r(
      fixed_value, models::LinearBias{pv.b, pv.a}, kind, p_comp, pv.kappa);
  switch (kind) {
  case distcore::Kind::NB:
    return distcore::DistributionSpec::nb(r, p_comp, l);
  case distcore::Kind::BetaNB:
    return distcore::DistributionSpec::betanb(r, p_comp, pv.kappa, l);
  default:
    return distcore::DistributionSpec::mcnb(r, p_comp, l);
  }
}

const fit::WindowEstimate &lookup_estimate(const fit::FitResult &fits,
                                           fit::Orientation orient, double bad,
                                           long fixed_value) {
  const auto part = fits.estimates.find({static_cast<int>(orient), bad});
  if (part == fits.estimates.end())
    throw MissingEstimate("score: no estimates for this orientation and BAD");
  const auto it = part->second.find(fixed_value);
  if (it == part->second.end() || !std::isfinite(it->second.loglik))
    throw MissingEstimate("score: no usable window for the fixed count");
  return it->second;
}

double side_effect_size(long observed, const ConditionalMixture &cm) {
  try {
    return effect_size(static_cast<double>(observed),
                       mixture_truncated_mean(cm));
  } catch (const DomainError &) {
    return kNaN; // fitted component has no finite mean
  }
}

} // namespace

double effect_size(double observed, double conditional_mean) {
  if (!(observed > 0.0) || !(conditional_mean > 0.0))
    throw DomainError("effect_size: inputs must be positive");
  return std::log2(conditional_mean) - std::log2(observed);
}

ConditionalMixture conditional_mixture(const fit::WindowEstimate &est,
                                       distcore::Kind kind, long l,
                                       long fixed_value) {
  const auto &pv = est.params;
  ConditionalMixture cm;
  cm.mix.w = pv.w;
  cm.mix.major = component_spec(pv, kind, l, fixed_value, pv.p);
  cm.has_minor = pv.w < 1.0;
  if (cm.has_minor)
    cm.mix.minor = component_spec(pv, kind, l, fixed_value, 1.0 - pv.p);
  else
    cm.mix.minor = cm.mix.major;
  return cm;
}

double mixture_right_tail_logp(long x, const ConditionalMixture &cm) {
  const double t_major = distcore::right_tail_logp(x, cm.mix.major);
  if (!cm.has_minor)
    return t_major;
  const double t_minor = distcore::right_tail_logp(x, cm.mix.minor);
  const double w = cm.mix.w;
  if (w == 0.0)
    return t_minor;
  return std::min(
      0.0, logaddexp(std::log(w) + t_major, std::log1p(-w) + t_minor));
}

double mixture_truncated_mean(const ConditionalMixture &cm) {
  const double m_major = distcore::truncated_mean(cm.mix.major);
  if (!cm.has_minor)
    return m_major;
  const double m_minor = distcore::truncated_mean(cm.mix.minor);
  return cm.mix.w * m_major + (1.0 - cm.mix.w) * m_minor;
}

RawScore score_observation(long x, long y, const fit::FitResult &fits,
                           double bad) {
  const long l = fits.settings.l;
  if (x < l || y < l)
    throw DomainError("score_observation: counts below truncation threshold");
  const auto kind = fits.settings.kind;

  // reference counts conditioned on the alternative count, and vice versa
  const auto &est_ref =
      lookup_estimate(fits, fit::Orientation::RefGivenAlt, bad, y);
  const auto &est_alt =
      lookup_estimate(fits, fit::Orientation::AltGivenRef, bad, x);
  const auto cm_ref = conditional_mixture(est_ref, kind, l, y);
  const auto cm_alt = conditional_mixture(est_alt, kind, l, x);

  RawScore rs;
  rs.log_pval_ref = mixture_right_tail_logp(x, cm_ref);
  rs.log_pval_alt = mixture_right_tail_logp(y, cm_alt);
  rs.es_ref = side_effect_size(x, cm_ref);
  rs.es_alt = side_effect_size(y, cm_alt);
  return rs;
}

double combine_pvalues(const std::vector<double> &log_pvals) {
  if (log_pvals.empty())
    throw DomainError("combine_pvalues: empty input");
  const double n = static_cast<double>(log_pvals.size());
  double sum_logit = 0.0;
  for (double lnp : log_pvals) {
    if (!(lnp <= 0.0) || lnp == -std::numeric_limits<double>::infinity())
      throw DomainError("combine_pvalues: p-value outside (0,1]");
    const double eff = std::min(lnp, -1e-16); // p = 1 clamped just below 1
    sum_logit += eff - log1m_from_log(eff);
  }
  if (sum_logit == 0.0)
    return std::log(0.5);
  const double nu = 5.0 * n + 4.0;
  const double scale =
      std::sqrt(3.0 * nu / (M_PI * M_PI * n * (5.0 * n + 2.0)));
  const double t = -sum_logit * scale;
  return student_t_logsf(t, nu);
}

CombinedES combine_effect_sizes(const std::vector<double> &es,
                                const std::vector<double> &log_pvals) {
  if (es.empty() || es.size() != log_pvals.size())
    throw DomainError("combine_effect_sizes: bad input lengths");
  double wsum = 0.0, acc = 0.0;
  for (size_t i = 0; i < es.size(); ++i) {
    if (!(log_pvals[i] <= 0.0))
      throw DomainError("combine_effect_sizes: p-value outside (0,1]");
    const double w = -log_pvals[i];
    wsum += w;
    acc += w * es[i];
  }
  CombinedES out;
  if (wsum == 0.0) {
    out.degenerate = true;
    out.es = 0.0;
    return out;
  }
  out.es = acc / wsum;
  return out;
}

ScoreRecord score_group(const std::vector<RawScore> &observations) {
  if (observations.empty())
    throw DomainError("score_group: no observations");
  std::vector<double> lp_ref, lp_alt, es_ref, es_alt;
  for (const auto &o : observations) {
    lp_ref.push_back(o.log_pval_ref);
    lp_alt.push_back(o.log_pval_alt);
    es_ref.push_back(std::isnan(o.es_ref) ? 0.0 : o.es_ref);
    es_alt.push_back(std::isnan(o.es_alt) ? 0.0 : o.es_alt);
  }
  ScoreRecord rec;
  rec.log_comb_pval_ref = combine_pvalues(lp_ref);
  rec.log_comb_pval_alt = combine_pvalues(lp_alt);
  const auto ce_ref = combine_effect_sizes(es_ref, lp_ref);
  const auto ce_alt = combine_effect_sizes(es_alt, lp_alt);
  rec.comb_es_ref = ce_ref.es;
  rec.comb_es_alt = ce_alt.es;
  rec.es_ref_degenerate = ce_ref.degenerate;
  rec.es_alt_degenerate = ce_alt.degenerate;
  if (rec.log_comb_pval_ref <= rec.log_comb_pval_alt) {
    rec.final_side = Side::Ref; // ties resolve to the reference side
    rec.log_final_pval = rec.log_comb_pval_ref;
    rec.final_es = rec.comb_es_ref;
  } else {
    rec.final_side = Side::Alt;
    rec.log_final_pval = rec.log_comb_pval_alt;
    rec.final_es = rec.comb_es_alt;
  }
  return rec;
}

RawScore Scorer::score(long x, long y, double bad) const {
  const std::tuple<long, long, double> key{x, y, bad};
  {
    std::shared_lock lock(mutex_);
    const auto it = cache_.find(key);
    if (it != cache_.end())
      return it->second;
  }
  const RawScore rs = score_observation(x, y, fits_, bad);
  std::unique_lock lock(mutex_);
  cache_.emplace(key, rs);
  return rs;
}

} // namespace aimix::scoring
