#include "aimix/difftest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "aimix/optimize.hpp"
#include "aimix/scoring.hpp"

namespace aimix::difftest {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kPLo = 0.01;
constexpr double kPHi = 0.99;

struct FrozenObs {
  long fixed = 0;
  long count = 0;
  long mult = 1;
  const fit::WindowEstimate *est = nullptr;
};

std::vector<FrozenObs> attach_windows(const std::vector<GroupObs> &obs,
                                      const fit::FitResult &fits,
                                      fit::Orientation orient, double bad,
                                      long &n_dropped) {
  const auto part = fits.estimates.find({static_cast<int>(orient), bad});
  if (part == fits.estimates.end())
    throw MissingEstimate("refit_p: no estimates for this orientation/BAD");
  std::vector<FrozenObs> out;
  n_dropped = 0;
  for (const auto &o : obs) {
    FrozenObs f;
    f.fixed = orient == fit::Orientation::RefGivenAlt ? o.y : o.x;
    f.count = orient == fit::Orientation::RefGivenAlt ? o.x : o.y;
    f.mult = o.mult;
    const auto it = part->second.find(f.fixed);
    if (it == part->second.end() || !std::isfinite(it->second.loglik)) {
      n_dropped += o.mult;
      continue;
    }
    f.est = &it->second;
    out.push_back(f);
  }
  return out;
}

double group_loglik(const std::vector<FrozenObs> &obs, distcore::Kind kind,
                    long l, double p) {
  double ll = 0.0;
  for (const auto &o : obs) {
    fit::ParameterVector pv = o.est->params;
    pv.p = p;
    fit::WindowEstimate tmp = *o.est;
    tmp.params = pv;
    const auto cm = scoring::conditional_mixture(tmp, kind, l, o.fixed);
    const double lp = models::mixture_logpmf(o.count, cm.mix);
    if (!std::isfinite(lp))
      return -1e18;
    ll += static_cast<double>(o.mult) * lp;
  }
  return ll;
}

} // namespace

RefitResult refit_p(const std::vector<GroupObs> &obs,
                    const fit::FitResult &fits, fit::Orientation orient,
                    double bad) {
  if (obs.empty())
    throw EmptyDataset("refit_p: no observations");
  long n_dropped = 0;
  const auto frozen = attach_windows(obs, fits, orient, bad, n_dropped);
  if (frozen.empty())
    throw MissingEstimate("refit_p: no observation has a covering window");

  const auto kind = fits.settings.kind;
  const long l = fits.settings.l;
  auto ll = [&](double p) { return group_loglik(frozen, kind, l, p); };

  RefitResult res;
  res.p_hat = optimize::maximize_scalar(ll, kPLo, kPHi, 1e-10, 300);
  res.loglik = ll(res.p_hat);
  res.boundary = res.p_hat - kPLo < 1e-4 || kPHi - res.p_hat < 1e-4;
  for (const auto &o : frozen)
    res.n_used += o.mult;
  res.n_dropped = n_dropped;

  const double h =
      std::cbrt(std::numeric_limits<double>::epsilon()) * 0.5;
  const double lo = std::max(kPLo, res.p_hat - h);
  const double hi = std::min(kPHi, res.p_hat + h);
  const double mid = 0.5 * (lo + hi);
  const double step = 0.5 * (hi - lo);
  res.info =
      -(ll(mid + step) - 2.0 * ll(mid) + ll(mid - step)) / (step * step);
  return res;
}

double wald_test(double p_c, double info_c, double p_t, double info_t) {
  if (!(info_c > 0.0) || !(info_t > 0.0))
    throw DomainError("wald_test: information must be positive");
  const double se = std::sqrt(1.0 / info_c + 1.0 / info_t);
  const double z = (p_c - p_t) / se;
  return std::erfc(std::fabs(z) / std::sqrt(2.0));
}

double lrt(double loglik_free, double loglik_constrained) {
  const double delta = loglik_free - loglik_constrained;
  if (delta < -1e-6)
    throw NestingViolation("lrt: free model scores below constrained model");
  const double stat = std::max(0.0, 2.0 * delta);
  return std::erfc(std::sqrt(stat / 2.0));
}

DiffTestRecord difftest_snv(const std::vector<GroupObs> &control,
                            const std::vector<GroupObs> &test,
                            const fit::FitResult &fits, double bad,
                            Method method) {
  if (control.empty() || test.empty())
    throw EmptyDataset("difftest_snv: both groups must be non-empty");
  std::vector<GroupObs> pooled = control;
  pooled.insert(pooled.end(), test.begin(), test.end());

  DiffTestRecord rec;
  rec.method = method;
  double best = std::numeric_limits<double>::infinity();
  const fit::Orientation orients[2] = {fit::Orientation::RefGivenAlt,
                                       fit::Orientation::AltGivenRef};
  for (int side = 0; side < 2; ++side) {
    const auto rc = refit_p(control, fits, orients[side], bad);
    const auto rt = refit_p(test, fits, orients[side], bad);
    double pval, stat;
    if (method == Method::Wald) {
      pval = wald_test(rc.p_hat, rc.info, rt.p_hat, rt.info);
      const double se = std::sqrt(1.0 / rc.info + 1.0 / rt.info);
      stat = (rc.p_hat - rt.p_hat) / se;
    } else {
      const auto r0 = refit_p(pooled, fits, orients[side], bad);
      const double free_ll = rc.loglik + rt.loglik;
      pval = lrt(free_ll, r0.loglik);
      stat = std::max(0.0, 2.0 * (free_ll - r0.loglik));
    }
    (side == 0 ? rec.pval_side1 : rec.pval_side2) = pval;
    if (pval < best) {
      best = pval;
      rec.statistic = stat;
      rec.p_control = rc.p_hat;
      rec.p_test = rt.p_hat;
      rec.se_control = rc.info > 0.0 ? 1.0 / std::sqrt(rc.info) : kNaN;
      rec.se_test = rt.info > 0.0 ? 1.0 / std::sqrt(rt.info) : kNaN;
    }
  }
  rec.final_pval = std::min(rec.pval_side1, rec.pval_side2);
  return rec;
}

} // namespace aimix::difftest
