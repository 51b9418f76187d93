#pragma once

// Continued-fraction evaluation of the regularized incomplete beta function
// and of 3F2 at unit argument. Kernels are templated on the scalar type so
// they can run on plain doubles, dual numbers (gradients) or big floats
// (extreme tails).

#include <cmath>
#include <functional>
#include <utility>

#include "aimix/dual.hpp"
#include "aimix/errors.hpp"

namespace aimix::specfun {

inline constexpr double kDefaultEps = 1e-12;
inline constexpr int kDefaultMaxIter = 500;
inline constexpr double kZeroLeadSentinel = 1e-30;
inline constexpr double kDenomGuard = 1e-300;

struct ContinuedFraction {
  double s = 0.0;
  // term_at(j) -> {numerator r(j), denominator q(j)}, j = 1..max_iter
  std::function<std::pair<double, double>(int)> term_at;
  double eps = kDefaultEps;
  int max_iter = kDefaultMaxIter;
};

template <class T> T guard_denom(T x) {
  const double v = value_of(x);
  if (v > -kDenomGuard && v < kDenomGuard)
    return T(v < 0.0 ? -kDenomGuard : kDenomGuard);
  return x;
}

// Modified Lentz evaluation of s + K_{j>=1} r(j)/q(j). A zero leading term is
// replaced by the 1e-30 sentinel which is subtracted from the result.
template <class T, class TermFn>
T lentz(T s, TermFn &&term, double eps = kDefaultEps,
        int max_iter = kDefaultMaxIter) {
  T sub(0.0);
  if (value_of(s) == 0.0) {
    s = T(kZeroLeadSentinel);
    sub = T(kZeroLeadSentinel);
  }
  T c = s;
  T d(0.0);
  T f = s;
  for (int j = 1; j <= max_iter; ++j) {
    auto [rj, qj] = term(j);
    c = guard_denom(qj + rj / guard_denom(c));
    d = T(1.0) / guard_denom(qj + rj * d);
    const T delta = c * d;
    f = f * delta;
    const double dv = value_of(delta);
    if (std::isnan(dv) || std::isinf(dv) || std::isnan(value_of(f)) ||
        std::isinf(value_of(f)))
      throw NumericFailure("lentz: non-finite intermediate");
    if (std::fabs(dv - 1.0) < eps)
      return f - sub;
  }
  throw NonConvergence("lentz: iteration cap reached");
}

inline double lentz_eval(const ContinuedFraction &cf) {
  if (!(cf.eps > 0.0) || cf.max_iter < 1 || !cf.term_at)
    throw DomainError("lentz_eval: malformed continued fraction");
  return lentz(cf.s, [&](int j) { return cf.term_at(j); }, cf.eps, cf.max_iter);
}

// Tretter continued fraction for I_z(a, b), valid on its stable branch
// z < (a + 1)/(a + b + 2). Returns log I_z(a, b).
template <class T> T ibeta_log_direct(T z, T a, T b) {
  using std::lgamma;
  using std::log;
  const T t = b * z / (a * (T(1.0) - z));
  const T log_lead = a * log(z) + (b - T(1.0)) * log(T(1.0) - z) - log(a) -
                     (lgamma(a) + lgamma(b) - lgamma(a + b));
  auto term = [&](int jj) -> std::pair<T, T> {
    const T n(static_cast<double>(jj));
    T rn;
    if (jj == 1) {
      rn = a * t * (b - T(1.0)) / (b * (a + T(1.0)));
    } else {
      rn = a * a * t * t * (n - T(1.0)) * (a + b + n - T(2.0)) *
           (a + n - T(1.0)) * (b - n) /
           (b * b * (a + T(2.0) * n - T(3.0)) * (a + T(2.0) * n - T(2.0)) *
            (a + T(2.0) * n - T(2.0)) * (a + T(2.0) * n - T(1.0)));
    }
    const T qn = (T(2.0) * (a * t + T(2.0) * b) * n * n +
                  T(2.0) * (a * t + T(2.0) * b) * (a - T(1.0)) * n +
                  a * b * (a - T(2.0) - a * t)) /
                 (b * (a + T(2.0) * n - T(2.0)) * (a + T(2.0) * n));
    return {rn, qn};
  };
  return log_lead + log(lentz(T(1.0), term));
}

template <class T> bool ibeta_direct_branch(T z, T a, T b) {
  return value_of(z) < (value_of(a) + 1.0) / (value_of(a) + value_of(b) + 2.0);
}

template <class T> T reg_inc_beta_t(T z, T a, T b) {
  using std::exp;
  if (ibeta_direct_branch(z, a, b))
    return exp(ibeta_log_direct(z, a, b));
  return T(1.0) - exp(ibeta_log_direct(T(1.0) - z, b, a));
}

// log I_z(a, b); accurate for small values (where the direct branch applies).
template <class T> T reg_inc_beta_log_t(T z, T a, T b) {
  using std::exp;
  using std::log;
  if (ibeta_direct_branch(z, a, b))
    return ibeta_log_direct(z, a, b);
  return log(T(1.0) - exp(ibeta_log_direct(T(1.0) - z, b, a)));
}

inline double reg_inc_beta(double z, double a, double b) {
  if (!(z > 0.0 && z < 1.0))
    throw DomainError("reg_inc_beta: z outside (0,1)");
  if (!(a > 0.0) || !(b > 0.0))
    throw DomainError("reg_inc_beta: non-positive shape");
  return reg_inc_beta_t(z, a, b);
}

// Interleaved continued fraction for 3F2(1, a1, a2; b1, b2; 1); requires
// b1 + b2 > a1 + a2 + 1 for convergence of the series.
template <class T>
T hyp3f2_unit_t(T a1, T a2, T b1, T b2, double eps = kDefaultEps,
                int max_iter = 4000) {
  // a zero upper parameter truncates the series at its first term
  if (value_of(a1) == 0.0 || value_of(a2) == 0.0)
    return T(1.0);
  auto r0 = [&](const T &n) -> T {
    if (value_of(n) == 0.0)
      return T(1.0);
    return -(n + b1 - a2 - T(1.0)) * (n + b2 - a2 - T(1.0)) /
           ((T(2.0) * n - T(1.0)) * (T(2.0) * n + a2 - T(1.0)));
  };
  auto r1 = [&](const T &n) -> T {
    if (value_of(n) == 0.0)
      return T(-1.0);
    return -(n + b1 - T(1.0)) * (n + b2 - T(1.0)) /
           (T(2.0) * n * (T(2.0) * n + a1 - T(1.0)));
  };
  auto r2 = [&](const T &n) -> T {
    return -(n + b1 - a1) * (n + b2 - a1) /
           ((T(2.0) * n + a1) * (T(2.0) * n + a2));
  };
  auto q0 = [&](const T &n) -> T {
    if (value_of(n) == 0.0)
      return T(1.0);
    return ((T(3.0) * n + b1 - T(1.0)) * (T(3.0) * n + b2 - T(1.0)) -
            T(2.0) * n * (T(2.0) * n + a2)) /
           (T(2.0) * n * (T(2.0) * n + a1 - T(1.0)));
  };
  auto q1 = [&](const T &n) -> T {
    return ((T(3.0) * n + b1) * (T(3.0) * n + b2) -
            (T(2.0) * n + T(1.0)) * (T(2.0) * n + a1)) /
           ((T(2.0) * n + a1) * (T(2.0) * n + a2));
  };
  auto q2 = [&](const T &n) -> T {
    return ((T(3.0) * n + b1 + T(1.0)) * (T(3.0) * n + b2 + T(1.0)) -
            (T(2.0) * n + a1 + T(1.0)) * (T(2.0) * n + a2 + T(1.0))) /
           ((T(2.0) * n + T(1.0)) * (T(2.0) * n + a2 + T(1.0)));
  };
  auto term = [&](int j) -> std::pair<T, T> {
    const int n = j - 1;
    const int i = n % 3;
    const T m(static_cast<double>((n - i) / 3));
    switch (i) {
    case 0:
      return {r0(m), q0(m)};
    case 1:
      return {r1(m), q1(m)};
    default:
      return {r2(m), q2(m)};
    }
  };
  return lentz(T(0.0), term, eps, max_iter);
}

inline double hyp3f2_unit(double a1, double a2, double b1, double b2) {
  if (!(b1 + b2 > a1 + a2 + 1.0))
    throw DomainError("hyp3f2_unit: series does not converge");
  return hyp3f2_unit_t(a1, a2, b1, b2);
}

// log B(a, b)
template <class T> T lbeta(T a, T b) {
  using std::lgamma;
  return lgamma(a) + lgamma(b) - lgamma(a + b);
}

} // namespace aimix::specfun
