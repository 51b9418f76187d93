#pragma once

// Forward-mode dual numbers. The likelihood kernels are templated on the
// scalar type, so instantiating them with Dual<N> yields exact gradients
// through every recurrence and continued-fraction loop.

#include <array>
#include <cmath>

#include <boost/math/special_functions/digamma.hpp>

namespace aimix {

template <int N> struct Dual {
  double v = 0.0;
  std::array<double, N> d{};

  Dual() = default;
  Dual(double value) : v(value) {}

  static Dual var(double value, int slot) {
    Dual x(value);
    x.d[slot] = 1.0;
    return x;
  }

  Dual operator-() const {
    Dual r(-v);
    for (int i = 0; i < N; ++i)
      r.d[i] = -d[i];
    return r;
  }
  Dual &operator+=(const Dual &o) {
    v += o.v;
    for (int i = 0; i < N; ++i)
      d[i] += o.d[i];
    return *this;
  }
  Dual &operator-=(const Dual &o) {
    v -= o.v;
    for (int i = 0; i < N; ++i)
      d[i] -= o.d[i];
    return *this;
  }
  Dual &operator*=(const Dual &o) {
    for (int i = 0; i < N; ++i)
      d[i] = d[i] * o.v + v * o.d[i];
    v *= o.v;
    return *this;
  }
  Dual &operator/=(const Dual &o) {
    const double inv = 1.0 / o.v;
    for (int i = 0; i < N; ++i)
      d[i] = (d[i] - v * inv * o.d[i]) * inv;
    v *= inv;
    return *this;
  }

  friend Dual operator+(Dual a, const Dual &b) { return a += b; }
  friend Dual operator-(Dual a, const Dual &b) { return a -= b; }
  friend Dual operator*(Dual a, const Dual &b) { return a *= b; }
  friend Dual operator/(Dual a, const Dual &b) { return a /= b; }

  friend bool operator<(const Dual &a, const Dual &b) { return a.v < b.v; }
  friend bool operator>(const Dual &a, const Dual &b) { return a.v > b.v; }
  friend bool operator<=(const Dual &a, const Dual &b) { return a.v <= b.v; }
  friend bool operator>=(const Dual &a, const Dual &b) { return a.v >= b.v; }
  friend bool operator==(const Dual &a, const Dual &b) { return a.v == b.v; }
};

template <int N> inline Dual<N> chain(double f, double df, const Dual<N> &x) {
  Dual<N> r(f);
  for (int i = 0; i < N; ++i)
    r.d[i] = df * x.d[i];
  return r;
}

template <int N> inline Dual<N> log(const Dual<N> &x) {
  return chain(std::log(x.v), 1.0 / x.v, x);
}
template <int N> inline Dual<N> exp(const Dual<N> &x) {
  const double e = std::exp(x.v);
  return chain(e, e, x);
}
template <int N> inline Dual<N> log1p(const Dual<N> &x) {
  return chain(std::log1p(x.v), 1.0 / (1.0 + x.v), x);
}
template <int N> inline Dual<N> expm1(const Dual<N> &x) {
  return chain(std::expm1(x.v), std::exp(x.v), x);
}
template <int N> inline Dual<N> sqrt(const Dual<N> &x) {
  const double s = std::sqrt(x.v);
  return chain(s, 0.5 / s, x);
}
template <int N> inline Dual<N> fabs(const Dual<N> &x) {
  return x.v < 0.0 ? -x : x;
}
template <int N> inline Dual<N> lgamma(const Dual<N> &x) {
  return chain(std::lgamma(x.v), boost::math::digamma(x.v), x);
}
template <int N> inline Dual<N> pow(const Dual<N> &x, const Dual<N> &y) {
  return exp(y * log(x));
}
template <int N> inline Dual<N> pow(const Dual<N> &x, double y) {
  return chain(std::pow(x.v, y), y * std::pow(x.v, y - 1.0), x);
}
template <int N> inline Dual<N> pow(double x, const Dual<N> &y) {
  const double p = std::pow(x, y.v);
  return chain(p, p * std::log(x), y);
}

// value_of: strip derivative/precision information for control-flow decisions.
inline double value_of(double x) { return x; }
template <int N> inline double value_of(const Dual<N> &x) { return x.v; }

} // namespace aimix
