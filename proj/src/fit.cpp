#include "aimix/fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

#include "aimix/dual.hpp"
#include "aimix/optimize.hpp"

namespace aimix::fit {

namespace {

constexpr double kBadRegion = -1e18; // finite sentinel for invalid parameters
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Observations of one fixed-allele count inside a window.
struct RowGroup {
  long fixed = 0;
  long max_count = 0;
  std::vector<std::pair<long, long>> obs; // (variable_count, mult)
};

std::vector<RowGroup> group_rows(const models::WindowSlice &slice) {
  std::map<long, RowGroup> by_fixed;
  for (const auto &o : slice.observations) {
    if (o.mult <= 0)
      continue;
    RowGroup &g = by_fixed[o.fixed];
    g.fixed = o.fixed;
    g.max_count = std::max(g.max_count, o.count);
    g.obs.emplace_back(o.count, o.mult);
  }
  std::vector<RowGroup> rows;
  rows.reserve(by_fixed.size());
  for (auto &[fixed, g] : by_fixed)
    rows.push_back(std::move(g));
  if (rows.empty())
    throw EmptyWindow("fit: window has no observations");
  return rows;
}

// ln(w * exp(la) + (1-w) * exp(lb)), smooth in w on the closed interval.
template <class T> T mix_log(T w, T la, T lb) {
  using std::exp;
  using std::log;
  const double m = std::max(value_of(la), value_of(lb));
  if (!std::isfinite(m))
    return T(kBadRegion);
  return log(w * exp(la - T(m)) + (T(1.0) - w) * exp(lb - T(m))) + T(m);
}

// Truncated log PMF table for one component: logpmf(x) - ln(1 - G(l-1)).
template <class T>
bool component_table(const RowGroup &row, distcore::Kind kind, long l, T b,
                     T a, T p_or_mu, T kappa, std::vector<T> &out) {
  const T raw_r = b * T(static_cast<double>(row.fixed)) + a;
  if (!(value_of(raw_r) > 0.0))
    return false;
  const T r = models::effective_r_t(raw_r, kind, p_or_mu, kappa);
  if (!(value_of(r) > 0.0))
    return false;
  using std::exp;
  using std::log1p;
  out = distcore::logpmf_table_t(row.max_count, kind, r, p_or_mu, kappa);
  T below(0.0);
  for (long k = 0; k < std::min<long>(l, row.max_count + 1); ++k)
    below += exp(out[k]);
  if (!(value_of(below) < 1.0))
    return false;
  const T log_norm = log1p(-below);
  for (auto &v : out)
    v -= log_norm;
  return true;
}

template <class T>
T loglik_t(const std::vector<RowGroup> &rows, distcore::Kind kind, long l,
           T b, T a, T p, T kappa, T w, bool mixture) {
  T total(0.0);
  std::vector<T> major, minor;
  for (const auto &row : rows) {
    if (!component_table(row, kind, l, b, a, p, kappa, major))
      return T(kBadRegion);
    if (mixture &&
        !component_table(row, kind, l, b, a, T(1.0) - p, kappa, minor))
      return T(kBadRegion);
    for (const auto &[count, mult] : row.obs) {
      const T lp = mixture ? mix_log(w, major[count], minor[count])
                           : major[count];
      if (!std::isfinite(value_of(lp)))
        return T(kBadRegion);
      total += T(static_cast<double>(mult)) * lp;
    }
  }
  return total;
}

template <class T>
T map_penalty_t(T kappa, double alpha, long n_obs, long fixed_value) {
  using std::log;
  if (alpha == 0.0)
    return T(0.0);
  if (fixed_value == 0)
    throw DomainError("map_penalty: fixed value must be positive");
  const double n = static_cast<double>(n_obs);
  const double bt = alpha * n * static_cast<double>(fixed_value);
  return T(n) * (T(std::log(2.0 * bt)) + T(1.0) / (kappa * T(bt)) +
                 T(2.0) * log(kappa));
}

// One window's penalized objective over the packed free parameters.
struct Problem {
  std::vector<RowGroup> rows;
  distcore::Kind kind = distcore::Kind::NB;
  long l = 0;
  double p_fixed = 0.5;
  bool free_kappa = false;
  bool free_w = false;
  double kappa_fixed = 100.0;
  double alpha = 0.0;
  long n_obs = 0;
  long fixed_value = 0;

  int dim() const { return 2 + (free_kappa ? 1 : 0) + (free_w ? 1 : 0); }

  ParameterVector unpack(std::span<const double> x) const {
    ParameterVector pv;
    pv.b = x[0];
    pv.a = x[1];
    pv.p = p_fixed;
    int i = 2;
    pv.kappa = free_kappa ? std::exp(x[i++]) : kappa_fixed;
    pv.w = free_w ? x[i++] : 1.0;
    return pv;
  }

  std::vector<double> pack(const ParameterVector &pv) const {
    std::vector<double> x = {pv.b, pv.a};
    if (free_kappa)
      x.push_back(std::log(pv.kappa));
    if (free_w)
      x.push_back(pv.w);
    return x;
  }

  // Penalized log-likelihood and its exact gradient.
  double eval(std::span<const double> x, std::span<double> grad) const {
    using D = Dual<4>;
    D b = D::var(x[0], 0);
    D a = D::var(x[1], 1);
    int i = 2;
    // kappa is optimized on a log scale: the likelihood flattens as it
    // grows, and multiplicative steps keep the box traversable
    D kappa = free_kappa ? exp(D::var(x[i], i)) : D(kappa_fixed);
    i += free_kappa ? 1 : 0;
    D w = free_w ? D::var(x[i], i) : D(1.0);
    D f = loglik_t<D>(rows, kind, l, b, a, D(p_fixed), kappa, w, free_w);
    if (value_of(f) > kBadRegion && free_kappa && alpha > 0.0)
      f -= map_penalty_t<D>(kappa, alpha, n_obs, fixed_value);
    for (int j = 0; j < dim(); ++j)
      grad[j] = f.d[j];
    return f.v;
  }

  double loglik_at(const ParameterVector &pv) const {
    return loglik_t<double>(rows, kind, l, pv.b, pv.a, pv.p, pv.kappa, pv.w,
                            free_w);
  }

  optimize::Box box(double bad) const {
    optimize::Box bx;
    bx.lo = {1e-2, 0.0};
    bx.hi = {1e2, 1e3};
    if (free_kappa) {
      bx.lo.push_back(std::log(1.01));
      bx.hi.push_back(std::log(1e7));
    }
    if (free_w) {
      bx.lo.push_back(0.0);
      bx.hi.push_back(1.0);
    }
    (void)bad;
    return bx;
  }
};

Problem make_problem(const models::WindowSlice &slice, double bad,
                     const FitSettings &settings) {
  Problem pr;
  pr.rows = group_rows(slice);
  pr.kind = settings.kind;
  pr.l = settings.l;
  pr.p_fixed = models::bad_to_p(models::BadValue{bad});
  pr.free_kappa = settings.kind == distcore::Kind::BetaNB;
  pr.free_w = bad > 1.0;
  pr.alpha = settings.regul_alpha;
  pr.n_obs = slice.n_obs;
  pr.fixed_value = slice.fixed_value;
  return pr;
}

// Dense symmetric solve via Cholesky of A (must be positive definite).
// Returns the inverse of A.
std::vector<double> chol_inverse(std::vector<double> A, int n) {
  std::vector<double> L(n * n, 0.0);
  for (int j = 0; j < n; ++j) {
    double d = A[j * n + j];
    for (int k = 0; k < j; ++k)
      d -= L[j * n + k] * L[j * n + k];
    if (!(d > 0.0))
      throw SingularInformation(
          "std_errors: information matrix is not positive definite");
    L[j * n + j] = std::sqrt(d);
    for (int i = j + 1; i < n; ++i) {
      double s = A[i * n + j];
      for (int k = 0; k < j; ++k)
        s -= L[i * n + k] * L[j * n + k];
      L[i * n + j] = s / L[j * n + j];
    }
  }
  std::vector<double> inv(n * n, 0.0);
  std::vector<double> col(n), y(n);
  for (int c = 0; c < n; ++c) {
    for (int i = 0; i < n; ++i) {
      double s = (i == c) ? 1.0 : 0.0;
      for (int k = 0; k < i; ++k)
        s -= L[i * n + k] * y[k];
      y[i] = s / L[i * n + i];
    }
    for (int i = n - 1; i >= 0; --i) {
      double s = y[i];
      for (int k = i + 1; k < n; ++k)
        s -= L[k * n + i] * col[k];
      col[i] = s / L[i * n + i];
    }
    for (int i = 0; i < n; ++i)
      inv[i * n + c] = col[i];
  }
  return inv;
}

std::vector<double> se_at(const Problem &pr, const optimize::Box &bx,
                          std::span<const double> x) {
  const int dim = pr.dim();
  std::vector<int> interior;
  for (int i = 0; i < dim; ++i) {
    const double scale = std::max(1.0, std::fabs(x[i]));
    if (x[i] - bx.lo[i] > 1e-8 * scale && bx.hi[i] - x[i] > 1e-8 * scale)
      interior.push_back(i);
  }
  std::vector<double> se(dim, kNaN);
  if (interior.empty())
    return se;

  const int m = static_cast<int>(interior.size());
  const double heps = std::cbrt(std::numeric_limits<double>::epsilon());
  std::vector<double> H(m * m, 0.0);
  std::vector<double> xp(x.begin(), x.end()), gp(dim), gm(dim);
  for (int c = 0; c < m; ++c) {
    const int i = interior[c];
    const double h = heps * std::max(1.0, std::fabs(x[i]));
    xp[i] = x[i] + h;
    pr.eval(xp, gp);
    xp[i] = x[i] - h;
    pr.eval(xp, gm);
    xp[i] = x[i];
    for (int rI = 0; rI < m; ++rI)
      H[rI * m + c] = (gp[interior[rI]] - gm[interior[rI]]) / (2.0 * h);
  }
  // observed information: -H, symmetrized
  std::vector<double> info(m * m);
  for (int rI = 0; rI < m; ++rI)
    for (int c = 0; c < m; ++c)
      info[rI * m + c] = -0.5 * (H[rI * m + c] + H[c * m + rI]);
  const auto cov = chol_inverse(std::move(info), m);
  for (int c = 0; c < m; ++c)
    se[interior[c]] = std::sqrt(cov[c * m + c]);
  return se;
}

} // namespace

std::vector<std::string> free_names(distcore::Kind kind, bool free_w) {
  std::vector<std::string> names = {"b", "a"};
  if (kind == distcore::Kind::BetaNB)
    names.push_back("kappa");
  if (free_w)
    names.push_back("w");
  return names;
}

double window_loglik(const models::WindowSlice &slice, distcore::Kind kind,
                     long l, const ParameterVector &params) {
  if (slice.observations.empty())
    return 0.0; // empty sum
  const auto rows = group_rows(slice);
  const bool mixture = params.w < 1.0;
  return loglik_t<double>(rows, kind, l, params.b, params.a, params.p,
                          params.kappa, params.w, mixture);
}

double map_penalty(double kappa, double alpha, long n_obs, long fixed_value) {
  if (!(kappa > 0.0) || alpha < 0.0 || n_obs < 0)
    throw DomainError("map_penalty: bad arguments");
  return map_penalty_t<double>(kappa, alpha, n_obs, fixed_value);
}

WindowEstimate fit_window(const models::WindowSlice &slice, double bad,
                          const FitSettings &settings,
                          const ParameterVector *warm_start) {
  const Problem pr = make_problem(slice, bad, settings);
  const optimize::Box bx = pr.box(bad);

  ParameterVector init;
  if (warm_start) {
    init = *warm_start;
  } else {
    init.b = 1.0;
    init.a = 0.5 * static_cast<double>(settings.l);
    init.kappa = 100.0;
    init.w = 0.8;
  }
  init.p = pr.p_fixed;
  std::vector<double> x0 = pr.pack(init);
  for (size_t i = 0; i < x0.size(); ++i)
    x0[i] = std::clamp(x0[i], bx.lo[i], bx.hi[i]);

  const auto res = optimize::maximize(
      [&pr](std::span<const double> x, std::span<double> g) {
        return pr.eval(x, g);
      },
      x0, bx, settings.tol, settings.max_evals);

  WindowEstimate est;
  est.fixed_value = slice.fixed_value;
  est.lo = slice.lo;
  est.hi = slice.hi;
  est.n_obs = slice.n_obs;
  est.params = pr.unpack(res.x);
  est.loglik = pr.loglik_at(est.params);
  est.converged = res.converged && est.loglik > kBadRegion;
  est.w_fixed = !pr.free_w;
  if (settings.compute_se && est.converged) {
    try {
      est.std_errors = se_at(pr, bx, res.x);
      if (pr.free_kappa) // delta method: log-scale SE back to kappa
        est.std_errors[2] *= est.params.kappa;
    } catch (const SingularInformation &) {
      est.std_errors.assign(pr.dim(), kNaN);
    }
  }
  return est;
}

double window_objective(const models::WindowSlice &slice, double bad,
                        const FitSettings &settings,
                        const ParameterVector &params,
                        std::vector<double> *grad) {
  const Problem pr = make_problem(slice, bad, settings);
  const auto x = pr.pack(params);
  std::vector<double> g(pr.dim());
  const double f = pr.eval(x, g);
  if (pr.free_kappa)
    g[2] /= params.kappa; // internal log-scale gradient back to kappa
  if (grad)
    *grad = std::move(g);
  return f;
}

std::vector<double> std_errors(const models::WindowSlice &slice, double bad,
                               const FitSettings &settings,
                               const ParameterVector &params) {
  const Problem pr = make_problem(slice, bad, settings);
  const auto x = pr.pack(params);
  auto se = se_at(pr, pr.box(bad), x);
  if (pr.free_kappa) // delta method: log-scale SE back to kappa
    se[2] *= params.kappa;
  return se;
}

FitResult fit_global(const PartitionMap &partitions,
                     const FitSettings &settings) {
  FitResult out;
  out.settings = settings;
  for (const auto &[key, index] : partitions) {
    if (index.empty())
      continue;
    const double bad = key.second;
    auto &table = out.estimates[key];
    ParameterVector warm;
    bool have_warm = false;
    for (const auto &[fixed_value, rows] : index) {
      (void)rows;
      if (fixed_value < settings.l)
        continue;
      try {
        const auto slice = models::build_window(index, fixed_value,
                                                settings.window_size,
                                                settings.l);
        auto est = fit_window(slice, bad, settings,
                              have_warm ? &warm : nullptr);
        if (est.converged) {
          warm = est.params;
          have_warm = true;
        }
        table.emplace(fixed_value, std::move(est));
      } catch (const Error &) {
        WindowEstimate failed;
        failed.fixed_value = fixed_value;
        failed.converged = false;
        failed.loglik = kNaN;
        if (have_warm)
          failed.params = warm;
        table.emplace(fixed_value, std::move(failed));
      }
    }
  }
  if (out.estimates.empty())
    throw EmptyDataset("fit_global: no partitions with data");
  return out;
}

} // namespace aimix::fit
