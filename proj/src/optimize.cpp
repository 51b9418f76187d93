#include "aimix/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace aimix::optimize {

namespace {

void project(std::vector<double> &x, const Box &box) {
  for (size_t i = 0; i < x.size(); ++i)
    x[i] = std::clamp(x[i], box.lo[i], box.hi[i]);
}

// inf-norm of P[x + g] - x, the first-order condition for a maximum on a box
double projected_gradient_norm(const std::vector<double> &x,
                               const std::vector<double> &g, const Box &box) {
  double nrm = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double step = std::clamp(x[i] + g[i], box.lo[i], box.hi[i]) - x[i];
    nrm = std::max(nrm, std::fabs(step));
  }
  return nrm;
}

} // namespace

Result maximize(const Objective &objective, std::vector<double> x0,
                const Box &box, double tol, int max_evals) {
  const size_t n = x0.size();
  project(x0, box);
  Result res;
  res.x = x0;

  std::vector<double> g(n), g_new(n);
  int evals = 0;
  auto eval = [&](const std::vector<double> &x, std::vector<double> &grad) {
    ++evals;
    return objective(std::span<const double>(x), std::span<double>(grad));
  };

  double f = eval(res.x, g);
  res.f = f;

  struct Pair {
    std::vector<double> s, y;
    double rho;
  };
  std::deque<Pair> mem;
  const size_t mem_cap = 8;

  std::vector<double> dir(n), x_new(n), gp(n), gp_new(n);
  std::vector<bool> active(n), active_prev(n, false);
  bool first_iter = true;
  int flat_iters = 0; // consecutive iterations with negligible f progress
  while (evals < max_evals) {
    res.proj_grad_norm = projected_gradient_norm(res.x, g, box);
    // scale by |f|: below this the objective is flat at double precision
    if (res.proj_grad_norm <= tol * std::max(1.0, std::fabs(f))) {
      res.converged = true;
      break;
    }

    // mask gradient components that push into an active bound; restart the
    // curvature memory whenever the active set changes
    for (size_t i = 0; i < n; ++i) {
      active[i] = (res.x[i] <= box.lo[i] && g[i] < 0.0) ||
                  (res.x[i] >= box.hi[i] && g[i] > 0.0);
      gp[i] = active[i] ? 0.0 : g[i];
    }
    if (!first_iter && active != active_prev)
      mem.clear();
    active_prev = active;
    first_iter = false;

    // two-loop recursion on the ascent direction (reduced gradient)
    dir = gp;
    std::vector<double> alpha(mem.size());
    for (size_t k = mem.size(); k-- > 0;) {
      double sd = 0.0;
      for (size_t i = 0; i < n; ++i)
        sd += mem[k].s[i] * dir[i];
      alpha[k] = mem[k].rho * sd;
      for (size_t i = 0; i < n; ++i)
        dir[i] -= alpha[k] * mem[k].y[i];
    }
    if (!mem.empty()) {
      double yy = 0.0, sy = 0.0;
      for (size_t i = 0; i < n; ++i) {
        yy += mem.back().y[i] * mem.back().y[i];
        sy += mem.back().s[i] * mem.back().y[i];
      }
      const double gamma = yy > 0.0 ? sy / yy : 1.0;
      for (size_t i = 0; i < n; ++i)
        dir[i] *= gamma;
    }
    for (size_t k = 0; k < mem.size(); ++k) {
      double yd = 0.0;
      for (size_t i = 0; i < n; ++i)
        yd += mem[k].y[i] * dir[i];
      const double beta = mem[k].rho * yd;
      for (size_t i = 0; i < n; ++i)
        dir[i] += (alpha[k] - beta) * mem[k].s[i];
    }
    for (size_t i = 0; i < n; ++i)
      if (active[i])
        dir[i] = 0.0;
    double gd = 0.0;
    for (size_t i = 0; i < n; ++i)
      gd += gp[i] * dir[i];
    if (!(gd > 0.0)) { // not an ascent direction; reset to steepest ascent
      dir = gp;
      mem.clear();
    }

    // backtracking along the projected path
    double f_new = -std::numeric_limits<double>::infinity();
    auto line_search = [&]() {
      double step = 1.0;
      for (int ls = 0; ls < 40 && evals < max_evals; ++ls) {
        for (size_t i = 0; i < n; ++i)
          x_new[i] = res.x[i] + step * dir[i];
        project(x_new, box);
        double decrease = 0.0;
        for (size_t i = 0; i < n; ++i)
          decrease += g[i] * (x_new[i] - res.x[i]);
        f_new = eval(x_new, g_new);
        if (std::isfinite(f_new) && f_new >= f + 1e-4 * decrease)
          return true;
        step *= 0.5;
      }
      return false;
    };
    bool accepted = line_search();
    if (!accepted && !mem.empty()) {
      // quasi-Newton direction failed; retry along the reduced gradient
      mem.clear();
      dir = gp;
      accepted = line_search();
    }
    if (!accepted) {
      // Stalled: no step improves f within floating-point resolution. Accept
      // the point when the gradient is negligible relative to |f|, which the
      // absolute criterion above cannot detect for large objectives.
      double rel = 0.0;
      for (size_t i = 0; i < n; ++i)
        rel = std::max(rel, std::fabs(gp[i]) * std::max(1.0, std::fabs(res.x[i])));
      if (rel <= 1e-7 * std::max(1.0, std::fabs(f)))
        res.converged = true;
      break;
    }

    Pair pr;
    pr.s.resize(n);
    pr.y.resize(n);
    double sy = 0.0;
    for (size_t i = 0; i < n; ++i) {
      pr.s[i] = x_new[i] - res.x[i];
      pr.y[i] = g[i] - g_new[i]; // ascent convention: y = g_old - g_new
      sy += pr.s[i] * pr.y[i];
    }
    if (sy > 1e-14) {
      pr.rho = 1.0 / sy;
      mem.push_back(std::move(pr));
      if (mem.size() > mem_cap)
        mem.pop_front();
    }
    // Objective-progress criterion: once accepted steps stop moving f by
    // more than its numerical resolution, further iterations only walk the
    // round-off noise (the gradient criterion is unreachable there).
    if (f_new - f <= tol * std::max(1.0, std::fabs(f)))
      ++flat_iters;
    else
      flat_iters = 0;
    res.x = x_new;
    f = f_new;
    g = g_new;
    res.f = f;
    if (flat_iters >= 5) {
      res.converged = true;
      break;
    }
  }
  res.n_evals = evals;
  if (!res.converged)
    res.proj_grad_norm = projected_gradient_norm(res.x, g, box);
  return res;
}

double maximize_scalar(const std::function<double(double)> &f, double lo,
                       double hi, double tol, int max_iter) {
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - gr * (hi - lo);
  double x2 = lo + gr * (hi - lo);
  double f1 = f(x1);
  double f2 = f(x2);
  for (int it = 0; it < max_iter && hi - lo > tol; ++it) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + gr * (hi - lo);
      f2 = f(x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - gr * (hi - lo);
      f1 = f(x1);
    }
  }
  return 0.5 * (lo + hi);
}

} // namespace aimix::optimize
