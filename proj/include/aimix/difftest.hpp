#pragma once

// Differential allele-specificity between a control and a test group:
// 1-D refits of p with window parameters frozen, Wald and likelihood-ratio
// tests, and the per-SNV two-orientation minimum.

#include <vector>

#include "aimix/fit.hpp"

namespace aimix::difftest {

enum class Method { Wald, LRT };

// One observation of the SNV in a group.
struct GroupObs {
  long x = 0; // ref count
  long y = 0; // alt count
  long mult = 1;
};

struct RefitResult {
  double p_hat = 0.5;
  double loglik = 0.0;
  double info = 0.0; // observed Fisher information at the optimum
  bool boundary = false;
  long n_used = 0;
  long n_dropped = 0; // observations without a covering window
};

// Maximizes the group log-likelihood over p in (0.01, 0.99) with all window
// parameters frozen at their global-fit values.
RefitResult refit_p(const std::vector<GroupObs> &obs,
                    const fit::FitResult &fits, fit::Orientation orient,
                    double bad);

// Two-sided normal p-value for the difference of two independent MLEs.
double wald_test(double p_c, double info_c, double p_t, double info_t);

// Upper-tail chi-squared(1) p-value of 2*(free - constrained); small negative
// statistics are clamped to zero.
double lrt(double loglik_free, double loglik_constrained);

struct DiffTestRecord {
  double p_control = 0.5;
  double p_test = 0.5;
  double se_control = 0.0; // NaN when the information is not positive
  double se_test = 0.0;
  double statistic = 0.0; // z for Wald, 2*delta for LRT (reported side)
  double pval_side1 = 1.0; // ref-given-alt orientation
  double pval_side2 = 1.0; // alt-given-ref orientation
  double final_pval = 1.0;
  Method method = Method::Wald;
};

DiffTestRecord difftest_snv(const std::vector<GroupObs> &control,
                            const std::vector<GroupObs> &test,
                            const fit::FitResult &fits, double bad,
                            Method method = Method::Wald);

} // namespace aimix::difftest
