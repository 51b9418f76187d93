#pragma once

// Per-observation right-tail p-values and effect sizes under the fitted
// conditional mixtures, logit-method p-value combination, and SNV-level
// final calls. P-values are carried as natural logarithms throughout.

#include <map>
#include <shared_mutex>
#include <tuple>
#include <vector>

#include "aimix/fit.hpp"

namespace aimix::scoring {

// Per-(x, y) scores; log_pval_* are natural logs of right-tail p-values.
struct RawScore {
  double log_pval_ref = 0.0;
  double log_pval_alt = 0.0;
  double es_ref = 0.0; // log2 units; NaN when the fitted mean is undefined
  double es_alt = 0.0;
};

enum class Side { Ref = 0, Alt = 1 };

struct ScoreRecord {
  double log_comb_pval_ref = 0.0;
  double log_comb_pval_alt = 0.0;
  double comb_es_ref = 0.0;
  double comb_es_alt = 0.0;
  double log_final_pval = 0.0;
  double final_es = 0.0;
  Side final_side = Side::Ref;
  bool es_ref_degenerate = false;
  bool es_alt_degenerate = false;
};

// log2(conditional_mean) - log2(observed).
double effect_size(double observed, double conditional_mean);

// Truncated mixture distribution induced by a window estimate for one
// orientation; variable counts are scored against it.
struct ConditionalMixture {
  models::MixtureParams mix;
  bool has_minor = false;
};
ConditionalMixture conditional_mixture(const fit::WindowEstimate &est,
                                       distcore::Kind kind, long l,
                                       long fixed_value);

// ln P(Z >= x) under the truncated mixture.
double mixture_right_tail_logp(long x, const ConditionalMixture &cm);

// Mean of the truncated mixture; throws DomainError when a component's
// moments are undefined.
double mixture_truncated_mean(const ConditionalMixture &cm);

// Scores one (ref_count, alt_count) pair against both orientations.
// Throws MissingEstimate when no usable window covers a fixed count.
RawScore score_observation(long x, long y, const fit::FitResult &fits,
                           double bad);

// Mudholkar-George combination of natural-log p-values; returns a natural
// log. Exact 0.5 for all-0.5 inputs. Throws DomainError for p outside (0,1];
// p = 1 entries are clamped just below 1.
double combine_pvalues(const std::vector<double> &log_pvals);

struct CombinedES {
  double es = 0.0;
  bool degenerate = false; // all weights zero (every p = 1)
};
// Weighted mean with weights -ln p_i.
CombinedES combine_effect_sizes(const std::vector<double> &es,
                                const std::vector<double> &log_pvals);

// Combines a group's raw scores into the final SNV-level call; ties between
// the two sides resolve to the reference side.
ScoreRecord score_group(const std::vector<RawScore> &observations);

// Memoizing wrapper around score_observation; safe for concurrent readers.
class Scorer {
public:
  explicit Scorer(const fit::FitResult &fits) : fits_(fits) {}
  RawScore score(long x, long y, double bad) const;

private:
  const fit::FitResult &fits_;
  mutable std::shared_mutex mutex_;
  mutable std::map<std::tuple<long, long, double>, RawScore> cache_;
};

} // namespace aimix::scoring
