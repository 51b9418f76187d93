// Acceptance suite: one PASS/FAIL line per criterion. The path to the CLI
// binary is passed as argv[1] (used by the end-to-end determinism check).

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "aimix/difftest.hpp"
#include "aimix/distcore.hpp"
#include "aimix/fit.hpp"
#include "aimix/io.hpp"
#include "aimix/models.hpp"
#include "aimix/scoring.hpp"
#include "testutil.hpp"

namespace fs = std::filesystem;
using namespace aimix;
using distcore::DistributionSpec;

namespace {

int g_failures = 0;

void report(int id, bool ok, const std::string &title,
            const std::string &detail) {
  std::printf("criterion %2d: %s  %s (%s)\n", id, ok ? "PASS" : "FAIL",
              title.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok)
    ++g_failures;
}

std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i)
    out[i] = lo + (hi - lo) * i / (n - 1);
  return out;
}

std::string fmt_err(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

// ---- shared simulation helpers ---------------------------------------------

models::FixedIndex simulate_nb_index(std::mt19937_64 &rng, long n,
                                     long fixed_lo, long fixed_hi, double b,
                                     double a, double p, long l) {
  std::map<long, testutil::TableSampler> samplers;
  std::map<long, std::map<long, long>> agg;
  std::uniform_int_distribution<long> fixed_dist(fixed_lo, fixed_hi);
  for (long i = 0; i < n; ++i) {
    const long f = fixed_dist(rng);
    auto it = samplers.find(f);
    if (it == samplers.end())
      it = samplers
               .emplace(f, testutil::TableSampler(testutil::trunc_nb_table(
                               b * f + a, p, l, 3000)))
               .first;
    ++agg[f][it->second(rng)];
  }
  models::FixedIndex index;
  for (auto &[f, counts] : agg)
    for (auto [c, m] : counts)
      index[f].emplace_back(c, m);
  return index;
}

// Mixture of two truncated NBs at p and 1-p with weight w on the p side.
models::FixedIndex simulate_mixture_index(std::mt19937_64 &rng, long n,
                                          long fixed_lo, long fixed_hi,
                                          double b, double a, double p,
                                          double w, long l) {
  std::map<long, std::pair<testutil::TableSampler, testutil::TableSampler>>
      samplers;
  std::map<long, std::map<long, long>> agg;
  std::uniform_int_distribution<long> fixed_dist(fixed_lo, fixed_hi);
  std::bernoulli_distribution pick_major(w);
  for (long i = 0; i < n; ++i) {
    const long f = fixed_dist(rng);
    auto it = samplers.find(f);
    if (it == samplers.end())
      it = samplers
               .emplace(
                   f,
                   std::pair<testutil::TableSampler, testutil::TableSampler>(
                       testutil::TableSampler(testutil::trunc_nb_table(
                           b * f + a, p, l, 3000)),
                       testutil::TableSampler(testutil::trunc_nb_table(
                           b * f + a, 1.0 - p, l, 3000))))
               .first;
    const long x =
        pick_major(rng) ? it->second.first(rng) : it->second.second(rng);
    ++agg[f][x];
  }
  models::FixedIndex index;
  for (auto &[f, counts] : agg)
    for (auto [c, m] : counts)
      index[f].emplace_back(c, m);
  return index;
}

// ---- criteria --------------------------------------------------------------

void criterion_1() {
  double max_err_mean = 0.0, max_err_m2 = 0.0;
  for (double r : linspace(1.0, 50.0, 200)) {
    for (double p : linspace(0.1, 0.9, 200)) {
      const auto t = distcore::mcnb_pmf_table(999, {r, p});
      testutil::KahanSum m1, m2;
      for (long x = 0; x <= 999; ++x) {
        m1.add(x * t[x]);
        m2.add(static_cast<double>(x) * x * t[x]);
      }
      const auto mm = distcore::moments(DistributionSpec::mcnb(r, p));
      max_err_mean = std::max(max_err_mean, std::fabs(mm.mean - m1.s));
      max_err_m2 = std::max(
          max_err_m2, std::fabs(mm.variance + mm.mean * mm.mean - m2.s));
    }
  }
  const bool ok = max_err_mean < 1e-9 && max_err_m2 < 1e-9;
  report(1, ok, "MCNB closed-form moments vs brute-force sums",
         "max err mean " + fmt_err(max_err_mean) + ", second moment " +
             fmt_err(max_err_m2));
}

void criterion_2() {
  double max_err = 0.0;
  for (long r = 1; r <= 10; ++r)
    for (double p : {0.1, 0.3, 0.5, 0.7, 0.9}) {
      const auto t =
          distcore::mcnb_pmf_table(200, {static_cast<double>(r), p});
      for (long x = 0; x <= 200; ++x)
        max_err = std::max(
            max_err,
            std::fabs(t[x] - testutil::mcnb_pmf_compound_oracle(x, r, p)));
    }
  report(2, max_err < 1e-10, "MCNB recurrence vs compound-sum oracle",
         "max abs err " + fmt_err(max_err));
}

void criterion_3() {
  double max_err = 0.0;
  long n_points = 0;
  // NB: r spans both sides of the branch diagonal r = x(1-p)/p
  for (long x : {2L, 3L, 5L, 8L, 12L, 20L, 35L, 50L})
    for (double p : {0.2, 0.35, 0.5, 0.65, 0.8})
      for (double scale : {0.5, 0.75, 0.9, 1.0, 1.1, 1.5, 2.0, 5.0}) {
        const double rd = std::max(0.2, x * (1.0 - p) / p);
        const double r = rd * scale;
        const double want = testutil::brute_cdf(x, [&](long k) {
          return testutil::nb_pmf_oracle(k, r, p);
        });
        max_err =
            std::max(max_err, std::fabs(distcore::nb_cdf(x, {r, p}) - want));
        ++n_points;
      }
  // BetaNB: same construction around the case-split diagonal
  for (long x : {2L, 5L, 10L, 20L})
    for (double mu : {0.3, 0.5, 0.7})
      for (double kappa : {8.0, 30.0, 200.0})
        for (double scale : {0.5, 0.75, 0.9, 1.1, 1.5, 2.0}) {
          const double rd = std::max(0.3, x * (1.0 - mu) / mu);
          const double r = rd * scale;
          const double want = testutil::brute_cdf(x, [&](long k) {
            return testutil::betanb_pmf_oracle(k, r, mu, kappa);
          });
          max_err = std::max(
              max_err,
              std::fabs(distcore::betanb_cdf(x, {r, mu, kappa}) - want));
          ++n_points;
        }
  report(3, max_err < 1e-8 && n_points >= 500,
         "NB/BetaNB CDF branch rules vs brute-force summation",
         std::to_string(n_points) + " points, max abs err " +
             fmt_err(max_err));
}

void criterion_4() {
  double max_err = 0.0;
  long n_points = 0;
  for (double kappa : {5.0, 50.0, 500.0})
    for (long r : {1L, 2L, 5L, 12L, 30L})
      for (long x : {0L, 1L, 3L, 7L, 15L})
        for (double mu : {0.2, 0.35, 0.5, 0.65, 0.8}) {
          const double s =
              distcore::betanb_cdf(x, {static_cast<double>(r), mu, kappa}) +
              distcore::betanb_cdf(r - 1, {static_cast<double>(x + 1),
                                           1.0 - mu, kappa});
          max_err = std::max(max_err, std::fabs(s - 1.0));
          ++n_points;
        }
  report(4, max_err < 1e-8 && n_points >= 200,
         "BetaNB CDF symmetry identity",
         std::to_string(n_points) + " points, max dev " + fmt_err(max_err));
}

void criterion_5() {
  double sup = 0.0;
  for (double r : {5.0, 50.0})
    for (double mu : {0.3, 0.5, 0.75}) {
      const auto bnb = distcore::betanb_pmf_table(200, {r, mu, 1e6});
      const auto nb = distcore::nb_pmf_table(200, {r, mu});
      for (long x = 0; x <= 200; ++x)
        sup = std::max(sup, std::fabs(bnb[x] - nb[x]));
    }
  report(5, sup < 1e-4, "BetaNB converges to NB as kappa grows",
         "sup-norm distance " + fmt_err(sup));
}

void criterion_6() {
  std::mt19937_64 rng(606);
  const auto index = simulate_nb_index(rng, 5000, 8, 16, 1.0, 0.5, 0.5, 5);
  const auto slice = models::build_window(index, 12, 4000, 5);

  double worst = 0.0;
  std::uniform_real_distribution<double> ub(0.3, 3.0), ua(0.1, 5.0),
      uw(0.15, 0.9), ulk(std::log(5.0), std::log(2000.0));
  for (auto kind : {distcore::Kind::NB, distcore::Kind::BetaNB,
                    distcore::Kind::MCNB}) {
    fit::FitSettings st;
    st.kind = kind;
    for (int pt = 0; pt < 50; ++pt) {
      fit::ParameterVector pv;
      pv.b = ub(rng);
      pv.a = ua(rng);
      pv.kappa = std::exp(ulk(rng));
      pv.w = uw(rng);
      std::vector<double> grad;
      fit::window_objective(slice, 2.0, st, pv, &grad);
      const auto names = fit::free_names(kind, true);
      for (size_t i = 0; i < names.size(); ++i) {
        auto value_at = [&](double delta) {
          fit::ParameterVector q = pv;
          double *field = i == 0 ? &q.b
                          : i == 1
                              ? &q.a
                              : (names[i] == "kappa" ? &q.kappa : &q.w);
          *field += delta;
          return fit::window_objective(slice, 2.0, st, q);
        };
        const double base = *(i == 0   ? &pv.b
                              : i == 1 ? &pv.a
                                       : (names[i] == "kappa" ? &pv.kappa
                                                              : &pv.w));
        // five-point stencil with a wide step: the objective carries
        // round-off noise ~1e-8, so small h amplifies it past 1e-5
        const double h = 3e-3 * std::max(1.0, std::fabs(base));
        const double fd = (value_at(-2.0 * h) - 8.0 * value_at(-h) +
                           8.0 * value_at(h) - value_at(2.0 * h)) /
                          (12.0 * h);
        worst = std::max(worst,
                         std::fabs(grad[i] - fd) / std::max(1.0, std::fabs(fd)));
      }
    }
  }
  report(6, worst < 1e-5,
         "exact gradients vs central finite differences (50 pts x 3 kinds)",
         "worst scaled error " + fmt_err(worst));
}

void criterion_7() {
  double worst_b = 0.0, worst_a = 0.0;
  bool all_ok = true;
  for (int seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(1000 + seed);
    const auto index = simulate_nb_index(rng, 50000, 10, 20, 1.0, 0.5, 0.5, 5);
    const auto slice = models::build_window(index, 15, 50000, 5);
    fit::FitSettings st;
    st.compute_se = false;
    const auto est = fit::fit_window(slice, 1.0, st);
    worst_b = std::max(worst_b, std::fabs(est.params.b - 1.0));
    worst_a = std::max(worst_a, std::fabs(est.params.a - 0.5));
    all_ok = all_ok && est.converged && std::fabs(est.params.b - 1.0) < 0.05 &&
             std::fabs(est.params.a - 0.5) < 0.5;
  }
  report(7, all_ok, "NB simulation recovery across 20 seeds",
         "worst |b-1| " + fmt_err(worst_b) + ", worst |a-0.5| " +
             fmt_err(worst_a));
}

// Mid-p values of fresh draws from the fitted conditional distributions.
double null_calibration_ks(std::mt19937_64 &rng, double bad, double true_w,
                           long n_fit, long n_score) {
  const long l = 5;
  const double p = bad / (bad + 1.0);
  // larger fixed counts keep the conditional distributions fine-grained;
  // coarse lattices make even exact mid-p values visibly non-uniform
  const auto index =
      bad > 1.0
          ? simulate_mixture_index(rng, n_fit, 30, 60, 1.0, 0.5, p, true_w, l)
          : simulate_nb_index(rng, n_fit, 30, 60, 1.0, 0.5, p, l);
  fit::PartitionMap parts;
  parts[{0, bad}] = index;
  fit::FitSettings st;
  st.compute_se = false;
  const auto fits = fit::fit_global(parts, st);
  const auto &table = fits.estimates.at({0, bad});

  // per-fixed-count sampling tables and tail caches under the fitted model
  std::map<long, testutil::TableSampler> samplers;
  std::map<long, std::vector<double>> pmfs;
  std::map<long, scoring::ConditionalMixture> cms;
  for (const auto &[fv, est] : table) {
    if (!est.converged)
      continue;
    const auto cm =
        scoring::conditional_mixture(est, distcore::Kind::NB, l, fv);
    std::vector<double> pmf(3001, 0.0);
    for (long x = l; x <= 3000; ++x)
      pmf[x] = std::exp(models::mixture_logpmf(x, cm.mix));
    samplers.emplace(fv, testutil::TableSampler(pmf));
    pmfs.emplace(fv, std::move(pmf));
    cms.emplace(fv, cm);
  }

  std::vector<long> fixed_values;
  for (const auto &[fv, s] : samplers) {
    (void)s;
    fixed_values.push_back(fv);
  }
  std::uniform_int_distribution<size_t> pick(0, fixed_values.size() - 1);
  std::map<std::pair<long, long>, double> tail_cache;
  auto tail = [&](long fv, long x) {
    const auto key = std::make_pair(fv, x);
    auto it = tail_cache.find(key);
    if (it == tail_cache.end())
      it = tail_cache
               .emplace(key, std::exp(scoring::mixture_right_tail_logp(
                                 x, cms.at(fv))))
               .first;
    return it->second;
  };

  std::vector<double> midp;
  midp.reserve(n_score);
  for (long i = 0; i < n_score; ++i) {
    const long fv = fixed_values[pick(rng)];
    const long x = samplers.at(fv)(rng);
    midp.push_back(tail(fv, x) - 0.5 * pmfs.at(fv)[x]);
  }
  return testutil::ks_uniform(std::move(midp));
}

void criterion_8() {
  std::mt19937_64 rng(808);
  const double ks1 = null_calibration_ks(rng, 1.0, 1.0, 250000, 100000);
  const double ks2 = null_calibration_ks(rng, 2.0, 0.7, 250000, 100000);
  report(8, ks1 < 0.02 && ks2 < 0.03,
         "null p-value calibration (mid-p, 1e5 draws)",
         "KS " + fmt_err(ks1) + " at BAD=1, " + fmt_err(ks2) + " at BAD=2");
}

void criterion_9() {
  const double half = std::log(0.5);
  const bool exact_half =
      scoring::combine_pvalues({half, half, half, half}) == half;

  std::mt19937_64 rng(909);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  bool rates_ok = true;
  std::string detail = exact_half ? "all-0.5 exact" : "all-0.5 NOT exact";
  for (int n : {2, 5, 10}) {
    const int reps = 200000;
    int hits = 0;
    std::vector<double> lp(n);
    for (int rep = 0; rep < reps; ++rep) {
      for (int i = 0; i < n; ++i)
        lp[i] = std::log(u(rng));
      if (scoring::combine_pvalues(lp) <= std::log(0.05))
        ++hits;
    }
    const double rate = static_cast<double>(hits) / reps;
    rates_ok = rates_ok && rate > 0.045 && rate < 0.055;
    detail += "; n=" + std::to_string(n) + " rate " + fmt_err(rate);
  }
  report(9, exact_half && rates_ok,
         "Mudholkar-George fixed point and type-I error", detail);
}

void criterion_10() {
  // frozen window parameters matching the generator
  fit::FitResult fits;
  fits.settings.kind = distcore::Kind::NB;
  fits.settings.l = 5;
  for (int orient = 0; orient < 2; ++orient) {
    auto &table = fits.estimates[{orient, 1.0}];
    for (long f = 5; f <= 300; ++f) {
      fit::WindowEstimate est;
      est.fixed_value = f;
      est.n_obs = 1000;
      est.params = {1.0, 1.0, 0.5, 100.0, 1.0};
      est.loglik = -1.0;
      est.converged = true;
      table.emplace(f, est);
    }
  }
  // generator exactly on-model for BOTH orientations: with x+y uniform and
  // x | x+y binomial, each conditional is NB(other_count + 1, p)
  std::mt19937_64 rng(1010);
  auto draw_group = [&](long n, double p) {
    std::uniform_int_distribution<long> total(40, 80);
    std::vector<difftest::GroupObs> out;
    for (long i = 0; i < n; ++i) {
      long x, y;
      do {
        const long s = total(rng);
        x = std::binomial_distribution<long>(s, p)(rng);
        y = s - x;
      } while (x < 5 || y < 5);
      out.push_back({x, y, 1});
    }
    return out;
  };

  std::vector<double> pvals;
  for (int snv = 0; snv < 2000; ++snv) {
    const auto control = draw_group(50, 0.5);
    const auto test = draw_group(50, 0.5);
    pvals.push_back(
        difftest::difftest_snv(control, test, fits, 1.0).final_pval);
  }
  const double ks = testutil::ks_uniform(std::move(pvals));

  const auto c = draw_group(1000, 0.5);
  const auto t = draw_group(1000, 0.75);
  const double power_p = difftest::difftest_snv(c, t, fits, 1.0).final_pval;

  report(10, ks < 0.03 && power_p < 1e-4,
         "difftest null calibration and power",
         "null KS " + fmt_err(ks) + ", shifted-group p " + fmt_err(power_p));
}

// ---- criterion 11: end-to-end CLI determinism ------------------------------

int sh(const std::string &cmd) { return std::system(cmd.c_str()); }

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool dirs_equal(const fs::path &a, const fs::path &b, std::string &why) {
  std::vector<std::string> names;
  for (const auto &e : fs::directory_iterator(a))
    names.push_back(e.path().filename().string());
  std::sort(names.begin(), names.end());
  for (const auto &n : names) {
    if (!fs::exists(b / n)) {
      why = "missing " + n;
      return false;
    }
    if (slurp(a / n) != slurp(b / n)) {
      why = "differs: " + n;
      return false;
    }
  }
  return true;
}

void write_fixture(const fs::path &dir, std::mt19937_64 &rng) {
  fs::create_directories(dir / "samples");
  std::ofstream bed(dir / "bad.bed");
  bed << "chr1\t0\t500000\t1\nchr1\t500000\t1000000\t2\n";
  bed.close();
  std::binomial_distribution<long> total(60, 0.5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int s = 0; s < 2; ++s) {
    std::ofstream out(dir / "samples" / ("sample" + std::to_string(s) + ".tsv"));
    out << "chr\tpos\tid\tref\talt\tref_count\talt_count\n";
    for (int i = 0; i < 500; ++i) {
      const long pos = 1000 * (i + 1);
      const long n = std::max(12L, total(rng));
      std::binomial_distribution<long> refc(n, 0.5);
      const long x = std::min(n - 1, std::max(1L, refc(rng)));
      out << "chr1\t" << pos << "\trs" << i << "\tA\tC\t" << x << '\t'
          << (n - x) << '\n';
    }
  }
}

void criterion_11(const std::string &cli) {
  if (cli.empty() || !fs::exists(cli)) {
    report(11, false, "end-to-end CLI determinism", "CLI binary not found");
    return;
  }
  const fs::path work =
      fs::temp_directory_path() /
      ("aimix_acceptance_" + std::to_string(std::random_device{}()));
  fs::create_directories(work);
  std::mt19937_64 rng(1111);
  write_fixture(work, rng);

  auto pipeline = [&](const std::string &dir) {
    fs::create_directories(work / dir);
    const std::string base = cli + " ";
    const std::string d = " --dir " + (work / dir).string() + " >/dev/null 2>&1";
    const std::string samples = (work / "samples").string();
    const std::string bed = (work / "bad.bed").string();
    int rc = 0;
    rc |= sh(base + "create P " + samples + " --bad " + bed +
             " --window-size 2000" + d);
    rc |= sh(base + "fit P NB" + d);
    rc |= sh(base + "test P" + d);
    rc |= sh(base + "combine P" + d);
    rc |= sh(base + "export all P " + (work / dir / "out").string() + d);
    return rc;
  };

  std::string why;
  bool ok = pipeline("A") == 0 && pipeline("B") == 0;
  if (ok)
    ok = dirs_equal(work / "A" / "out", work / "B" / "out", why);

  if (ok) {
    // replay the recorded log after wiping the first store
    const fs::path log = work / "replay.json";
    fs::copy_file(work / "A" / "P.mixproj" / "reproduce.json", log);
    fs::remove_all(work / "A" / "P.mixproj");
    ok = sh(cli + " reproduce " + log.string() + " >/dev/null 2>&1") == 0;
    if (ok)
      ok = sh(cli + " export all P " + (work / "A" / "out2").string() +
              " --dir " + (work / "A").string() + " >/dev/null 2>&1") == 0;
    if (ok)
      ok = dirs_equal(work / "A" / "out", work / "A" / "out2", why);
    if (ok)
      why = "two runs and a reproduce replay byte-identical";

    // a changed input must be refused
    if (ok) {
      std::ofstream(work / "samples" / "sample0.tsv", std::ios::app) << "#";
      const int rc = sh(cli + " reproduce " + log.string() + " 2>/dev/null");
      if (rc == 0) {
        ok = false;
        why = "reproduce accepted a modified input";
      }
    }
  }
  fs::remove_all(work);
  report(11, ok, "end-to-end CLI determinism", why);
}

} // namespace

int main(int argc, char **argv) {
  const std::string cli = argc > 1 ? argv[1] : "";
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8();
  criterion_9();
  criterion_10();
  criterion_11(cli);
  if (g_failures > 0) {
    std::printf("%d criterion(s) failed\n", g_failures);
    return 1;
  }
  std::printf("all 11 criteria passed\n");
  return 0;
}
