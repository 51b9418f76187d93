// Batch command-line interface: create / fit / test / combine / difftest /
// export / visualize / reproduce. Exit codes: 0 success, 1 data error,
// 2 usage error.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fnmatch.h>
#include <unistd.h>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "aimix/difftest.hpp"
#include "aimix/fit.hpp"
#include "aimix/io.hpp"
#include "aimix/models.hpp"
#include "aimix/scoring.hpp"

namespace fs = std::filesystem;
using namespace aimix;

namespace {

// ---- small utilities -------------------------------------------------------

std::string fmt6(double v) {
  if (std::isnan(v))
    return "-";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

void write_text(const std::string &path, const std::string &content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw ParseError("cannot write file: " + path);
  out << content;
}

// Advisory per-project lock; freed on destruction.
class ProjectLock {
public:
  ProjectLock(const std::string &base_dir, const std::string &name) {
    const std::string dir = io::store_dir(base_dir, name);
    fs::create_directories(dir);
    path_ = (fs::path(dir) / ".lock").string();
    if (fs::exists(path_))
      throw UsageError("project is locked by another command: " + path_);
    write_text(path_, std::to_string(::getpid()) + "\n");
  }
  ~ProjectLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  ProjectLock(const ProjectLock &) = delete;
  ProjectLock &operator=(const ProjectLock &) = delete;

private:
  std::string path_;
};

int thread_count() {
  if (const char *env = std::getenv("AIMIX_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1)
      return n;
  }
  return 1;
}

// Group files: newline-separated sample names or glob patterns.
std::vector<std::string> load_patterns(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw ParseError("cannot open group file: " + path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (!line.empty() && line[0] != '#')
      out.push_back(line);
  }
  if (out.empty())
    throw ParseError("group file has no patterns: " + path);
  return out;
}

bool sample_matches(const std::string &sample,
                    const std::vector<std::string> &patterns) {
  for (const auto &p : patterns)
    if (fnmatch(p.c_str(), sample.c_str(), 0) == 0)
      return true;
  return false;
}

io::CommandLogEntry log_entry(const std::string &verb,
                              const std::vector<std::string> &args,
                              const std::vector<std::string> &input_paths) {
  io::CommandLogEntry e;
  e.verb = verb;
  e.args = args;
  for (const auto &p : input_paths)
    e.input_hashes[p] = io::hash_file(p);
  return e;
}

// ---- per-verb option structs ----------------------------------------------

struct Options {
  std::string base_dir = ".";

  // create
  std::string name;
  std::vector<std::string> inputs;
  std::string format = "tsv";
  std::string bad_path;
  long trunc_l = 5;
  long window_m = 10000;

  // fit
  std::string model = "NB";
  double alpha = 0.0;
  bool std_errors = false;
  bool fit_has_window = false;
  bool fit_has_trunc = false;

  // combine
  std::string group_file;
  std::string group_name = "all";

  // difftest
  std::string control_file;
  std::string test_file;
  std::string method = "wald";

  // export / visualize
  std::string what = "all";
  std::string out_dir;

  // reproduce
  std::string log_path;
};

int dispatch(const std::vector<std::string> &argv);

// ---- verb implementations --------------------------------------------------

int cmd_create(const Options &opt, const std::vector<std::string> &raw_args) {
  ProjectLock lock(opt.base_dir, opt.name);
  io::Project project;
  project.name = opt.name;
  project.settings.l = opt.trunc_l;
  project.settings.m = opt.window_m;
  project.fits.settings.l = opt.trunc_l;
  project.fits.settings.window_size = opt.window_m;

  // directories expand to their regular files, sorted for determinism
  std::vector<std::string> files;
  for (const auto &input : opt.inputs) {
    if (fs::is_directory(input)) {
      for (const auto &entry : fs::directory_iterator(input))
        if (entry.is_regular_file())
          files.push_back(entry.path().string());
    } else {
      files.push_back(input);
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty())
    throw EmptyDataset("create: no input files found");

  std::optional<io::BadMap> bad_map;
  if (!opt.bad_path.empty())
    bad_map = io::load_bad_map(opt.bad_path);
  const io::Format format =
      opt.format == "tsv" ? io::Format::Tsv : io::Format::VcfLike;
  const auto stats = io::ingest(project, files, format, bad_map);

  std::vector<std::string> hashed = files;
  if (!opt.bad_path.empty())
    hashed.push_back(opt.bad_path);
  project.log.push_back(log_entry("create", raw_args, hashed));
  io::save_project(project, opt.base_dir);
  std::fprintf(stderr,
               "create: %ld records parsed, %ld homozygous dropped, "
               "%ld below truncation dropped, %ld without BAD annotation\n",
               stats.parsed, stats.dropped_homozygous, stats.dropped_below_l,
               stats.unannotated);
  return 0;
}

int cmd_fit(const Options &opt, const std::vector<std::string> &raw_args) {
  ProjectLock lock(opt.base_dir, opt.name);
  io::Project project = io::load_project(opt.base_dir, opt.name);
  project.settings.kind = [&] {
    if (opt.model == "NB")
      return distcore::Kind::NB;
    if (opt.model == "BetaNB")
      return distcore::Kind::BetaNB;
    return distcore::Kind::MCNB;
  }();
  project.settings.alpha = opt.alpha;
  project.settings.std_errors = opt.std_errors;
  if (opt.fit_has_window)
    project.settings.m = opt.window_m;
  if (opt.fit_has_trunc)
    project.settings.l = opt.trunc_l;

  fit::FitSettings st;
  st.kind = project.settings.kind;
  st.window_size = project.settings.m;
  st.l = project.settings.l;
  st.regul_alpha = project.settings.alpha;
  st.compute_se = project.settings.std_errors;

  project.fits = fit::fit_global(io::partitions(project), st);
  project.settings.fitted = true;
  // downstream stages are stale after a refit
  project.raw_scores.clear();
  project.combined.clear();
  project.difftests.clear();

  project.log.push_back(log_entry("fit", raw_args, {}));
  io::save_project(project, opt.base_dir);
  long n_windows = 0, n_converged = 0;
  for (const auto &[key, table] : project.fits.estimates)
    for (const auto &[fixed, est] : table) {
      (void)key;
      (void)fixed;
      ++n_windows;
      n_converged += est.converged ? 1 : 0;
    }
  std::fprintf(stderr, "fit: %ld windows, %ld converged\n", n_windows,
               n_converged);
  return 0;
}

int cmd_test(const Options &opt, const std::vector<std::string> &raw_args) {
  ProjectLock lock(opt.base_dir, opt.name);
  io::Project project = io::load_project(opt.base_dir, opt.name);
  if (!project.settings.fitted)
    throw MissingEstimate("test: project has no fitted models; run fit first");

  scoring::Scorer scorer(project.fits);
  const size_t n = project.observations.size();
  std::vector<io::RawScoreRow> rows(n);
  std::vector<std::string> errors(n);
  const int n_threads =
      std::max(1, std::min<int>(thread_count(), static_cast<int>(n)));
  auto work = [&](size_t begin, size_t end) {
    for (size_t i = begin; i < end; ++i) {
      const auto &o = project.observations[i];
      io::RawScoreRow row;
      row.snv = o.snv;
      row.sample = o.sample;
      row.x = o.x;
      row.y = o.y;
      row.mult = o.mult;
      try {
        row.score = scorer.score(o.x, o.y, project.snvs[o.snv].bad);
      } catch (const Error &e) {
        errors[i] = e.what();
      }
      rows[i] = std::move(row);
    }
  };
  if (n_threads == 1) {
    work(0, n);
  } else {
    std::vector<std::thread> threads;
    const size_t chunk = (n + n_threads - 1) / n_threads;
    for (int t = 0; t < n_threads; ++t) {
      const size_t begin = std::min(n, t * chunk);
      const size_t end = std::min(n, begin + chunk);
      if (begin < end)
        threads.emplace_back(work, begin, end);
    }
    for (auto &th : threads)
      th.join();
  }
  project.raw_scores.clear();
  long skipped = 0;
  for (size_t i = 0; i < n; ++i) {
    if (!errors[i].empty()) {
      ++skipped;
      continue;
    }
    project.raw_scores.push_back(std::move(rows[i]));
  }
  if (skipped > 0)
    std::fprintf(stderr, "test: %ld observations skipped (no estimate)\n",
                 skipped);

  project.log.push_back(log_entry("test", raw_args, {}));
  io::save_project(project, opt.base_dir);
  std::fprintf(stderr, "test: %zu observations scored\n",
               project.raw_scores.size());
  return 0;
}

int cmd_combine(const Options &opt, const std::vector<std::string> &raw_args) {
  ProjectLock lock(opt.base_dir, opt.name);
  io::Project project = io::load_project(opt.base_dir, opt.name);
  if (project.raw_scores.empty())
    throw EmptyDataset("combine: no raw scores; run test first");

  std::vector<std::string> patterns = {"*"};
  std::string group = opt.group_name;
  std::vector<std::string> hashed;
  if (!opt.group_file.empty()) {
    patterns = load_patterns(opt.group_file);
    group = fs::path(opt.group_file).stem().string();
    hashed.push_back(opt.group_file);
  }

  std::map<long, std::vector<scoring::RawScore>> per_snv;
  for (const auto &r : project.raw_scores) {
    if (!sample_matches(r.sample, patterns))
      continue;
    for (long k = 0; k < r.mult; ++k)
      per_snv[r.snv].push_back(r.score);
  }
  if (per_snv.empty())
    throw EmptyDataset("combine: no scored observations match the group");

  // keep any previously combined groups with a different name
  std::vector<io::CombinedRow> kept;
  for (auto &c : project.combined)
    if (c.group != group)
      kept.push_back(std::move(c));
  project.combined = std::move(kept);
  for (const auto &[snv, scores] : per_snv) {
    io::CombinedRow c;
    c.snv = snv;
    c.group = group;
    c.n_obs = static_cast<long>(scores.size());
    c.record = scoring::score_group(scores);
    project.combined.push_back(std::move(c));
  }
  std::sort(project.combined.begin(), project.combined.end(),
            [](const io::CombinedRow &a, const io::CombinedRow &b) {
              return std::tie(a.group, a.snv) < std::tie(b.group, b.snv);
            });

  project.log.push_back(log_entry("combine", raw_args, hashed));
  io::save_project(project, opt.base_dir);
  std::fprintf(stderr, "combine: %zu SNVs combined into group '%s'\n",
               per_snv.size(), group.c_str());
  return 0;
}

int cmd_difftest(const Options &opt, const std::vector<std::string> &raw_args) {
  ProjectLock lock(opt.base_dir, opt.name);
  io::Project project = io::load_project(opt.base_dir, opt.name);
  if (!project.settings.fitted)
    throw MissingEstimate("difftest: project has no fitted models");

  const auto control_patterns = load_patterns(opt.control_file);
  const auto test_patterns = load_patterns(opt.test_file);
  const auto method =
      opt.method == "lrt" ? difftest::Method::LRT : difftest::Method::Wald;

  std::map<long, std::pair<std::vector<difftest::GroupObs>,
                           std::vector<difftest::GroupObs>>>
      groups;
  for (const auto &o : project.observations) {
    difftest::GroupObs g{o.x, o.y, o.mult};
    if (sample_matches(o.sample, control_patterns))
      groups[o.snv].first.push_back(g);
    if (sample_matches(o.sample, test_patterns))
      groups[o.snv].second.push_back(g);
  }

  project.difftests.clear();
  long skipped_one_group = 0, skipped_error = 0;
  for (const auto &[snv, pair] : groups) {
    if (pair.first.empty() || pair.second.empty()) {
      ++skipped_one_group;
      continue;
    }
    try {
      io::DiffRow row;
      row.snv = snv;
      row.record = difftest::difftest_snv(pair.first, pair.second,
                                          project.fits,
                                          project.snvs[snv].bad, method);
      project.difftests.push_back(std::move(row));
    } catch (const Error &) {
      ++skipped_error;
    }
  }
  if (skipped_one_group > 0)
    std::fprintf(stderr,
                 "difftest: %ld SNVs present in only one group skipped\n",
                 skipped_one_group);
  if (skipped_error > 0)
    std::fprintf(stderr, "difftest: %ld SNVs skipped (no usable windows)\n",
                 skipped_error);

  project.log.push_back(
      log_entry("difftest", raw_args, {opt.control_file, opt.test_file}));
  io::save_project(project, opt.base_dir);
  std::fprintf(stderr, "difftest: %zu SNVs tested\n",
               project.difftests.size());
  return 0;
}

// ---- export ----------------------------------------------------------------

std::string export_params(const io::Project &p) {
  std::ostringstream out;
  out << "orientation\tbad\tfixed\tlo\thi\tn_obs\tb\ta\tp\tkappa\tw\tloglik"
         "\tconverged\tse_b\tse_a\tse_kappa\tse_w\tse_unreliable\n";
  const bool map_fit =
      p.settings.alpha > 0.0 && p.settings.kind == distcore::Kind::BetaNB;
  for (const auto &[key, table] : p.fits.estimates) {
    const std::string oname =
        key.first == 0 ? "ref_given_alt" : "alt_given_ref";
    for (const auto &[fixed, est] : table) {
      (void)fixed;
      double se[4] = {std::nan(""), std::nan(""), std::nan(""), std::nan("")};
      const auto fns = fit::free_names(p.settings.kind, !est.w_fixed);
      for (size_t i = 0; i < est.std_errors.size() && i < fns.size(); ++i) {
        if (fns[i] == "b")
          se[0] = est.std_errors[i];
        else if (fns[i] == "a")
          se[1] = est.std_errors[i];
        else if (fns[i] == "kappa")
          se[2] = est.std_errors[i];
        else
          se[3] = est.std_errors[i];
      }
      out << oname << '\t' << fmt6(key.second) << '\t' << est.fixed_value
          << '\t' << est.lo << '\t' << est.hi << '\t' << est.n_obs << '\t'
          << fmt6(est.params.b) << '\t' << fmt6(est.params.a) << '\t'
          << fmt6(est.params.p) << '\t' << fmt6(est.params.kappa) << '\t'
          << fmt6(est.params.w) << '\t' << fmt6(est.loglik) << '\t'
          << (est.converged ? 1 : 0) << '\t' << fmt6(se[0]) << '\t'
          << fmt6(se[1]) << '\t' << fmt6(se[2]) << '\t' << fmt6(se[3]) << '\t'
          << (map_fit ? 1 : 0) << '\n';
    }
  }
  return out.str();
}

std::string export_raw_scores(const io::Project &p) {
  std::ostringstream out;
  out << "chr\tpos\tid\tref\talt\tbad\tsample\tref_count\talt_count"
         "\tpval_ref\tpval_alt\tes_ref\tes_alt\n";
  for (const auto &r : p.raw_scores) {
    const auto &s = p.snvs[r.snv];
    out << s.chr << '\t' << s.pos << '\t' << s.id << '\t' << s.ref << '\t'
        << s.alt << '\t' << fmt6(s.bad) << '\t' << r.sample << '\t' << r.x
        << '\t' << r.y << '\t' << io::format_pval(r.score.log_pval_ref)
        << '\t' << io::format_pval(r.score.log_pval_alt) << '\t'
        << fmt6(r.score.es_ref) << '\t' << fmt6(r.score.es_alt) << '\n';
  }
  return out.str();
}

// Benjamini-Hochberg on natural-log p-values; returns log-adjusted values.
std::vector<double> bh_adjust_log(const std::vector<double> &logp) {
  const size_t n = logp.size();
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i)
    order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return logp[a] < logp[b]; });
  std::vector<double> adj(n);
  double running = 0.0; // log of the cumulative minimum, from the largest p
  for (size_t k = n; k-- > 0;) {
    const size_t i = order[k];
    const double v = std::min(
        0.0, logp[i] + std::log(static_cast<double>(n) /
                                static_cast<double>(k + 1)));
    running = (k == n - 1) ? v : std::min(running, v);
    adj[i] = running;
  }
  return adj;
}

std::string export_scores(const io::Project &p) {
  std::ostringstream out;
  out << "chr\tpos\tid\tref\talt\tbad\tgroup\tn_obs\tpval_ref\tpval_alt"
         "\tes_ref\tes_alt\tfinal_pval\tfinal_pval_bh\tfinal_es"
         "\tfinal_side\n";
  // BH per group across SNVs
  std::map<std::string, std::vector<size_t>> by_group;
  for (size_t i = 0; i < p.combined.size(); ++i)
    by_group[p.combined[i].group].push_back(i);
  std::vector<double> bh(p.combined.size(), 0.0);
  for (const auto &[group, idxs] : by_group) {
    (void)group;
    std::vector<double> lp;
    lp.reserve(idxs.size());
    for (size_t i : idxs)
      lp.push_back(p.combined[i].record.log_final_pval);
    const auto adj = bh_adjust_log(lp);
    for (size_t k = 0; k < idxs.size(); ++k)
      bh[idxs[k]] = adj[k];
  }
  for (size_t i = 0; i < p.combined.size(); ++i) {
    const auto &c = p.combined[i];
    const auto &s = p.snvs[c.snv];
    const auto &r = c.record;
    out << s.chr << '\t' << s.pos << '\t' << s.id << '\t' << s.ref << '\t'
        << s.alt << '\t' << fmt6(s.bad) << '\t' << c.group << '\t' << c.n_obs
        << '\t' << io::format_pval(r.log_comb_pval_ref) << '\t'
        << io::format_pval(r.log_comb_pval_alt) << '\t'
        << fmt6(r.comb_es_ref) << '\t' << fmt6(r.comb_es_alt) << '\t'
        << io::format_pval(r.log_final_pval) << '\t'
        << io::format_pval(bh[i]) << '\t' << fmt6(r.final_es) << '\t'
        << (r.final_side == scoring::Side::Ref ? "ref" : "alt") << '\n';
  }
  return out.str();
}

std::string export_difftest(const io::Project &p) {
  std::ostringstream out;
  out << "chr\tpos\tid\tref\talt\tbad\tp_control\tp_test\tse_control"
         "\tse_test\tstatistic\tpval_side1\tpval_side2\tfinal_pval"
         "\tmethod\n";
  for (const auto &d : p.difftests) {
    const auto &s = p.snvs[d.snv];
    const auto &r = d.record;
    out << s.chr << '\t' << s.pos << '\t' << s.id << '\t' << s.ref << '\t'
        << s.alt << '\t' << fmt6(s.bad) << '\t' << fmt6(r.p_control) << '\t'
        << fmt6(r.p_test) << '\t' << fmt6(r.se_control) << '\t'
        << fmt6(r.se_test) << '\t' << fmt6(r.statistic) << '\t'
        << fmt6(r.pval_side1) << '\t' << fmt6(r.pval_side2) << '\t'
        << fmt6(r.final_pval) << '\t'
        << (r.method == difftest::Method::Wald ? "wald" : "lrt") << '\n';
  }
  return out.str();
}

int cmd_export(const Options &opt) {
  io::Project project = io::load_project(opt.base_dir, opt.name);
  fs::create_directories(opt.out_dir);
  const bool all = opt.what == "all";
  if (all || opt.what == "params")
    write_text((fs::path(opt.out_dir) / "params.tsv").string(),
               export_params(project));
  if (all || opt.what == "raw")
    write_text((fs::path(opt.out_dir) / "raw_scores.tsv").string(),
               export_raw_scores(project));
  if (all || opt.what == "scores")
    write_text((fs::path(opt.out_dir) / "scores.tsv").string(),
               export_scores(project));
  if (all || opt.what == "difftest")
    write_text((fs::path(opt.out_dir) / "difftest.tsv").string(),
               export_difftest(project));
  std::fprintf(stderr, "export: wrote %s tables to %s\n", opt.what.c_str(),
               opt.out_dir.c_str());
  return 0;
}

// ---- visualize -------------------------------------------------------------

struct VizRow {
  int orient = 0;
  double bad = 1.0;
  long fixed = 0;
  double observed_mean = 0.0;
  double fitted_mean = 0.0;
  long n_obs = 0;
};

std::vector<VizRow> viz_table(const io::Project &p) {
  std::vector<VizRow> rows;
  const auto parts = io::partitions(p);
  for (const auto &[key, table] : p.fits.estimates) {
    const auto part = parts.find(key);
    if (part == parts.end())
      continue;
    for (const auto &[fixed, est] : table) {
      if (!est.converged)
        continue;
      const auto rows_it = part->second.find(fixed);
      if (rows_it == part->second.end())
        continue;
      VizRow v;
      v.orient = key.first;
      v.bad = key.second;
      v.fixed = fixed;
      double sum = 0.0;
      long n = 0;
      for (const auto &[count, mult] : rows_it->second) {
        sum += static_cast<double>(count) * static_cast<double>(mult);
        n += mult;
      }
      if (n == 0)
        continue;
      v.observed_mean = sum / static_cast<double>(n);
      v.n_obs = n;
      try {
        const auto cm = scoring::conditional_mixture(est, p.settings.kind,
                                                     p.settings.l, fixed);
        v.fitted_mean = scoring::mixture_truncated_mean(cm);
      } catch (const Error &) {
        continue;
      }
      rows.push_back(v);
    }
  }
  return rows;
}

std::string viz_svg(const std::vector<VizRow> &rows) {
  double max_v = 1.0;
  for (const auto &r : rows)
    max_v = std::max({max_v, static_cast<double>(r.fixed), r.observed_mean,
                      r.fitted_mean});
  const double w = 640.0, h = 640.0, margin = 60.0;
  auto sx = [&](double v) { return margin + v / max_v * (w - 2 * margin); };
  auto sy = [&](double v) {
    return h - margin - v / max_v * (h - 2 * margin);
  };
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w
      << "\" height=\"" << h << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<line x1=\"" << sx(0) << "\" y1=\"" << sy(0) << "\" x2=\""
      << sx(max_v) << "\" y2=\"" << sy(max_v)
      << "\" stroke=\"#cccccc\" stroke-dasharray=\"4\"/>\n"
      << "<text x=\"" << w / 2
      << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
         "fitted vs observed conditional means</text>\n";
  for (const auto &r : rows) {
    const char *color = r.orient == 0 ? "#1f77b4" : "#d62728";
    out << "<circle cx=\"" << fmt6(sx(r.observed_mean)) << "\" cy=\""
        << fmt6(sy(r.fitted_mean)) << "\" r=\"3\" fill=\"" << color
        << "\" fill-opacity=\"0.6\"/>\n";
  }
  out << "<text x=\"" << w / 2 << "\" y=\"" << h - 15
      << "\" text-anchor=\"middle\" font-size=\"12\">observed mean</text>\n"
      << "<text x=\"15\" y=\"" << h / 2
      << "\" font-size=\"12\" transform=\"rotate(-90 15 " << h / 2
      << ")\" text-anchor=\"middle\">fitted mean</text>\n</svg>\n";
  return out.str();
}

int cmd_visualize(const Options &opt) {
  io::Project project = io::load_project(opt.base_dir, opt.name);
  if (!project.settings.fitted)
    throw MissingEstimate("visualize: project has no fitted models");
  fs::create_directories(opt.out_dir);
  const auto rows = viz_table(project);
  std::ostringstream tsv;
  tsv << "orientation\tbad\tfixed\tn_obs\tobserved_mean\tfitted_mean\n";
  for (const auto &r : rows)
    tsv << (r.orient == 0 ? "ref_given_alt" : "alt_given_ref") << '\t'
        << fmt6(r.bad) << '\t' << r.fixed << '\t' << r.n_obs << '\t'
        << fmt6(r.observed_mean) << '\t' << fmt6(r.fitted_mean) << '\n';
  write_text((fs::path(opt.out_dir) / "fit_diagnostics.tsv").string(),
             tsv.str());
  write_text((fs::path(opt.out_dir) / "fit_diagnostics.svg").string(),
             viz_svg(rows));
  std::fprintf(stderr, "visualize: %zu windows plotted\n", rows.size());
  return 0;
}

// ---- reproduce -------------------------------------------------------------

int cmd_reproduce(const Options &opt) {
  std::ifstream in(opt.log_path);
  if (!in)
    throw ParseError("cannot open log: " + opt.log_path);
  nlohmann::json root;
  try {
    in >> root;
  } catch (const nlohmann::json::exception &e) {
    throw ParseError(std::string("log parse failure: ") + e.what());
  }
  if (!root.contains("commands"))
    throw ParseError("log lacks a commands array");
  for (const auto &entry : root["commands"]) {
    const auto inputs =
        entry["inputs"].get<std::map<std::string, std::string>>();
    for (const auto &[path, hash] : inputs)
      if (io::hash_file(path) != hash)
        throw HashMismatch("input content changed: " + path);
    std::vector<std::string> args =
        entry["args"].get<std::vector<std::string>>();
    std::fprintf(stderr, "reproduce: replaying '%s'\n",
                 entry["verb"].get<std::string>().c_str());
    const int rc = dispatch(args);
    if (rc != 0)
      return rc;
  }
  return 0;
}

// ---- argument parsing ------------------------------------------------------

int dispatch(const std::vector<std::string> &argv) {
  Options opt;
  CLI::App app{"Allelic-imbalance caller: left-truncated count mixtures, "
               "extended-precision scoring and differential tests"};
  app.require_subcommand(1);

  auto *create = app.add_subcommand(
      "create", "Ingest count files into a new project store");
  create->add_option("name", opt.name, "Project name")->required();
  create
      ->add_option("inputs", opt.inputs,
                   "Input files or directories of files")
      ->required();
  create->add_option("--format", opt.format, "Input format")
      ->check(CLI::IsMember({"tsv", "vcf"}))
      ->capture_default_str();
  create->add_option("--bad", opt.bad_path,
                     "BAD annotation (chr/start/end/bad intervals)");
  create->add_option("--truncation", opt.trunc_l, "Left-truncation threshold")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  create
      ->add_option("--window-size", opt.window_m,
                   "Minimum observations per window")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  create->add_option("--dir", opt.base_dir, "Project base directory")
      ->capture_default_str();

  auto *fitc = app.add_subcommand("fit", "Fit window models");
  fitc->add_option("name", opt.name, "Project name")->required();
  fitc->add_option("model", opt.model, "Model kind")
      ->check(CLI::IsMember({"NB", "BetaNB", "MCNB"}))
      ->required();
  fitc->add_option("--alpha", opt.alpha,
                   "Concentration regularization strength")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  auto *fw = fitc->add_option("--window-size", opt.window_m,
                              "Minimum observations per window")
                 ->check(CLI::PositiveNumber);
  auto *ft = fitc->add_option("--truncation", opt.trunc_l,
                              "Left-truncation threshold")
                 ->check(CLI::PositiveNumber);
  fitc->add_flag("--std-errors", opt.std_errors,
                 "Estimate standard errors from observed information");
  fitc->add_option("--dir", opt.base_dir, "Project base directory")
      ->capture_default_str();

  auto *test = app.add_subcommand("test", "Score all observations");
  test->add_option("name", opt.name, "Project name")->required();
  test->add_option("--dir", opt.base_dir, "Project base directory")
      ->capture_default_str();

  auto *combine =
      app.add_subcommand("combine", "Combine scores across a sample group");
  combine->add_option("name", opt.name, "Project name")->required();
  combine->add_option("group", opt.group_file,
                      "Group file: sample names or glob patterns, one per "
                      "line (default: every sample)");
  combine->add_option("--group-name", opt.group_name,
                      "Group label for the default all-samples group")
      ->capture_default_str();
  combine->add_option("--dir", opt.base_dir, "Project base directory")
      ->capture_default_str();

  auto *diff = app.add_subcommand(
      "difftest", "Differential allele-specificity between two groups");
  diff->add_option("name", opt.name, "Project name")->required();
  diff->add_option("control", opt.control_file, "Control group file")
      ->required();
  diff->add_option("test", opt.test_file, "Test group file")->required();
  diff->add_option("--method", opt.method, "Test statistic")
      ->check(CLI::IsMember({"wald", "lrt"}))
      ->capture_default_str();
  diff->add_option("--dir", opt.base_dir, "Project base directory")
      ->capture_default_str();

  auto *exp = app.add_subcommand("export", "Write result tables");
  exp->add_option("what", opt.what, "Table selection")
      ->check(CLI::IsMember({"all", "scores", "params", "difftest", "raw"}))
      ->required();
  exp->add_option("name", opt.name, "Project name")->required();
  exp->add_option("out_dir", opt.out_dir, "Output directory")->required();
  exp->add_option("--dir", opt.base_dir, "Project base directory")
      ->capture_default_str();

  auto *viz =
      app.add_subcommand("visualize", "Emit fit-vs-data diagnostic plots");
  viz->add_option("name", opt.name, "Project name")->required();
  viz->add_option("out_dir", opt.out_dir, "Output directory")->required();
  viz->add_option("--dir", opt.base_dir, "Project base directory")
      ->capture_default_str();

  auto *rep =
      app.add_subcommand("reproduce", "Replay a recorded command log");
  rep->add_option("log", opt.log_path, "Path to reproduce.json")->required();

  try {
    app.parse(std::vector<std::string>(argv.rbegin(), argv.rend()));
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    app.exit(e);
    return 2;
  }
  opt.fit_has_window = fw->count() > 0;
  opt.fit_has_trunc = ft->count() > 0;

  if (create->parsed())
    return cmd_create(opt, argv);
  if (fitc->parsed())
    return cmd_fit(opt, argv);
  if (test->parsed())
    return cmd_test(opt, argv);
  if (combine->parsed())
    return cmd_combine(opt, argv);
  if (diff->parsed())
    return cmd_difftest(opt, argv);
  if (exp->parsed())
    return cmd_export(opt);
  if (viz->parsed())
    return cmd_visualize(opt);
  if (rep->parsed())
    return cmd_reproduce(opt);
  return 2;
}

} // namespace

int main(int argc, char **argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    return dispatch(args);
  } catch (const UsageError &e) {
    std::fprintf(stderr, "usage-error\t%s\n", e.what());
    return 2;
  } catch (const Error &e) {
    std::fprintf(stderr, "error\t%s\n", e.what());
    return 1;
  } catch (const std::exception &e) {
    std::fprintf(stderr, "error\t%s\n", e.what());
    return 1;
  }
}
