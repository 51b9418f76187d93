#include "aimix/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace aimix::io {

namespace {

constexpr int kFormatVersion = 1;

std::string read_file(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw ParseError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string &path, const std::string &content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw ParseError("cannot write file: " + path);
  out << content;
}

std::vector<std::string> split(const std::string &line, char sep) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    const size_t pos = line.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

long parse_long(const std::string &s, const std::string &ctx) {
  try {
    size_t used = 0;
    const long v = std::stol(s, &used);
    if (used != s.size())
      throw std::invalid_argument(s);
    return v;
  } catch (const std::exception &) {
    throw ParseError("bad integer '" + s + "' " + ctx);
  }
}

double parse_double(const std::string &s, const std::string &ctx) {
  if (s == "-")
    return std::numeric_limits<double>::quiet_NaN();
  char *end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0')
    throw ParseError("bad number '" + s + "' " + ctx);
  return v;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_opt(double v) { return std::isnan(v) ? "-" : fmt(v); }

std::string file_stem(const std::string &path) {
  return fs::path(path).stem().string();
}

bool d_eq(double a, double b) {
  return (std::isnan(a) && std::isnan(b)) || a == b;
}

double snv_bad(const std::vector<SnvRecord> &snvs, long idx) {
  return snvs[static_cast<size_t>(idx)].bad;
}

struct PendingObs {
  std::string sample;
  long x = 0, y = 0;
};

// One parsed record before SNV-index assignment.
struct PendingRecord {
  SnvRecord snv;
  PendingObs obs;
};

void parse_tsv(const std::string &path, std::vector<PendingRecord> &out,
               IngestStats &stats) {
  const std::string sample = file_stem(path);
  std::istringstream in(read_file(path));
  std::string line;
  long lineno = 0;
  const std::vector<std::string> expected = {"chr", "pos",       "id",
                                             "ref", "alt",       "ref_count",
                                             "alt_count"};
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line.empty())
      continue;
    const auto cols = split(line, '\t');
    const std::string ctx =
        "at " + path + ":" + std::to_string(lineno);
    if (!have_header) {
      if (cols != expected)
        throw ParseError("missing or malformed header " + ctx);
      have_header = true;
      continue;
    }
    if (cols.size() != expected.size())
      throw ParseError("wrong column count " + ctx);
    if (cols[3].size() != 1 || cols[4].size() != 1)
      throw ParseError("alleles must be single bases " + ctx);
    PendingRecord rec;
    rec.snv.chr = cols[0];
    rec.snv.pos = parse_long(cols[1], ctx);
    rec.snv.id = cols[2];
    rec.snv.ref = cols[3][0];
    rec.snv.alt = cols[4][0];
    rec.obs.sample = sample;
    rec.obs.x = parse_long(cols[5], ctx);
    rec.obs.y = parse_long(cols[6], ctx);
    if (rec.snv.pos < 1 || rec.obs.x < 0 || rec.obs.y < 0 ||
        rec.snv.ref == rec.snv.alt)
      throw ParseError("invalid record " + ctx);
    ++stats.parsed;
    out.push_back(std::move(rec));
  }
  if (!have_header)
    throw ParseError("empty input file: " + path);
}

void parse_vcf_like(const std::string &path, std::vector<PendingRecord> &out,
                    IngestStats &stats) {
  std::istringstream in(read_file(path));
  std::string line;
  long lineno = 0;
  std::vector<std::string> samples;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line.empty() || (line.size() >= 2 && line[0] == '#' && line[1] == '#'))
      continue;
    const std::string ctx = "at " + path + ":" + std::to_string(lineno);
    const auto cols = split(line, '\t');
    if (!have_header) {
      if (cols.size() < 10 || cols[0] != "#CHROM")
        throw ParseError("missing #CHROM header with samples " + ctx);
      samples.assign(cols.begin() + 9, cols.end());
      have_header = true;
      continue;
    }
    if (cols.size() != 9 + samples.size())
      throw ParseError("wrong column count " + ctx);
    if (cols[3].size() != 1 || cols[4].size() != 1)
      throw ParseError("multi-allelic records unsupported " + ctx);
    const auto fmt_keys = split(cols[8], ':');
    const auto ad_it = std::find(fmt_keys.begin(), fmt_keys.end(), "AD");
    if (ad_it == fmt_keys.end())
      throw MissingField("no AD field in FORMAT " + ctx);
    const size_t ad_idx =
        static_cast<size_t>(ad_it - fmt_keys.begin());
    for (size_t s = 0; s < samples.size(); ++s) {
      const auto values = split(cols[9 + s], ':');
      if (ad_idx >= values.size())
        throw MissingField("sample lacks AD value " + ctx);
      const auto ad = split(values[ad_idx], ',');
      if (ad.size() < 2)
        throw MissingField("AD must hold ref,alt depths " + ctx);
      PendingRecord rec;
      rec.snv.chr = cols[0];
      rec.snv.pos = parse_long(cols[1], ctx);
      rec.snv.id = cols[2];
      rec.snv.ref = cols[3][0];
      rec.snv.alt = cols[4][0];
      rec.obs.sample = samples[s];
      rec.obs.x = parse_long(ad[0], ctx);
      rec.obs.y = parse_long(ad[1], ctx);
      if (rec.snv.pos < 1 || rec.snv.ref == rec.snv.alt)
        throw ParseError("invalid record " + ctx);
      ++stats.parsed;
      out.push_back(std::move(rec));
    }
  }
  if (!have_header)
    throw ParseError("empty input file: " + path);
}

double lookup_bad(const std::optional<BadMap> &bad_map,
                  const std::string &chr, long pos, IngestStats &stats) {
  if (bad_map) {
    const auto it = bad_map->find(chr);
    if (it != bad_map->end()) {
      const long zero_based = pos - 1;
      for (const auto &iv : it->second)
        if (iv.start <= zero_based && zero_based < iv.end)
          return iv.bad;
    }
  }
  ++stats.unannotated;
  return 1.0;
}

std::string orientation_name(int o) {
  return o == 0 ? "ref_given_alt" : "alt_given_ref";
}

int orientation_from_name(const std::string &s, const std::string &ctx) {
  if (s == "ref_given_alt")
    return 0;
  if (s == "alt_given_ref")
    return 1;
  throw ParseError("unknown orientation '" + s + "' " + ctx);
}

std::string kind_name(distcore::Kind k) {
  switch (k) {
  case distcore::Kind::NB:
    return "NB";
  case distcore::Kind::BetaNB:
    return "BetaNB";
  default:
    return "MCNB";
  }
}

distcore::Kind kind_from_name(const std::string &s) {
  if (s == "NB")
    return distcore::Kind::NB;
  if (s == "BetaNB")
    return distcore::Kind::BetaNB;
  if (s == "MCNB")
    return distcore::Kind::MCNB;
  throw ParseError("unknown model kind '" + s + "'");
}

fit::FitSettings fit_settings_of(const ProjectSettings &ps) {
  fit::FitSettings st;
  st.kind = ps.kind;
  st.window_size = ps.m;
  st.l = ps.l;
  st.regul_alpha = ps.alpha;
  st.compute_se = ps.std_errors;
  return st;
}

// ---- table renderers -------------------------------------------------------

std::string render_snvs(const Project &p) {
  std::ostringstream out;
  out << "idx\tchr\tpos\tid\tref\talt\tbad\n";
  for (size_t i = 0; i < p.snvs.size(); ++i) {
    const auto &s = p.snvs[i];
    out << i << '\t' << s.chr << '\t' << s.pos << '\t' << s.id << '\t'
        << s.ref << '\t' << s.alt << '\t' << fmt(s.bad) << '\n';
  }
  return out.str();
}

std::string render_observations(const Project &p) {
  std::ostringstream out;
  out << "snv\tsample\tref_count\talt_count\tmult\n";
  for (const auto &o : p.observations)
    out << o.snv << '\t' << o.sample << '\t' << o.x << '\t' << o.y << '\t'
        << o.mult << '\n';
  return out.str();
}

std::string render_estimates(const Project &p) {
  std::ostringstream out;
  out << "orientation\tbad\tfixed\tlo\thi\tn_obs\tb\ta\tp\tkappa\tw\tloglik"
         "\tconverged\tw_fixed\tse_b\tse_a\tse_kappa\tse_w\n";
  for (const auto &[key, table] : p.fits.estimates) {
    const auto names = fit::free_names(p.settings.kind, true);
    for (const auto &[fixed, est] : table) {
      (void)fixed;
      out << orientation_name(key.first) << '\t' << fmt(key.second) << '\t'
          << est.fixed_value << '\t' << est.lo << '\t' << est.hi << '\t'
          << est.n_obs << '\t' << fmt(est.params.b) << '\t'
          << fmt(est.params.a) << '\t' << fmt(est.params.p) << '\t'
          << fmt(est.params.kappa) << '\t' << fmt(est.params.w) << '\t'
          << fmt(est.loglik) << '\t' << (est.converged ? 1 : 0) << '\t'
          << (est.w_fixed ? 1 : 0);
      // fixed 4-column SE layout: b, a, kappa, w
      double se[4] = {std::numeric_limits<double>::quiet_NaN(),
                      std::numeric_limits<double>::quiet_NaN(),
                      std::numeric_limits<double>::quiet_NaN(),
                      std::numeric_limits<double>::quiet_NaN()};
      const auto fns = fit::free_names(p.settings.kind, !est.w_fixed);
      for (size_t i = 0;
           i < est.std_errors.size() && i < fns.size(); ++i) {
        if (fns[i] == "b")
          se[0] = est.std_errors[i];
        else if (fns[i] == "a")
          se[1] = est.std_errors[i];
        else if (fns[i] == "kappa")
          se[2] = est.std_errors[i];
        else
          se[3] = est.std_errors[i];
      }
      for (double v : se)
        out << '\t' << fmt_opt(v);
      out << '\n';
      (void)names;
    }
  }
  return out.str();
}

std::string render_raw_scores(const Project &p) {
  std::ostringstream out;
  out << "snv\tsample\tref_count\talt_count\tmult\tlog_pval_ref\tlog_pval_alt"
         "\tes_ref\tes_alt\n";
  for (const auto &r : p.raw_scores)
    out << r.snv << '\t' << r.sample << '\t' << r.x << '\t' << r.y << '\t'
        << r.mult << '\t' << fmt(r.score.log_pval_ref) << '\t'
        << fmt(r.score.log_pval_alt) << '\t' << fmt_opt(r.score.es_ref)
        << '\t' << fmt_opt(r.score.es_alt) << '\n';
  return out.str();
}

std::string render_combined(const Project &p) {
  std::ostringstream out;
  out << "snv\tgroup\tn_obs\tlog_comb_pval_ref\tlog_comb_pval_alt"
         "\tcomb_es_ref\tcomb_es_alt\tlog_final_pval\tfinal_es\tfinal_side"
         "\tes_ref_degenerate\tes_alt_degenerate\n";
  for (const auto &c : p.combined) {
    const auto &r = c.record;
    out << c.snv << '\t' << c.group << '\t' << c.n_obs << '\t'
        << fmt(r.log_comb_pval_ref) << '\t' << fmt(r.log_comb_pval_alt)
        << '\t' << fmt(r.comb_es_ref) << '\t' << fmt(r.comb_es_alt) << '\t'
        << fmt(r.log_final_pval) << '\t' << fmt(r.final_es) << '\t'
        << (r.final_side == scoring::Side::Ref ? "ref" : "alt") << '\t'
        << (r.es_ref_degenerate ? 1 : 0) << '\t'
        << (r.es_alt_degenerate ? 1 : 0) << '\n';
  }
  return out.str();
}

std::string render_difftests(const Project &p) {
  std::ostringstream out;
  out << "snv\tp_control\tp_test\tse_control\tse_test\tstatistic"
         "\tpval_side1\tpval_side2\tfinal_pval\tmethod\n";
  for (const auto &d : p.difftests) {
    const auto &r = d.record;
    out << d.snv << '\t' << fmt(r.p_control) << '\t' << fmt(r.p_test) << '\t'
        << fmt_opt(r.se_control) << '\t' << fmt_opt(r.se_test) << '\t'
        << fmt(r.statistic) << '\t' << fmt(r.pval_side1) << '\t'
        << fmt(r.pval_side2) << '\t' << fmt(r.final_pval) << '\t'
        << (r.method == difftest::Method::Wald ? "wald" : "lrt") << '\n';
  }
  return out.str();
}

std::string render_reproduce(const Project &p) {
  json commands = json::array();
  for (const auto &e : p.log) {
    json entry;
    entry["verb"] = e.verb;
    entry["args"] = e.args;
    entry["inputs"] = e.input_hashes;
    commands.push_back(entry);
  }
  json root;
  root["version"] = kFormatVersion;
  root["commands"] = commands;
  return root.dump(2) + "\n";
}

// ---- table parsers ---------------------------------------------------------

std::vector<std::vector<std::string>> parse_table(const std::string &text,
                                                  const std::string &header,
                                                  const std::string &name) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != header)
    throw CorruptStore("bad header in " + name);
  const size_t ncols = split(header, '\t').size();
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty())
      continue;
    auto cols = split(line, '\t');
    if (cols.size() != ncols)
      throw CorruptStore("bad row in " + name);
    rows.push_back(std::move(cols));
  }
  return rows;
}

} // namespace

bool Project::operator==(const Project &o) const {
  if (name != o.name || settings.l != o.settings.l ||
      settings.m != o.settings.m || settings.kind != o.settings.kind ||
      !d_eq(settings.alpha, o.settings.alpha) ||
      settings.fitted != o.settings.fitted ||
      settings.std_errors != o.settings.std_errors)
    return false;
  if (snvs.size() != o.snvs.size() ||
      observations.size() != o.observations.size() ||
      raw_scores.size() != o.raw_scores.size() ||
      combined.size() != o.combined.size() ||
      difftests.size() != o.difftests.size() || log.size() != o.log.size())
    return false;
  for (size_t i = 0; i < snvs.size(); ++i) {
    const auto &a = snvs[i];
    const auto &b = o.snvs[i];
    if (a.chr != b.chr || a.pos != b.pos || a.id != b.id || a.ref != b.ref ||
        a.alt != b.alt || !d_eq(a.bad, b.bad))
      return false;
  }
  for (size_t i = 0; i < observations.size(); ++i) {
    const auto &a = observations[i];
    const auto &b = o.observations[i];
    if (a.snv != b.snv || a.sample != b.sample || a.x != b.x || a.y != b.y ||
        a.mult != b.mult)
      return false;
  }
  if (fits.estimates.size() != o.fits.estimates.size())
    return false;
  for (auto ita = fits.estimates.begin(), itb = o.fits.estimates.begin();
       ita != fits.estimates.end(); ++ita, ++itb) {
    if (ita->first != itb->first || ita->second.size() != itb->second.size())
      return false;
    for (auto ea = ita->second.begin(), eb = itb->second.begin();
         ea != ita->second.end(); ++ea, ++eb) {
      const auto &a = ea->second;
      const auto &b = eb->second;
      if (ea->first != eb->first || a.fixed_value != b.fixed_value ||
          a.lo != b.lo || a.hi != b.hi || a.n_obs != b.n_obs ||
          !d_eq(a.params.b, b.params.b) || !d_eq(a.params.a, b.params.a) ||
          !d_eq(a.params.p, b.params.p) ||
          !d_eq(a.params.kappa, b.params.kappa) ||
          !d_eq(a.params.w, b.params.w) || !d_eq(a.loglik, b.loglik) ||
          a.converged != b.converged || a.w_fixed != b.w_fixed ||
          a.std_errors.size() != b.std_errors.size())
        return false;
      for (size_t i = 0; i < a.std_errors.size(); ++i)
        if (!d_eq(a.std_errors[i], b.std_errors[i]))
          return false;
    }
  }
  for (size_t i = 0; i < raw_scores.size(); ++i) {
    const auto &a = raw_scores[i];
    const auto &b = o.raw_scores[i];
    if (a.snv != b.snv || a.sample != b.sample || a.x != b.x || a.y != b.y ||
        a.mult != b.mult || !d_eq(a.score.log_pval_ref, b.score.log_pval_ref) ||
        !d_eq(a.score.log_pval_alt, b.score.log_pval_alt) ||
        !d_eq(a.score.es_ref, b.score.es_ref) ||
        !d_eq(a.score.es_alt, b.score.es_alt))
      return false;
  }
  for (size_t i = 0; i < combined.size(); ++i) {
    const auto &a = combined[i];
    const auto &b = o.combined[i];
    if (a.snv != b.snv || a.group != b.group || a.n_obs != b.n_obs ||
        !d_eq(a.record.log_comb_pval_ref, b.record.log_comb_pval_ref) ||
        !d_eq(a.record.log_comb_pval_alt, b.record.log_comb_pval_alt) ||
        !d_eq(a.record.comb_es_ref, b.record.comb_es_ref) ||
        !d_eq(a.record.comb_es_alt, b.record.comb_es_alt) ||
        !d_eq(a.record.log_final_pval, b.record.log_final_pval) ||
        !d_eq(a.record.final_es, b.record.final_es) ||
        a.record.final_side != b.record.final_side ||
        a.record.es_ref_degenerate != b.record.es_ref_degenerate ||
        a.record.es_alt_degenerate != b.record.es_alt_degenerate)
      return false;
  }
  for (size_t i = 0; i < difftests.size(); ++i) {
    const auto &a = difftests[i];
    const auto &b = o.difftests[i];
    if (a.snv != b.snv || !d_eq(a.record.p_control, b.record.p_control) ||
        !d_eq(a.record.p_test, b.record.p_test) ||
        !d_eq(a.record.se_control, b.record.se_control) ||
        !d_eq(a.record.se_test, b.record.se_test) ||
        !d_eq(a.record.statistic, b.record.statistic) ||
        !d_eq(a.record.pval_side1, b.record.pval_side1) ||
        !d_eq(a.record.pval_side2, b.record.pval_side2) ||
        !d_eq(a.record.final_pval, b.record.final_pval) ||
        a.record.method != b.record.method)
      return false;
  }
  for (size_t i = 0; i < log.size(); ++i)
    if (log[i].verb != o.log[i].verb || log[i].args != o.log[i].args ||
        log[i].input_hashes != o.log[i].input_hashes)
      return false;
  return true;
}

BadMap load_bad_map(const std::string &path) {
  BadMap out;
  std::istringstream in(read_file(path));
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line.empty() || line[0] == '#')
      continue;
    const std::string ctx = "at " + path + ":" + std::to_string(lineno);
    const auto cols = split(line, '\t');
    if (cols.size() != 4)
      throw ParseError("expected chr/start/end/bad " + ctx);
    BadInterval iv;
    iv.start = parse_long(cols[1], ctx);
    iv.end = parse_long(cols[2], ctx);
    iv.bad = parse_double(cols[3], ctx);
    if (iv.start < 0 || iv.end <= iv.start || !(iv.bad >= 1.0))
      throw ParseError("invalid interval " + ctx);
    out[cols[0]].push_back(iv);
  }
  for (auto &[chr, ivs] : out) {
    std::sort(ivs.begin(), ivs.end(),
              [](const BadInterval &a, const BadInterval &b) {
                return a.start < b.start;
              });
    for (size_t i = 1; i < ivs.size(); ++i)
      if (ivs[i].start < ivs[i - 1].end)
        throw AnnotationConflict("overlapping BAD intervals on " + chr);
  }
  return out;
}

IngestStats ingest(Project &project, const std::vector<std::string> &paths,
                   Format format, const std::optional<BadMap> &bad_map) {
  if (paths.empty())
    throw EmptyDataset("ingest: no input files");
  IngestStats stats;
  std::vector<PendingRecord> pending;
  for (const auto &path : paths) {
    if (format == Format::Tsv)
      parse_tsv(path, pending, stats);
    else
      parse_vcf_like(path, pending, stats);
  }

  const long l = project.settings.l;
  // key: (chr, pos, id, ref, alt)
  std::map<std::tuple<std::string, long, std::string, char, char>, SnvRecord>
      snv_set;
  std::map<std::tuple<std::string, long, std::string, char, char>,
           std::map<std::tuple<std::string, long, long>, long>>
      obs_set;
  // start from existing content so repeated ingests merge
  for (size_t i = 0; i < project.snvs.size(); ++i) {
    const auto &s = project.snvs[i];
    snv_set[{s.chr, s.pos, s.id, s.ref, s.alt}] = s;
  }
  for (const auto &o : project.observations) {
    const auto &s = project.snvs[static_cast<size_t>(o.snv)];
    obs_set[{s.chr, s.pos, s.id, s.ref, s.alt}][{o.sample, o.x, o.y}] +=
        o.mult;
  }

  for (auto &rec : pending) {
    if (rec.obs.x == 0 || rec.obs.y == 0) {
      ++stats.dropped_homozygous;
      continue;
    }
    if (rec.obs.x < l || rec.obs.y < l) {
      ++stats.dropped_below_l;
      continue;
    }
    rec.snv.bad = lookup_bad(bad_map, rec.snv.chr, rec.snv.pos, stats);
    const std::tuple<std::string, long, std::string, char, char> key{
        rec.snv.chr, rec.snv.pos, rec.snv.id, rec.snv.ref, rec.snv.alt};
    snv_set.emplace(key, rec.snv);
    obs_set[key][{rec.obs.sample, rec.obs.x, rec.obs.y}] += 1;
  }
  if (snv_set.empty())
    throw EmptyDataset("ingest: no records survive filtering");

  project.snvs.clear();
  project.observations.clear();
  std::map<std::tuple<std::string, long, std::string, char, char>, long>
      index_of;
  for (const auto &[key, snv] : snv_set) {
    index_of[key] = static_cast<long>(project.snvs.size());
    project.snvs.push_back(snv);
  }
  for (const auto &[key, obs_map] : obs_set) {
    const long idx = index_of.at(key);
    for (const auto &[okey, mult] : obs_map) {
      Observation o;
      o.snv = idx;
      o.sample = std::get<0>(okey);
      o.x = std::get<1>(okey);
      o.y = std::get<2>(okey);
      o.mult = mult;
      project.observations.push_back(std::move(o));
    }
  }
  return stats;
}

fit::PartitionMap partitions(const Project &project) {
  // (orientation, bad) -> fixed -> variable -> mult
  std::map<fit::PartitionKey, std::map<long, std::map<long, long>>> agg;
  for (const auto &o : project.observations) {
    const double bad = snv_bad(project.snvs, o.snv);
    agg[{0, bad}][o.y][o.x] += o.mult;
    agg[{1, bad}][o.x][o.y] += o.mult;
  }
  fit::PartitionMap out;
  for (const auto &[key, fixed_map] : agg) {
    auto &idx = out[key];
    for (const auto &[fixed, counts] : fixed_map) {
      auto &rows = idx[fixed];
      rows.reserve(counts.size());
      for (const auto &[count, mult] : counts)
        rows.emplace_back(count, mult);
    }
  }
  return out;
}

std::string store_dir(const std::string &base_dir, const std::string &name) {
  return (fs::path(base_dir) / (name + ".mixproj")).string();
}

void save_project(const Project &project, const std::string &base_dir) {
  const std::string dir = store_dir(base_dir, project.name);
  fs::create_directories(dir);
  const std::map<std::string, std::string> tables = {
      {"snvs.tsv", render_snvs(project)},
      {"observations.tsv", render_observations(project)},
      {"estimates.tsv", render_estimates(project)},
      {"raw_scores.tsv", render_raw_scores(project)},
      {"scores.tsv", render_combined(project)},
      {"difftest.tsv", render_difftests(project)},
      {"reproduce.json", render_reproduce(project)},
  };
  json manifest;
  manifest["format_version"] = kFormatVersion;
  manifest["name"] = project.name;
  manifest["settings"] = {
      {"l", project.settings.l},
      {"m", project.settings.m},
      {"kind", kind_name(project.settings.kind)},
      {"alpha", project.settings.alpha},
      {"fitted", project.settings.fitted},
      {"std_errors", project.settings.std_errors},
  };
  json jt;
  for (const auto &[file, content] : tables) {
    write_file((fs::path(dir) / file).string(), content);
    jt[file] = {{"fnv1a", hash_bytes(content)}, {"bytes", content.size()}};
  }
  manifest["tables"] = jt;
  write_file((fs::path(dir) / "manifest.json").string(),
             manifest.dump(2) + "\n");
}

Project load_project(const std::string &base_dir, const std::string &name) {
  const std::string dir = store_dir(base_dir, name);
  if (!fs::exists(fs::path(dir) / "manifest.json"))
    throw CorruptStore("no manifest in " + dir);
  json manifest;
  try {
    manifest = json::parse(read_file((fs::path(dir) / "manifest.json").string()));
  } catch (const json::exception &e) {
    throw CorruptStore(std::string("manifest parse failure: ") + e.what());
  }
  if (!manifest.contains("format_version") ||
      manifest["format_version"].get<int>() != kFormatVersion)
    throw VersionMismatch("unsupported store format version");

  Project p;
  p.name = manifest["name"].get<std::string>();
  const auto &js = manifest["settings"];
  p.settings.l = js["l"].get<long>();
  p.settings.m = js["m"].get<long>();
  p.settings.kind = kind_from_name(js["kind"].get<std::string>());
  p.settings.alpha = js["alpha"].get<double>();
  p.settings.fitted = js["fitted"].get<bool>();
  p.settings.std_errors = js["std_errors"].get<bool>();
  p.fits.settings = fit_settings_of(p.settings);

  std::map<std::string, std::string> tables;
  for (const auto &[file, meta] : manifest["tables"].items()) {
    const std::string content = read_file((fs::path(dir) / file).string());
    if (hash_bytes(content) != meta["fnv1a"].get<std::string>())
      throw CorruptStore("checksum mismatch for " + file);
    tables[file] = content;
  }

  for (const auto &row :
       parse_table(tables.at("snvs.tsv"), "idx\tchr\tpos\tid\tref\talt\tbad",
                   "snvs.tsv")) {
    SnvRecord s;
    s.chr = row[1];
    s.pos = parse_long(row[2], "in snvs.tsv");
    s.id = row[3];
    s.ref = row[4].at(0);
    s.alt = row[5].at(0);
    s.bad = parse_double(row[6], "in snvs.tsv");
    p.snvs.push_back(std::move(s));
  }
  for (const auto &row :
       parse_table(tables.at("observations.tsv"),
                   "snv\tsample\tref_count\talt_count\tmult",
                   "observations.tsv")) {
    Observation o;
    o.snv = parse_long(row[0], "in observations.tsv");
    o.sample = row[1];
    o.x = parse_long(row[2], "in observations.tsv");
    o.y = parse_long(row[3], "in observations.tsv");
    o.mult = parse_long(row[4], "in observations.tsv");
    p.observations.push_back(std::move(o));
  }
  for (const auto &row : parse_table(
           tables.at("estimates.tsv"),
           "orientation\tbad\tfixed\tlo\thi\tn_obs\tb\ta\tp\tkappa\tw\tloglik"
           "\tconverged\tw_fixed\tse_b\tse_a\tse_kappa\tse_w",
           "estimates.tsv")) {
    const int orient = orientation_from_name(row[0], "in estimates.tsv");
    const double bad = parse_double(row[1], "in estimates.tsv");
    fit::WindowEstimate est;
    est.fixed_value = parse_long(row[2], "in estimates.tsv");
    est.lo = parse_long(row[3], "in estimates.tsv");
    est.hi = parse_long(row[4], "in estimates.tsv");
    est.n_obs = parse_long(row[5], "in estimates.tsv");
    est.params.b = parse_double(row[6], "in estimates.tsv");
    est.params.a = parse_double(row[7], "in estimates.tsv");
    est.params.p = parse_double(row[8], "in estimates.tsv");
    est.params.kappa = parse_double(row[9], "in estimates.tsv");
    est.params.w = parse_double(row[10], "in estimates.tsv");
    est.loglik = parse_double(row[11], "in estimates.tsv");
    est.converged = row[12] == "1";
    est.w_fixed = row[13] == "1";
    const double se_b = parse_double(row[14], "in estimates.tsv");
    const double se_a = parse_double(row[15], "in estimates.tsv");
    const double se_k = parse_double(row[16], "in estimates.tsv");
    const double se_w = parse_double(row[17], "in estimates.tsv");
    const bool any_se = !(std::isnan(se_b) && std::isnan(se_a) &&
                          std::isnan(se_k) && std::isnan(se_w));
    if (any_se || (est.converged && p.settings.std_errors)) {
      est.std_errors.push_back(se_b);
      est.std_errors.push_back(se_a);
      if (p.settings.kind == distcore::Kind::BetaNB)
        est.std_errors.push_back(se_k);
      if (!est.w_fixed)
        est.std_errors.push_back(se_w);
    }
    p.fits.estimates[{orient, bad}].emplace(est.fixed_value, std::move(est));
  }
  for (const auto &row : parse_table(
           tables.at("raw_scores.tsv"),
           "snv\tsample\tref_count\talt_count\tmult\tlog_pval_ref"
           "\tlog_pval_alt\tes_ref\tes_alt",
           "raw_scores.tsv")) {
    RawScoreRow r;
    r.snv = parse_long(row[0], "in raw_scores.tsv");
    r.sample = row[1];
    r.x = parse_long(row[2], "in raw_scores.tsv");
    r.y = parse_long(row[3], "in raw_scores.tsv");
    r.mult = parse_long(row[4], "in raw_scores.tsv");
    r.score.log_pval_ref = parse_double(row[5], "in raw_scores.tsv");
    r.score.log_pval_alt = parse_double(row[6], "in raw_scores.tsv");
    r.score.es_ref = parse_double(row[7], "in raw_scores.tsv");
    r.score.es_alt = parse_double(row[8], "in raw_scores.tsv");
    p.raw_scores.push_back(std::move(r));
  }
  for (const auto &row : parse_table(
           tables.at("scores.tsv"),
           "snv\tgroup\tn_obs\tlog_comb_pval_ref\tlog_comb_pval_alt"
           "\tcomb_es_ref\tcomb_es_alt\tlog_final_pval\tfinal_es\tfinal_side"
           "\tes_ref_degenerate\tes_alt_degenerate",
           "scores.tsv")) {
    CombinedRow c;
    c.snv = parse_long(row[0], "in scores.tsv");
    c.group = row[1];
    c.n_obs = parse_long(row[2], "in scores.tsv");
    c.record.log_comb_pval_ref = parse_double(row[3], "in scores.tsv");
    c.record.log_comb_pval_alt = parse_double(row[4], "in scores.tsv");
    c.record.comb_es_ref = parse_double(row[5], "in scores.tsv");
    c.record.comb_es_alt = parse_double(row[6], "in scores.tsv");
    c.record.log_final_pval = parse_double(row[7], "in scores.tsv");
    c.record.final_es = parse_double(row[8], "in scores.tsv");
    c.record.final_side =
        row[9] == "ref" ? scoring::Side::Ref : scoring::Side::Alt;
    c.record.es_ref_degenerate = row[10] == "1";
    c.record.es_alt_degenerate = row[11] == "1";
    p.combined.push_back(std::move(c));
  }
  for (const auto &row : parse_table(
           tables.at("difftest.tsv"),
           "snv\tp_control\tp_test\tse_control\tse_test\tstatistic"
           "\tpval_side1\tpval_side2\tfinal_pval\tmethod",
           "difftest.tsv")) {
    DiffRow d;
    d.snv = parse_long(row[0], "in difftest.tsv");
    d.record.p_control = parse_double(row[1], "in difftest.tsv");
    d.record.p_test = parse_double(row[2], "in difftest.tsv");
    d.record.se_control = parse_double(row[3], "in difftest.tsv");
    d.record.se_test = parse_double(row[4], "in difftest.tsv");
    d.record.statistic = parse_double(row[5], "in difftest.tsv");
    d.record.pval_side1 = parse_double(row[6], "in difftest.tsv");
    d.record.pval_side2 = parse_double(row[7], "in difftest.tsv");
    d.record.final_pval = parse_double(row[8], "in difftest.tsv");
    d.record.method =
        row[9] == "wald" ? difftest::Method::Wald : difftest::Method::LRT;
    p.difftests.push_back(std::move(d));
  }
  try {
    const json rj = json::parse(tables.at("reproduce.json"));
    for (const auto &entry : rj["commands"]) {
      CommandLogEntry e;
      e.verb = entry["verb"].get<std::string>();
      e.args = entry["args"].get<std::vector<std::string>>();
      e.input_hashes =
          entry["inputs"].get<std::map<std::string, std::string>>();
      p.log.push_back(std::move(e));
    }
  } catch (const json::exception &e) {
    throw CorruptStore(std::string("reproduce log parse failure: ") +
                       e.what());
  }
  return p;
}

std::string hash_bytes(const std::string &bytes) {
  uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

std::string hash_file(const std::string &path) {
  return hash_bytes(read_file(path));
}

std::string format_pval(double log_pval, int significant_digits) {
  if (!(log_pval <= 0.0))
    throw DomainError("format_pval: log p-value must be <= 0");
  significant_digits = std::clamp(significant_digits, 1, 17);
  const double log10p = log_pval / M_LN10;
  char buf[48];
  if (log10p > -4.0) {
    std::snprintf(buf, sizeof(buf), "%.*g", significant_digits,
                  std::exp(log_pval));
    return buf;
  }
  double e = std::floor(log10p);
  double m = std::pow(10.0, log10p - e);
  // guard against mantissa rounding up to 10
  char mbuf[32];
  std::snprintf(mbuf, sizeof(mbuf), "%.*f", significant_digits - 1, m);
  if (std::strncmp(mbuf, "10", 2) == 0) {
    e += 1.0;
    std::snprintf(mbuf, sizeof(mbuf), "%.*f", significant_digits - 1, 1.0);
  }
  std::snprintf(buf, sizeof(buf), "%se%+03ld", mbuf, static_cast<long>(e));
  return buf;
}

} // namespace aimix::io
