#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "aimix/io.hpp"

using namespace aimix;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("aimix_io_test_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string &name, const std::string &content) {
    const fs::path p = path / name;
    std::ofstream(p, std::ios::binary) << content;
    return p.string();
  }
  std::string str() const { return path.string(); }
};

const char *kHeader = "chr\tpos\tid\tref\talt\tref_count\talt_count\n";

std::string tsv_fixture_a() {
  std::string s = kHeader;
  s += "chr1\t100\trs1\tA\tC\t10\t12\n";
  s += "chr1\t200\trs2\tG\tT\t4\t30\n";  // below l = 5
  s += "chr1\t700\trs3\tA\tG\t50\t50\n";
  s += "chr2\t50\trs4\tC\tT\t0\t8\n"; // homozygous
  return s;
}

std::string tsv_fixture_b() {
  std::string s = kHeader;
  s += "chr1\t100\trs1\tA\tC\t9\t14\n"; // same SNV as in fixture a
  s += "chr2\t300\trs5\tT\tA\t20\t25\n";
  return s;
}

} // namespace

TEST_CASE("load_bad_map: parsing and overlap detection") {
  TempDir tmp;
  const auto good = tmp.file("bad.bed", "chr1\t0\t500\t1\nchr1\t500\t1000\t2\n");
  const auto bm = io::load_bad_map(good);
  REQUIRE(bm.count("chr1") == 1);
  CHECK(bm.at("chr1").size() == 2);

  const auto overlapping =
      tmp.file("bad2.bed", "chr1\t0\t500\t1\nchr1\t400\t900\t2\n");
  CHECK_THROWS_AS(io::load_bad_map(overlapping), AnnotationConflict);

  const auto malformed = tmp.file("bad3.bed", "chr1\t100\t50\t1\n");
  CHECK_THROWS_AS(io::load_bad_map(malformed), ParseError);
}

TEST_CASE("ingest: filtering, BAD join and SNV sharing") {
  TempDir tmp;
  const auto f1 = tmp.file("sampleA.tsv", tsv_fixture_a());
  const auto f2 = tmp.file("sampleB.tsv", tsv_fixture_b());
  const auto bed =
      tmp.file("bad.bed", "chr1\t0\t500\t1\nchr1\t500\t1000\t2\n");

  io::Project p;
  p.settings.l = 5;
  const auto bm = io::load_bad_map(bed);
  const auto stats = io::ingest(p, {f1, f2}, io::Format::Tsv, bm);

  CHECK(stats.parsed == 6);
  CHECK(stats.dropped_homozygous == 1);
  CHECK(stats.dropped_below_l == 1);
  CHECK(stats.unannotated == 1); // chr2 record outside all intervals

  REQUIRE(p.snvs.size() == 3); // rs1 shared; rs3; rs5
  CHECK(p.observations.size() == 4);

  // rs1 exists once with two observations from different samples
  long rs1_obs = 0;
  for (const auto &o : p.observations)
    if (p.snvs[o.snv].id == "rs1")
      ++rs1_obs;
  CHECK(rs1_obs == 2);

  // BAD joined per half-open interval; pos 700 lands in [500, 1000) -> 2
  for (const auto &s : p.snvs) {
    if (s.id == "rs3")
      CHECK(s.bad == 2.0);
    if (s.id == "rs1")
      CHECK(s.bad == 1.0);
    if (s.id == "rs5")
      CHECK(s.bad == 1.0); // unannotated default
  }

  CHECK_THROWS_AS(io::ingest(p, {}, io::Format::Tsv, bm), EmptyDataset);
}

TEST_CASE("ingest: order independence and repeat merging") {
  TempDir tmp;
  const auto f1 = tmp.file("sampleA.tsv", tsv_fixture_a());
  const auto f2 = tmp.file("sampleB.tsv", tsv_fixture_b());

  io::Project fwd, rev;
  fwd.settings.l = 5;
  rev.settings.l = 5;
  io::ingest(fwd, {f1, f2}, io::Format::Tsv, std::nullopt);
  io::ingest(rev, {f2, f1}, io::Format::Tsv, std::nullopt);
  REQUIRE(fwd.snvs.size() == rev.snvs.size());
  REQUIRE(fwd.observations.size() == rev.observations.size());
  for (size_t i = 0; i < fwd.observations.size(); ++i) {
    CHECK(fwd.observations[i].sample == rev.observations[i].sample);
    CHECK(fwd.observations[i].x == rev.observations[i].x);
    CHECK(fwd.observations[i].mult == rev.observations[i].mult);
  }

  // ingesting the same file again doubles multiplicities, not rows
  io::Project twice;
  twice.settings.l = 5;
  io::ingest(twice, {f1}, io::Format::Tsv, std::nullopt);
  const size_t rows = twice.observations.size();
  io::ingest(twice, {f1}, io::Format::Tsv, std::nullopt);
  CHECK(twice.observations.size() == rows);
  CHECK(twice.observations[0].mult == 2);
}

TEST_CASE("ingest: malformed inputs") {
  TempDir tmp;
  io::Project p;
  const auto noheader =
      tmp.file("x.tsv", "chr1\t100\trs1\tA\tC\t10\t12\n");
  CHECK_THROWS_AS(io::ingest(p, {noheader}, io::Format::Tsv, std::nullopt),
                  ParseError);
  const auto badcols = tmp.file("y.tsv", std::string(kHeader) + "chr1\t100\n");
  CHECK_THROWS_AS(io::ingest(p, {badcols}, io::Format::Tsv, std::nullopt),
                  ParseError);
}

TEST_CASE("ingest: minimal VCF-like format") {
  TempDir tmp;
  std::string vcf = "##fileformat=VCFv4.2\n";
  vcf += "#CHROM\tPOS\tID\tREF\tALT\tQUAL\tFILTER\tINFO\tFORMAT\ts1\ts2\n";
  vcf += "chr1\t100\trs1\tA\tC\t.\t.\t.\tGT:AD\t0/1:10,12\t0/1:8,9\n";
  vcf += "chr1\t200\trs2\tG\tT\t.\t.\t.\tGT:AD\t0/1:4,30\t0/1:6,7\n";
  const auto f = tmp.file("calls.vcf", vcf);

  io::Project p;
  p.settings.l = 5;
  const auto stats = io::ingest(p, {f}, io::Format::VcfLike, std::nullopt);
  CHECK(stats.parsed == 4);
  CHECK(stats.dropped_below_l == 1); // s1 at rs2
  REQUIRE(p.snvs.size() == 2);
  CHECK(p.observations.size() == 3);

  std::string no_ad = "#CHROM\tPOS\tID\tREF\tALT\tQUAL\tFILTER\tINFO\tFORMAT"
                      "\ts1\nchr1\t100\trs1\tA\tC\t.\t.\t.\tGT:DP\t0/1:22\n";
  const auto g = tmp.file("noad.vcf", no_ad);
  io::Project q;
  CHECK_THROWS_AS(io::ingest(q, {g}, io::Format::VcfLike, std::nullopt),
                  MissingField);
}

TEST_CASE("partitions: orientation split") {
  TempDir tmp;
  const auto f1 = tmp.file("sampleA.tsv", tsv_fixture_a());
  io::Project p;
  p.settings.l = 5;
  io::ingest(p, {f1}, io::Format::Tsv, std::nullopt);

  const auto parts = io::partitions(p);
  REQUIRE(parts.count({0, 1.0}) == 1);
  REQUIRE(parts.count({1, 1.0}) == 1);
  // ref-given-alt: fixed = alt count; observation (10, 12) lands at fixed 12
  const auto &rga = parts.at({0, 1.0});
  REQUIRE(rga.count(12) == 1);
  CHECK(rga.at(12)[0].first == 10);
  const auto &agr = parts.at({1, 1.0});
  REQUIRE(agr.count(10) == 1);
  CHECK(agr.at(10)[0].first == 12);
}

namespace {

io::Project make_full_project(TempDir &tmp) {
  const auto f1 = tmp.file("sampleA.tsv", tsv_fixture_a());
  io::Project p;
  p.name = "demo";
  p.settings.l = 5;
  p.settings.m = 100;
  p.settings.kind = distcore::Kind::NB;
  p.settings.fitted = true;

  io::CommandLogEntry e;
  e.verb = "create";
  e.args = {"create", "demo", f1};
  e.input_hashes[f1] = io::hash_file(f1);
  p.log.push_back(e);

  io::ingest(p, {f1}, io::Format::Tsv, std::nullopt);

  fit::WindowEstimate est;
  est.fixed_value = 12;
  est.lo = 10;
  est.hi = 14;
  est.n_obs = 3;
  est.params = {1.25, 0.5, 0.5, 100.0, 1.0};
  est.loglik = -12.5;
  est.converged = true;
  est.std_errors = {0.03, std::numeric_limits<double>::quiet_NaN()};
  p.fits.estimates[{0, 1.0}].emplace(12, est);

  io::RawScoreRow r;
  r.snv = 0;
  r.sample = "sampleA";
  r.x = 10;
  r.y = 12;
  r.score = {std::log(0.2), std::log(0.8), 0.31,
             std::numeric_limits<double>::quiet_NaN()};
  p.raw_scores.push_back(r);

  io::CombinedRow c;
  c.snv = 0;
  c.group = "all";
  c.n_obs = 1;
  c.record.log_comb_pval_ref = std::log(0.21);
  c.record.log_comb_pval_alt = std::log(0.79);
  c.record.log_final_pval = std::log(0.21);
  c.record.final_es = 0.31;
  p.combined.push_back(c);

  io::DiffRow d;
  d.snv = 0;
  d.record.p_control = 0.5;
  d.record.p_test = 0.61;
  d.record.final_pval = 0.04;
  d.record.pval_side1 = 0.04;
  d.record.pval_side2 = 0.011;
  p.difftests.push_back(d);
  return p;
}

} // namespace

TEST_CASE("save/load: round trip, corruption, version") {
  TempDir tmp;
  const auto p = make_full_project(tmp);
  io::save_project(p, tmp.str());
  const auto q = io::load_project(tmp.str(), "demo");
  CHECK(q == p);

  // byte-identical re-save
  const auto est_path = fs::path(io::store_dir(tmp.str(), "demo")) /
                        "estimates.tsv";
  const auto before = io::hash_file(est_path.string());
  io::save_project(q, tmp.str());
  CHECK(io::hash_file(est_path.string()) == before);

  // flip one byte of a table -> checksum failure
  {
    std::ofstream out(est_path, std::ios::binary | std::ios::app);
    out << "x";
  }
  CHECK_THROWS_AS(io::load_project(tmp.str(), "demo"), CorruptStore);
  io::save_project(p, tmp.str()); // restore

  // unsupported version
  const auto man_path =
      fs::path(io::store_dir(tmp.str(), "demo")) / "manifest.json";
  std::string man;
  {
    std::ifstream in(man_path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    man = ss.str();
  }
  const auto at = man.find("\"format_version\": 1");
  REQUIRE(at != std::string::npos);
  man.replace(at, 19, "\"format_version\": 9");
  std::ofstream(man_path, std::ios::binary | std::ios::trunc) << man;
  CHECK_THROWS_AS(io::load_project(tmp.str(), "demo"), VersionMismatch);

  CHECK_THROWS_AS(io::load_project(tmp.str(), "nonexistent"), CorruptStore);
}

TEST_CASE("hashing: FNV-1a vectors and sensitivity") {
  CHECK(io::hash_bytes("") == "cbf29ce484222325");
  CHECK(io::hash_bytes("a") == "af63dc4c8601ec8c");
  TempDir tmp;
  const auto f = tmp.file("x.txt", "hello");
  const auto h1 = io::hash_file(f);
  CHECK(io::hash_file(tmp.file("y.txt", "hello")) == h1);
  CHECK(io::hash_file(tmp.file("z.txt", "hello!")) != h1);
}

TEST_CASE("format_pval") {
  CHECK(io::format_pval(0.0) == "1");
  CHECK(io::format_pval(std::log(0.05)) == "0.05");
  CHECK(io::format_pval(std::log(0.123456789)) == "0.123457");

  // deep tail: ln p = -1000 -> p = 10^{-434.29...}
  const auto s = io::format_pval(-1000.0);
  CHECK(s.substr(0, 4) == "5.07");
  CHECK(s.find("e-435") != std::string::npos);

  CHECK_THROWS_AS(io::format_pval(0.5), DomainError);
}
