#pragma once

// Dataset ingestion (TSV and minimal VCF-like), BAD interval annotation,
// project persistence under <name>.mixproj/, and the reproduce log.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "aimix/difftest.hpp"
#include "aimix/fit.hpp"
#include "aimix/scoring.hpp"

namespace aimix::io {

struct SnvRecord {
  std::string chr;
  long pos = 0; // 1-based
  std::string id;
  char ref = 'A';
  char alt = 'C';
  double bad = 1.0;
};

struct Observation {
  long snv = 0; // index into the SNV table
  std::string sample;
  long x = 0; // ref count
  long y = 0; // alt count
  long mult = 1;
};

struct ProjectSettings {
  long l = 5;
  long m = 10000;
  distcore::Kind kind = distcore::Kind::NB;
  double alpha = 0.0;
  bool fitted = false;
  bool std_errors = false;
};

struct RawScoreRow {
  long snv = 0;
  std::string sample;
  long x = 0;
  long y = 0;
  long mult = 1;
  scoring::RawScore score;
};

struct CombinedRow {
  long snv = 0;
  std::string group;
  long n_obs = 0;
  scoring::ScoreRecord record;
};

struct DiffRow {
  long snv = 0;
  difftest::DiffTestRecord record;
};

struct CommandLogEntry {
  std::string verb;
  std::vector<std::string> args;
  std::map<std::string, std::string> input_hashes; // path -> fnv1a-64 hex
};

struct Project {
  std::string name;
  ProjectSettings settings;
  std::vector<SnvRecord> snvs;
  std::vector<Observation> observations;
  fit::FitResult fits; // estimates empty until fitted
  std::vector<RawScoreRow> raw_scores;
  std::vector<CombinedRow> combined;
  std::vector<DiffRow> difftests;
  std::vector<CommandLogEntry> log;

  bool operator==(const Project &) const;
};

enum class Format { Tsv, VcfLike };

// Half-open BAD intervals per chromosome.
struct BadInterval {
  long start = 0;
  long end = 0;
  double bad = 1.0;
};
using BadMap = std::map<std::string, std::vector<BadInterval>>;

// Parses a chr/start/end/bad annotation; throws AnnotationConflict on
// overlapping intervals within a chromosome.
BadMap load_bad_map(const std::string &path);

struct IngestStats {
  long parsed = 0;
  long dropped_homozygous = 0;
  long dropped_below_l = 0;
  long unannotated = 0; // fell outside all BAD intervals, defaulted to 1
};

// Parses the given files (sample id = file stem), filters homozygous calls
// and counts below l, joins BAD, and merges into the project's SNV index and
// deduplicated observation table.
IngestStats ingest(Project &project, const std::vector<std::string> &paths,
                   Format format, const std::optional<BadMap> &bad_map);

// Aggregates observations into per-(orientation, BAD) fixed-count indexes.
fit::PartitionMap partitions(const Project &project);

// Store directory for a project name (within base_dir).
std::string store_dir(const std::string &base_dir, const std::string &name);

void save_project(const Project &project, const std::string &base_dir);
Project load_project(const std::string &base_dir, const std::string &name);

// FNV-1a 64-bit content hash of a file, as a hex string.
std::string hash_file(const std::string &path);
std::string hash_bytes(const std::string &bytes);

// Scientific-notation p-value from its natural log (handles p < 1e-308).
std::string format_pval(double log_pval, int significant_digits = 6);

} // namespace aimix::io
