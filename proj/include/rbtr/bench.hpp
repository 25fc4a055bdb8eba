#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "rbtr/tr_irgnm.hpp"

namespace rbtr {

// Benchmark configuration, artifacts and comparison tables.

struct RunConfig {
  int run_id = 1;
  int cells = 300;
  int K = 50;
  double delta = 1e-5;
  std::uint64_t seed = 1;
  std::string algorithm = "tr";  // fom, tr or both
  IrgnmSettings irgnm;
  TrSettings tr;
};

/// Sets one key of the flat key=value format, e.g. "cells", "tr.eta0",
/// "alpha.theta", "pgd.max_iterations". Throws ConfigError on unknown keys
/// and malformed values.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);

/// Reads key=value lines; '#' starts a comment, blank lines are skipped.
RunConfig parse_config(std::istream& in, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});

/// Every key with its resolved value, sorted, one per line. Parsing the
/// output reproduces the configuration exactly.
std::string format_config(const RunConfig& config);

/// Throws ConfigError with an actionable message if the configuration
/// cannot be turned into a problem and solver settings.
void validate(const RunConfig& config);

/// 64-bit FNV-1a of the keys that define the problem instance (run, mesh,
/// time steps, noise level, seed); equal hashes mean comparable runs.
std::uint64_t problem_hash(const RunConfig& config);
std::uint64_t fnv1a(const std::string& text);

/// Resolved solver settings with delta and the ROM defaults applied.
IrgnmSettings irgnm_settings(const RunConfig& config);
TrSettings tr_settings(const RunConfig& config);

// Field dumps: 16-byte header ("RBTRFLD" NUL, uint32 version, uint32 zero),
// uint64 rows, uint64 cols, then rows*cols doubles in row-major order, all
// little-endian. A text sidecar "<file>.meta" holds key=value metadata.

void write_field(const std::filesystem::path& path, const Matrix& field,
                 const std::map<std::string, std::string>& meta = {});
Matrix read_field(const std::filesystem::path& path);
std::map<std::string, std::string> read_meta(const std::filesystem::path& field_path);

// History CSVs, doubles printed with %.17g; wall_time is always the last column.

void write_history(std::ostream& out, const IrgnmResult& result);
void write_history(std::ostream& out, const TrResult& result);
extern const char* const kFomHistoryHeader;
extern const char* const kTrHistoryHeader;

/// Summary of one completed run, as stored in manifest.json.
struct RunSummary {
  std::string algorithm;
  bool converged = false;
  int outer_iterations = 0;
  double J = 0.0;
  double target = 0.0;
  double wall_time = 0.0;
  long fom_solves = 0;
  Index n_q = 0;
  Index n_v = 0;
  double eps_pod = 0.0;
  double rel_error_exact = 0.0;  // L2 (trajectory L2 for time-dependent runs) against the exact parameter
};

/// Builds the problem and data of `config`, runs `algorithm` ("fom" or "tr")
/// and writes manifest.json, history.csv, q_final.bin (+ .meta) and
/// q_exact.bin into `dir`.
RunSummary execute(const RunConfig& config, const std::string& algorithm, const std::filesystem::path& dir);

/// One row of the comparison table between a FOM and a TR run directory.
struct CompareRow {
  double eps_pod = 0.0;
  double l2_rel_error = 0.0;
  double h1_rel_error = 0.0;
  double time_fom = 0.0;
  double time_tr = 0.0;
  double speedup = 0.0;
  long fom_solves_fom = 0;
  long fom_solves_tr = 0;
  Index n_q = 0;
  Index n_v = 0;
  int outer_fom = 0;
  int outer_tr = 0;
};

/// Reads both manifests and final fields; throws ConfigError when the
/// problem hashes differ. Errors use the FE L2 and H1 norms, summed over time
/// steps with weight dt for time-dependent parameters.
CompareRow compare(const std::filesystem::path& dir_fom, const std::filesystem::path& dir_tr);
std::string format_table(const std::vector<CompareRow>& rows);

/// Logarithmically spaced POD tolerances from 1e-9 down to 1e-14.
std::vector<double> eps_grid(int points = 6);

/// Output root: $RBTR_OUTPUT_ROOT when set, otherwise ./rbtr_output.
std::filesystem::path output_root();

}  // namespace rbtr
