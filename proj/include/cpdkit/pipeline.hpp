#pragma once

// Subcommands of the `cpdkit` tool. Each one reads and writes files only
// through io.hpp formats, so running them one by one is equivalent to
// cmd_pipeline.
//
// Output layout of cmd_simulate / cmd_pipeline (one seed):
//
//   clean.tns noisy.tns [masked.tns]
//   truth/{factor1..3.tns, sources.csv, scene.json}
//   estimate/{factor1..3.tns, diagnostics.json}    report.json
//   [estimate_masked/..., report_masked.json]
//   aligned_sources.csv observed_clean.csv observed_noisy.csv
//   slices/*.csv  plots/{sources,observed,recovered}.svg

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cpdkit/cpd.hpp"
#include "cpdkit/io.hpp"

namespace cpdkit::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kValidationError = 1, kNonConvergence = 2 };

/// Sub-stream ids passed to derive_seed() with the config seed.
constexpr std::uint64_t kNoiseStream = 1;
constexpr std::uint64_t kSourceStream = 2;

void cmd_simulate(const fs::path& config_path, const fs::path& out_dir);

struct DecomposeArgs {
  fs::path tensor_path;
  std::size_t rank = 3;
  CpdAlgorithm algorithm = CpdAlgorithm::GaussNewtonWithAlsWarmstart;
  std::uint64_t seed = 0;
  fs::path out_dir;
  MissingDataStrategy missing_data_strategy = MissingDataStrategy::ExpectationImputation;
  std::size_t max_iterations = 500;
};

/// Writes normalized factor1..N.tns and diagnostics.json.
CpdDiagnostics cmd_decompose(const DecomposeArgs& args);

struct Evaluation {
  EvalReport report;
  SourceSet aligned_sources;
};

/// truth_dir as written by cmd_simulate; estimate_dir as written by
/// cmd_decompose (diagnostics.json optional).
Evaluation evaluate_dirs(const fs::path& truth_dir, const fs::path& estimate_dir);
EvalReport cmd_evaluate(const fs::path& truth_dir, const fs::path& estimate_dir, const fs::path& out_path);

/// Magnitudes of the slice with the given 1-based mode index fixed; missing
/// entries become empty cells.
void cmd_slices(const fs::path& tensor_path, std::size_t mode, std::size_t index, const fs::path& out_csv);

/// One panel per CSV column, one polyline per input file.
void cmd_plot(const std::vector<fs::path>& csv_paths, const fs::path& out_svg);

struct SeedRange {
  std::uint64_t first = 0;
  std::uint64_t last = 0;
};

/// Parses "a..b" (inclusive) or a single seed.
SeedRange parse_seed_range(const std::string& text);

struct RunResult {
  std::uint64_t seed = 0;
  EvalReport report;
  std::optional<EvalReport> masked_report;
};

struct SweepSummary {
  std::vector<RunResult> runs;
  std::vector<double> median_cpderr;
  std::vector<double> median_azimuth_rel_err;
  std::vector<double> median_elevation_rel_err;
  double median_min_correlation = 0.0;
  /// p < 0.05 for every source of every converged run.
  bool all_significant = true;
  std::size_t converged_runs = 0;
  std::vector<double> median_masked_cpderr;

  nlohmann::json to_json() const;
};

/// simulate -> decompose -> evaluate -> slices/plots. With `seeds`, every seed
/// runs in out_dir/seed_<s>/ with the config seed replaced, and
/// out_dir/summary.json collects medians.
SweepSummary cmd_pipeline(const fs::path& config_path, const fs::path& out_dir,
                          std::optional<SeedRange> seeds = std::nullopt);

double median(std::vector<double> values);

}  // namespace cpdkit::cli
