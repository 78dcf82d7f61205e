// cpdkit: simulate, decompose and evaluate CPD-based source and DOA recovery.

#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "cpdkit/pipeline.hpp"

namespace fs = std::filesystem;
using namespace cpdkit;

int main(int argc, char** argv) {
  CLI::App app{"CPD-based multichannel source separation and DOA estimation"};
  app.require_subcommand(1);

  fs::path config, out;
  auto* simulate = app.add_subcommand("simulate", "Build the scene tensor, noise and masks from a config");
  simulate->add_option("--config", config, "Scene config (JSON)")->required();
  simulate->add_option("--out", out, "Output directory")->required();

  cli::DecomposeArgs dec;
  std::string algorithm = "gn_als", strategy = "imputation";
  auto* decompose = app.add_subcommand("decompose", "Compute a rank-R CPD of a tensor file");
  decompose->add_option("--tensor", dec.tensor_path, "Input .tns file")->required();
  decompose->add_option("--rank", dec.rank, "Number of rank-one terms")->required()->check(CLI::PositiveNumber);
  decompose->add_option("--algorithm", algorithm, "als | gn | gn_als")->capture_default_str();
  decompose->add_option("--seed", dec.seed, "Seed of the random initial model")->capture_default_str();
  decompose->add_option("--out", dec.out_dir, "Output directory")->required();
  decompose->add_option("--missing-strategy", strategy, "imputation | masked")->capture_default_str();
  decompose->add_option("--max-iterations", dec.max_iterations)->capture_default_str()->check(CLI::PositiveNumber);

  fs::path truth_dir, estimate_dir, report_path;
  auto* evaluate = app.add_subcommand("evaluate", "Compare an estimate against the simulated truth");
  evaluate->add_option("--truth", truth_dir, "truth/ directory written by simulate")->required();
  evaluate->add_option("--estimate", estimate_dir, "Directory written by decompose")->required();
  evaluate->add_option("--out", report_path, "Report path (JSON)")->required();

  fs::path slice_tensor, slice_out;
  std::size_t slice_mode = 3, slice_index = 1;
  auto* slices = app.add_subcommand("slices", "Export |value| of one tensor slice as CSV");
  slices->add_option("--tensor", slice_tensor)->required();
  slices->add_option("--mode", slice_mode, "1, 2 or 3")->required();
  slices->add_option("--index", slice_index, "1-based slice index")->required();
  slices->add_option("--out", slice_out)->required();

  std::vector<fs::path> plot_inputs;
  fs::path plot_out;
  auto* plot = app.add_subcommand("plot", "Render signal CSVs as an SVG line chart");
  plot->add_option("signals", plot_inputs, "CSV files with identical columns")->required();
  plot->add_option("--out", plot_out)->required();

  std::string seeds;
  auto* pipeline = app.add_subcommand("pipeline", "simulate + decompose + evaluate + figures");
  pipeline->add_option("--config", config)->required();
  pipeline->add_option("--out", out)->required();
  pipeline->add_option("--seeds", seeds, "Seed sweep a..b (inclusive); writes summary.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? cli::kOk : cli::kValidationError;
  }

  try {
    if (*simulate) {
      cli::cmd_simulate(config, out);
    } else if (*decompose) {
      dec.algorithm = parse_algorithm(algorithm);
      dec.missing_data_strategy = parse_missing_strategy(strategy);
      const auto diag = cli::cmd_decompose(dec);
      std::printf("iterations %zu converged %s relative residual %.6g\n", diag.iterations,
                  diag.converged ? "yes" : "no", diag.final_relative_residual);
      if (!diag.converged) return cli::kNonConvergence;
    } else if (*evaluate) {
      const auto rep = cli::cmd_evaluate(truth_dir, estimate_dir, report_path);
      for (std::size_t n = 0; n < rep.cpderr.size(); ++n) std::printf("cpderr mode %zu: %.6g\n", n + 1, rep.cpderr[n]);
      if (!rep.converged) return cli::kNonConvergence;
    } else if (*slices) {
      cli::cmd_slices(slice_tensor, slice_mode, slice_index, slice_out);
    } else if (*plot) {
      cli::cmd_plot(plot_inputs, plot_out);
    } else if (*pipeline) {
      std::optional<cli::SeedRange> range;
      if (!seeds.empty()) range = cli::parse_seed_range(seeds);
      const auto summary = cli::cmd_pipeline(config, out, range);
      const char* prefix = range ? "median " : "";
      for (std::size_t n = 0; n < summary.median_cpderr.size(); ++n)
        std::printf("%scpderr mode %zu: %.6g\n", prefix, n + 1, summary.median_cpderr[n]);
      std::printf("%smin correlation: %.6g\n", prefix, summary.median_min_correlation);
      std::printf("converged runs: %zu / %zu\n", summary.converged_runs, summary.runs.size());
      if (summary.converged_runs != summary.runs.size()) return cli::kNonConvergence;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::kValidationError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::kValidationError;
  }
  return cli::kOk;
}
