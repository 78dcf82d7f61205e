#include "cpdkit/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>

#include "cpdkit/harmonic.hpp"
#include "cpdkit/metrics.hpp"
#include "cpdkit/random.hpp"
#include "cpdkit/svg.hpp"

namespace cpdkit::cli {

using nlohmann::json;

namespace {

SourceSet scene_sources(const SceneConfig& c) {
  const auto count = c.scene.sources.size();
  if (c.signals == "synthetic") return synthetic_sources(c.scene.time_len, count, derive_seed(c.seed, kSourceStream));
  fs::path p = c.signals;
  if (p.is_relative()) p = c.base_dir / p;
  auto s = load_signals(p);
  if (static_cast<std::size_t>(s.signals.cols()) != count)
    throw ConfigError("'signals': " + p.string() + " has " + std::to_string(s.signals.cols()) + " columns, scene has " +
                      std::to_string(count) + " sources");
  if (static_cast<std::size_t>(s.signals.rows()) != c.scene.time_len)
    throw ConfigError("'signals': " + p.string() + " has " + std::to_string(s.signals.rows()) +
                      " rows, time_len is " + std::to_string(c.scene.time_len));
  return s;
}

json diagnostics_json(const CpdDiagnostics& d, const DecomposeArgs& a, const IncompleteTensor& t) {
  json trace = json::array();
  for (double v : d.objective_trace) trace.push_back(v);
  return {{"algorithm", to_string(a.algorithm)},
          {"rank", a.rank},
          {"seed", a.seed},
          {"missing_data_strategy", to_string(a.missing_data_strategy)},
          {"incomplete", !t.complete()},
          {"missing_entries", t.missing_count()},
          {"iterations", d.iterations},
          {"converged", d.converged},
          {"final_relative_residual", d.final_relative_residual},
          {"objective_trace", trace}};
}

SourceSet observed_signals(const DenseTensor& t) {
  const auto& s = t.shape();
  const std::size_t m1 = s[0], m2 = s[1], k_len = s[2];
  const std::size_t sensors[3][2] = {{0, 0}, {(m1 - 1) / 2, (m2 - 1) / 2}, {m1 - 1, m2 - 1}};
  SourceSet out;
  out.signals.resize(static_cast<Eigen::Index>(k_len), 3);
  for (int c = 0; c < 3; ++c) {
    const auto [i, j] = std::pair{sensors[c][0], sensors[c][1]};
    out.labels.push_back("sensor_" + std::to_string(i + 1) + "_" + std::to_string(j + 1));
    for (std::size_t k = 0; k < k_len; ++k)
      out.signals(static_cast<Eigen::Index>(k), c) = t[i + m1 * (j + m2 * k)].real();
  }
  return out;
}

RunResult run_single(const fs::path& config_path, const fs::path& out_dir) {
  const auto config = load_config(config_path);
  cmd_simulate(config_path, out_dir);

  DecomposeArgs args;
  args.tensor_path = out_dir / "noisy.tns";
  args.rank = config.rank;
  args.algorithm = config.algorithm;
  args.seed = config.seed;
  args.out_dir = out_dir / "estimate";
  args.missing_data_strategy = config.missing_data_strategy;
  args.max_iterations = config.max_iterations;
  cmd_decompose(args);

  RunResult result;
  result.seed = config.seed;
  auto eval = evaluate_dirs(out_dir / "truth", args.out_dir);
  save_signals(eval.aligned_sources, out_dir / "aligned_sources.csv");
  save_report(eval.report, out_dir / "report.json");
  result.report = std::move(eval.report);

  const std::size_t k_len = config.scene.time_len;
  for (std::size_t mode = 1; mode <= 3; ++mode)
    cmd_slices(out_dir / "noisy.tns", mode, 1, out_dir / "slices" / ("noisy_mode" + std::to_string(mode) + "_1.csv"));

  if (!config.masks.empty()) {
    DecomposeArgs masked = args;
    masked.tensor_path = out_dir / "masked.tns";
    masked.out_dir = out_dir / "estimate_masked";
    cmd_decompose(masked);
    auto meval = evaluate_dirs(out_dir / "truth", masked.out_dir);
    save_report(meval.report, out_dir / "report_masked.json");
    result.masked_report = std::move(meval.report);
    cmd_slices(out_dir / "masked.tns", 3, 1, out_dir / "slices" / "masked_mode3_1.csv");
    cmd_slices(out_dir / "masked.tns", 3, k_len,
               out_dir / "slices" / ("masked_mode3_" + std::to_string(k_len) + ".csv"));
  }

  const auto clean = std::get<DenseTensor>(read_tensor(out_dir / "clean.tns"));
  const auto noisy = std::get<DenseTensor>(read_tensor(out_dir / "noisy.tns"));
  save_signals(observed_signals(clean), out_dir / "observed_clean.csv");
  save_signals(observed_signals(noisy), out_dir / "observed_noisy.csv");
  cmd_plot({out_dir / "truth" / "sources.csv"}, out_dir / "plots" / "sources.svg");
  cmd_plot({out_dir / "observed_clean.csv", out_dir / "observed_noisy.csv"}, out_dir / "plots" / "observed.svg");
  cmd_plot({out_dir / "truth" / "sources.csv", out_dir / "aligned_sources.csv"}, out_dir / "plots" / "recovered.svg");
  return result;
}

json vector_json(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(std::isfinite(x) ? json(x) : json(nullptr));
  return a;
}

}  // namespace

void cmd_simulate(const fs::path& config_path, const fs::path& out_dir) {
  const auto config = load_config(config_path);
  const auto sources = scene_sources(config);
  const auto scene = build_scene_tensor(config.scene, sources);
  const auto noisy = config.snr_db ? add_noise(scene.tensor, *config.snr_db, derive_seed(config.seed, kNoiseStream))
                                   : scene.tensor;

  fs::create_directories(out_dir / "truth");
  write_tensor(out_dir / "clean.tns", scene.tensor);
  write_tensor(out_dir / "noisy.tns", noisy);
  if (!config.masks.empty()) write_tensor(out_dir / "masked.tns", apply_mask(noisy, config.masks));
  write_model(out_dir / "truth", scene.truth);
  save_signals(sources, out_dir / "truth" / "sources.csv");
  save_config(config, out_dir / "truth" / "scene.json");
}

CpdDiagnostics cmd_decompose(const DecomposeArgs& args) {
  const auto t = as_incomplete(read_tensor(args.tensor_path));
  CpdOptions opts;
  opts.rank = args.rank;
  opts.algorithm = args.algorithm;
  opts.seed = args.seed;
  opts.missing_data_strategy = args.missing_data_strategy;
  opts.max_iterations = args.max_iterations;
  auto result = cpd(t, opts);
  fs::create_directories(args.out_dir);
  write_model(args.out_dir, result.model);
  write_json(args.out_dir / "diagnostics.json", diagnostics_json(result.diagnostics, args, t));
  return result.diagnostics;
}

Evaluation evaluate_dirs(const fs::path& truth_dir, const fs::path& estimate_dir) {
  const auto config = load_config(truth_dir / "scene.json");
  const auto truth = read_model(truth_dir);
  const auto estimate = read_model(estimate_dir);
  const auto sources = load_signals(truth_dir / "sources.csv");
  if (truth.order() != estimate.order()) throw DimensionError("truth and estimate have different mode counts");
  if (truth.shape() != estimate.shape()) throw DimensionError("truth and estimate factor shapes differ");

  const auto err = cpderr(truth, estimate);
  Evaluation ev;
  auto& rep = ev.report;
  rep.seed = config.seed;
  rep.config_hash = config.hash();
  rep.cpderr = err.per_mode_relative_error;
  rep.permutation = err.permutation;
  rep.dropped_estimate_columns = err.dropped_estimate_columns;

  const auto diag_path = estimate_dir / "diagnostics.json";
  if (fs::exists(diag_path)) {
    const auto d = read_json(diag_path);
    rep.algorithm = d.at("algorithm").get<std::string>();
    rep.iterations = d.at("iterations").get<std::size_t>();
    rep.converged = d.at("converged").get<bool>();
    rep.final_relative_residual = d.at("final_relative_residual").get<double>();
    rep.incomplete = d.at("incomplete").get<bool>();
    rep.missing_entries = d.at("missing_entries").get<std::size_t>();
  } else {
    rep.algorithm = "external";
    rep.converged = true;
  }

  // Attenuations are folded into the truth's last mode, so align against
  // that and correlate (scale-invariant) with the raw signals.
  const Eigen::MatrixXd aligned = align_sources(sources.signals, estimate.factors.back(), err);
  const auto corr = correlate_sources(sources.signals, aligned);
  rep.source_labels = sources.labels;
  rep.correlation_r = corr.per_source_r;
  rep.correlation_p = corr.per_source_p;
  ev.aligned_sources.signals = aligned;
  ev.aligned_sources.labels = sources.labels;

  rep.doa_truth = config.scene.sources;
  rep.doa = estimate_doa(estimate, config.scene, err.permutation);
  return ev;
}

EvalReport cmd_evaluate(const fs::path& truth_dir, const fs::path& estimate_dir, const fs::path& out_path) {
  auto ev = evaluate_dirs(truth_dir, estimate_dir);
  save_report(ev.report, out_path);
  return std::move(ev.report);
}

void cmd_slices(const fs::path& tensor_path, std::size_t mode, std::size_t index, const fs::path& out_csv) {
  const auto t = as_incomplete(read_tensor(tensor_path));
  const auto& shape = t.shape();
  if (shape.order() != 3) throw DimensionError("slices need a third-order tensor");
  if (mode < 1 || mode > 3) throw DimensionError("mode must be 1, 2 or 3");
  if (index < 1 || index > shape[mode - 1])
    throw DimensionError("index " + std::to_string(index) + " outside 1.." + std::to_string(shape[mode - 1]));
  const std::size_t fixed = mode - 1;
  std::size_t free_modes[2];
  for (std::size_t n = 0, f = 0; n < 3; ++n)
    if (n != fixed) free_modes[f++] = n;

  std::string out;
  char buf[64];
  std::size_t idx[3];
  idx[fixed] = index - 1;
  for (std::size_t a = 0; a < shape[free_modes[0]]; ++a) {
    idx[free_modes[0]] = a;
    for (std::size_t b = 0; b < shape[free_modes[1]]; ++b) {
      idx[free_modes[1]] = b;
      const std::size_t lin = idx[0] + shape[0] * (idx[1] + shape[1] * idx[2]);
      if (b) out += ',';
      if (t.mask[lin]) {
        std::snprintf(buf, sizeof(buf), "%.17g", std::abs(t.tensor[lin]));
        out += buf;
      }
    }
    out += '\n';
  }
  write_text(out_csv, out);
}

void cmd_plot(const std::vector<fs::path>& csv_paths, const fs::path& out_svg) {
  if (csv_paths.empty()) throw DomainError("plot: no input files");
  std::vector<SourceSet> sets;
  for (const auto& p : csv_paths) sets.push_back(load_signals(p, false));
  const auto& first = sets.front();
  std::vector<svg::Panel> panels;
  for (Eigen::Index c = 0; c < first.signals.cols(); ++c) {
    svg::Panel panel;
    panel.title = first.labels[static_cast<std::size_t>(c)];
    for (std::size_t f = 0; f < sets.size(); ++f) {
      const auto& s = sets[f];
      if (s.signals.cols() != first.signals.cols() || s.signals.rows() != first.signals.rows())
        throw DimensionError("plot: " + csv_paths[f].string() + " does not match the shape of " +
                             csv_paths.front().string());
      svg::Series series;
      series.label = csv_paths[f].stem().string();
      series.values.assign(s.signals.col(c).data(), s.signals.col(c).data() + s.signals.rows());
      panel.series.push_back(std::move(series));
    }
    panels.push_back(std::move(panel));
  }
  write_text(out_svg, svg::line_chart(panels));
}

SeedRange parse_seed_range(const std::string& text) {
  auto parse = [&](std::string_view s) {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty())
      throw ConfigError("--seeds: '" + text + "' is not 'a..b'");
    return v;
  };
  const auto dots = text.find("..");
  SeedRange r;
  if (dots == std::string::npos) {
    r.first = r.last = parse(text);
  } else {
    r.first = parse(std::string_view(text).substr(0, dots));
    r.last = parse(std::string_view(text).substr(dots + 2));
  }
  if (r.last < r.first) throw ConfigError("--seeds: empty range '" + text + "'");
  return r;
}

double median(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

json SweepSummary::to_json() const {
  json rows = json::array();
  for (const auto& r : runs) {
    json row = {{"seed", r.seed}, {"report", r.report.to_json()}};
    if (r.masked_report) row["masked_report"] = r.masked_report->to_json();
    rows.push_back(row);
  }
  json j = {{"runs", rows},
            {"median_cpderr", vector_json(median_cpderr)},
            {"median_azimuth_rel_err", vector_json(median_azimuth_rel_err)},
            {"median_elevation_rel_err", vector_json(median_elevation_rel_err)},
            {"median_min_correlation", std::isfinite(median_min_correlation) ? json(median_min_correlation) : json()},
            {"all_significant", all_significant},
            {"converged_runs", converged_runs}};
  if (!median_masked_cpderr.empty()) j["median_masked_cpderr"] = vector_json(median_masked_cpderr);
  return j;
}

SweepSummary cmd_pipeline(const fs::path& config_path, const fs::path& out_dir, std::optional<SeedRange> seeds) {
  SweepSummary summary;
  if (!seeds) {
    summary.runs.push_back(run_single(config_path, out_dir));
  } else {
    auto config = load_config(config_path);
    if (config.signals != "synthetic" && fs::path(config.signals).is_relative())
      config.signals = fs::absolute(config.base_dir / config.signals).string();
    for (std::uint64_t s = seeds->first;; ++s) {
      config.seed = s;
      const auto dir = out_dir / ("seed_" + std::to_string(s));
      save_config(config, dir / "config.json");
      summary.runs.push_back(run_single(dir / "config.json", dir));
      if (s == seeds->last) break;
    }
  }

  const auto& first = summary.runs.front().report;
  const std::size_t modes = first.cpderr.size();
  const std::size_t nsrc = first.doa_truth.size();
  std::vector<std::vector<double>> err(modes), az(nsrc), el(nsrc), merr(modes);
  std::vector<double> min_r;
  for (const auto& run : summary.runs) {
    const auto& rep = run.report;
    for (std::size_t n = 0; n < modes; ++n) err[n].push_back(rep.cpderr[n]);
    for (std::size_t r = 0; r < nsrc; ++r) {
      az[r].push_back(rep.doa.azimuth_rel_err[r]);
      el[r].push_back(rep.doa.elevation_rel_err[r]);
    }
    double m = std::numeric_limits<double>::infinity();
    for (double r : rep.correlation_r) m = std::min(m, std::isnan(r) ? -1.0 : r);
    min_r.push_back(m);
    if (rep.converged) {
      ++summary.converged_runs;
      for (double p : rep.correlation_p)
        if (!(p < 0.05)) summary.all_significant = false;
    }
    if (run.masked_report)
      for (std::size_t n = 0; n < modes; ++n) merr[n].push_back(run.masked_report->cpderr[n]);
  }
  for (std::size_t n = 0; n < modes; ++n) summary.median_cpderr.push_back(median(err[n]));
  for (std::size_t r = 0; r < nsrc; ++r) {
    summary.median_azimuth_rel_err.push_back(median(az[r]));
    summary.median_elevation_rel_err.push_back(median(el[r]));
  }
  summary.median_min_correlation = median(min_r);
  if (summary.runs.front().masked_report)
    for (std::size_t n = 0; n < modes; ++n) summary.median_masked_cpderr.push_back(median(merr[n]));

  if (seeds) write_json(out_dir / "summary.json", summary.to_json());
  return summary;
}

}  // namespace cpdkit::cli
