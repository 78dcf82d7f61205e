#pragma once

// Text file formats:
//
//   *.tns   line 1 "tns <order> <d1> ... <dN>", then one "<re> <im>" line per
//           entry in first-index-fastest order, printed with 17 significant
//           digits; "* *" marks a missing entry. Factor matrices are order-2
//           tensor files.
//   *.csv   source signals: header of labels, K rows of R reals.
//   config  JSON scene/solver description, parsed strictly.
//   report  JSON evaluation report.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "cpdkit/cpd.hpp"
#include "cpdkit/harmonic.hpp"
#include "cpdkit/tensor.hpp"

namespace cpdkit {

/// Malformed file contents.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Config value missing, unknown or out of bounds.
class ConfigError : public Error {
 public:
  using Error::Error;
};

using AnyTensor = std::variant<DenseTensor, IncompleteTensor>;

std::string serialize_tensor(const DenseTensor& t);
std::string serialize_tensor(const IncompleteTensor& t);
/// Yields an IncompleteTensor iff at least one "* *" line is present.
AnyTensor parse_tensor(const std::string& text);
IncompleteTensor as_incomplete(AnyTensor t);

void write_tensor(const std::filesystem::path& path, const DenseTensor& t);
void write_tensor(const std::filesystem::path& path, const IncompleteTensor& t);
AnyTensor read_tensor(const std::filesystem::path& path);

void write_matrix(const std::filesystem::path& path, const Matrix& m);
Matrix read_matrix(const std::filesystem::path& path);

/// factor1.tns ... factorN.tns in `dir`.
void write_model(const std::filesystem::path& dir, const CpdModel& m);
CpdModel read_model(const std::filesystem::path& dir);

std::string serialize_signals(const SourceSet& s);
/// With require_variation, constant columns are rejected (they cannot be
/// correlated); plotting reads with it off.
SourceSet parse_signals(const std::string& text, bool require_variation = true);
void save_signals(const SourceSet& s, const std::filesystem::path& path);
SourceSet load_signals(const std::filesystem::path& path, bool require_variation = true);

struct SceneConfig {
  DoaScene scene;
  /// nullopt means noiseless (config value "inf").
  std::optional<double> snr_db;
  std::uint64_t seed = 0;
  std::size_t rank = 0;
  CpdAlgorithm algorithm = CpdAlgorithm::GaussNewtonWithAlsWarmstart;
  std::vector<MaskPattern> masks;
  /// "synthetic" or a CSV path (relative paths resolve against base_dir).
  std::string signals = "synthetic";
  MissingDataStrategy missing_data_strategy = MissingDataStrategy::ExpectationImputation;
  std::size_t max_iterations = 500;

  std::filesystem::path base_dir;

  nlohmann::json to_json() const;
  /// FNV-1a 64 of the canonical JSON dump, as 16 hex digits.
  std::string hash() const;
};

SceneConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
SceneConfig load_config(const std::filesystem::path& path);
void save_config(const SceneConfig& c, const std::filesystem::path& path);

struct EvalReport {
  std::uint64_t seed = 0;
  std::string config_hash;

  std::string algorithm;
  std::size_t iterations = 0;
  bool converged = false;
  double final_relative_residual = 0.0;
  bool incomplete = false;
  std::size_t missing_entries = 0;

  std::vector<double> cpderr;
  std::vector<std::optional<std::size_t>> permutation;  // 0-based; written 1-based
  std::vector<std::size_t> dropped_estimate_columns;

  std::vector<std::string> source_labels;
  std::vector<double> correlation_r;
  std::vector<double> correlation_p;

  std::vector<SourceSpec> doa_truth;
  DoaEstimate doa;

  nlohmann::json to_json() const;
  static EvalReport from_json(const nlohmann::json& j);
};

void save_report(const EvalReport& r, const std::filesystem::path& path);
EvalReport load_report(const std::filesystem::path& path);

/// JSON written with 2-space indentation and a trailing newline.
void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace cpdkit
