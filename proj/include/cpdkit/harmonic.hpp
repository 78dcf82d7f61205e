#pragma once

// Plane waves on a half-wavelength uniform rectangular array: every source
// contributes a rank-one term a_r o b_r o (attenuation_r * s_r) where a_r and
// b_r are Vandermonde steering vectors along the two array axes.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cpdkit/tensor.hpp"

namespace cpdkit {

struct SourceSpec {
  double azimuth_deg = 0.0;
  double elevation_deg = 0.0;
  double attenuation = 1.0;
};

struct DoaScene {
  std::size_t grid_m1 = 10;
  std::size_t grid_m2 = 10;
  std::size_t time_len = 15;
  std::vector<SourceSpec> sources;

  void validate() const;
};

/// Three sources at (az, el) = (10, 20), (30, 30), (70, 40) degrees on a
/// 10 x 10 grid with 15 time samples.
DoaScene reference_scene();

/// Real source signals, one per column.
struct SourceSet {
  Eigen::MatrixXd signals;  // K x R
  std::vector<std::string> labels;

  /// Rejects label/column mismatches and zero-variance columns.
  void validate() const;
};

/// Seeded stand-in for occipital resting-state recordings: per channel, a
/// random-amplitude, random-phase mix of 8, 10 and 12 Hz sinusoids sampled
/// at 128 Hz, plus white noise at 10 % of the channel RMS.
SourceSet synthetic_sources(std::size_t samples, std::size_t count, std::uint64_t seed);

enum class MaskKind { DeactivatedSensor, BreaksAtHalf, StartsAtHalf };

std::string to_string(MaskKind k);
MaskKind parse_mask_kind(const std::string& name);

/// A broken sensor at grid position (row, col), 0-based.
struct MaskPattern {
  MaskKind kind = MaskKind::DeactivatedSensor;
  std::size_t row = 0;
  std::size_t col = 0;
};

struct DoaEstimate {
  std::vector<double> azimuth_deg;
  std::vector<double> elevation_deg;
  /// |estimate - truth| / truth, angles in degrees. NaN estimates (unmatched
  /// source, phase outside the unambiguous range) carry +inf error.
  std::vector<double> azimuth_rel_err;
  std::vector<double> elevation_rel_err;
};

/// [1, z, ..., z^{m-1}] with z = exp(i pi sin(el) cos(az)) on axis 1 and
/// z = exp(i pi sin(el) sin(az)) on axis 2.
Vector steering_vector(double azimuth_deg, double elevation_deg, int axis, std::size_t length);

struct SceneTensor {
  DenseTensor tensor;
  CpdModel truth;  // (A, B, attenuated sources)
};

SceneTensor build_scene_tensor(const DoaScene& scene, const SourceSet& sources);

/// t + N where N is seeded circular complex Gaussian noise rescaled so that
/// 20 log10(||t|| / ||N||) == snr_db.
DenseTensor add_noise(const DenseTensor& t, double snr_db, std::uint64_t seed);

/// Least-squares shift ratio <v[0..m-2], v[1..m-1]> / ||v[0..m-2]||^2.
cplx estimate_generator(const Vector& v);

/// Inverse of the steering generator map; returns (azimuth_deg, elevation_deg).
std::pair<double, double> doa_from_generators(cplx z1, cplx z2);

/// DOA per truth source, matched through the given permutation (truth column
/// -> model column). The two-argument form matches on modes 1 and 2 against
/// the scene's steering vectors.
DoaEstimate estimate_doa(const CpdModel& model, const DoaScene& truth,
                         const std::vector<std::optional<std::size_t>>& permutation);
DoaEstimate estimate_doa(const CpdModel& model, const DoaScene& truth);

IncompleteTensor apply_mask(const DenseTensor& t, const std::vector<MaskPattern>& patterns);
IncompleteTensor apply_mask(const IncompleteTensor& t, const std::vector<MaskPattern>& patterns);

}  // namespace cpdkit
