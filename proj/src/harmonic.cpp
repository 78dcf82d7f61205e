#include "cpdkit/harmonic.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "cpdkit/metrics.hpp"
#include "cpdkit/random.hpp"

namespace cpdkit {

namespace {

constexpr double kPi = std::numbers::pi;
double deg2rad(double d) { return d * kPi / 180.0; }
double rad2deg(double r) { return r * 180.0 / kPi; }

void check_angles(double az, double el) {
  if (!(az > 0.0 && az < 90.0)) throw DomainError("azimuth_deg must lie in (0, 90), got " + std::to_string(az));
  if (!(el > 0.0 && el < 90.0)) throw DomainError("elevation_deg must lie in (0, 90), got " + std::to_string(el));
}

std::size_t half_split(std::size_t k) { return (k + 1) / 2; }

}  // namespace

void DoaScene::validate() const {
  if (grid_m1 < 1 || grid_m2 < 1) throw DomainError("grid sizes must be >= 1");
  if (time_len < 2) throw DomainError("time_len must be >= 2");
  if (sources.empty()) throw DomainError("scene needs at least one source");
  for (const auto& s : sources) {
    check_angles(s.azimuth_deg, s.elevation_deg);
    if (!(s.attenuation > 0.0)) throw DomainError("attenuation must be > 0");
  }
}

DoaScene reference_scene() {
  DoaScene s;
  s.sources = {{10.0, 20.0, 1.0}, {30.0, 30.0, 1.0}, {70.0, 40.0, 1.0}};
  return s;
}

void SourceSet::validate() const {
  if (static_cast<std::size_t>(signals.cols()) != labels.size())
    throw DomainError("source labels do not match the signal count");
  for (Eigen::Index r = 0; r < signals.cols(); ++r) {
    const auto col = signals.col(r);
    if ((col.array() - col.mean()).matrix().squaredNorm() == 0.0)
      throw DomainError("source '" + labels[static_cast<std::size_t>(r)] + "' is constant");
  }
}

SourceSet synthetic_sources(std::size_t samples, std::size_t count, std::uint64_t seed) {
  constexpr double rate_hz = 128.0;
  constexpr double freqs_hz[] = {8.0, 10.0, 12.0};
  Rng rng(seed);
  SourceSet set;
  set.signals.resize(static_cast<Eigen::Index>(samples), static_cast<Eigen::Index>(count));
  for (std::size_t r = 0; r < count; ++r) {
    double amp[3], phase[3];
    for (int f = 0; f < 3; ++f) {
      amp[f] = 0.5 + rng.uniform();
      phase[f] = 2.0 * kPi * rng.uniform();
    }
    Eigen::VectorXd clean(static_cast<Eigen::Index>(samples));
    for (std::size_t k = 0; k < samples; ++k) {
      double v = 0.0;
      for (int f = 0; f < 3; ++f) v += amp[f] * std::sin(2.0 * kPi * freqs_hz[f] * static_cast<double>(k) / rate_hz + phase[f]);
      clean(static_cast<Eigen::Index>(k)) = v;
    }
    const double rms = clean.norm() / std::sqrt(static_cast<double>(samples));
    for (std::size_t k = 0; k < samples; ++k)
      set.signals(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(r)) =
          clean(static_cast<Eigen::Index>(k)) + 0.1 * rms * rng.normal();
  }
  if (count == 3)
    set.labels = {"O1", "Oz", "O2"};
  else
    for (std::size_t r = 0; r < count; ++r) set.labels.push_back("S" + std::to_string(r + 1));
  return set;
}

std::string to_string(MaskKind k) {
  switch (k) {
    case MaskKind::DeactivatedSensor: return "deactivated";
    case MaskKind::BreaksAtHalf: return "breaks_at_half";
    case MaskKind::StartsAtHalf: return "starts_at_half";
  }
  return "?";
}

MaskKind parse_mask_kind(const std::string& name) {
  if (name == "deactivated") return MaskKind::DeactivatedSensor;
  if (name == "breaks_at_half") return MaskKind::BreaksAtHalf;
  if (name == "starts_at_half") return MaskKind::StartsAtHalf;
  throw Error("unknown mask kind '" + name + "' (expected deactivated, breaks_at_half or starts_at_half)");
}

Vector steering_vector(double azimuth_deg, double elevation_deg, int axis, std::size_t length) {
  check_angles(azimuth_deg, elevation_deg);
  if (axis != 1 && axis != 2) throw DomainError("axis must be 1 or 2");
  if (length < 1) throw DimensionError("steering vector length must be >= 1");
  const double az = deg2rad(azimuth_deg);
  const double el = deg2rad(elevation_deg);
  const double phase = kPi * std::sin(el) * (axis == 1 ? std::cos(az) : std::sin(az));
  Vector v(static_cast<Eigen::Index>(length));
  for (std::size_t k = 0; k < length; ++k) v(static_cast<Eigen::Index>(k)) = std::polar(1.0, phase * static_cast<double>(k));
  return v;
}

SceneTensor build_scene_tensor(const DoaScene& scene, const SourceSet& sources) {
  scene.validate();
  const auto r = static_cast<Eigen::Index>(scene.sources.size());
  if (sources.signals.cols() != r) throw DimensionError("source count does not match the scene");
  if (static_cast<std::size_t>(sources.signals.rows()) != scene.time_len)
    throw DimensionError("source length does not match time_len");
  Matrix a(scene.grid_m1, r), b(scene.grid_m2, r), s(scene.time_len, r);
  for (Eigen::Index k = 0; k < r; ++k) {
    const auto& src = scene.sources[static_cast<std::size_t>(k)];
    a.col(k) = steering_vector(src.azimuth_deg, src.elevation_deg, 1, scene.grid_m1);
    b.col(k) = steering_vector(src.azimuth_deg, src.elevation_deg, 2, scene.grid_m2);
    s.col(k) = (src.attenuation * sources.signals.col(k)).cast<cplx>();
  }
  CpdModel truth({std::move(a), std::move(b), std::move(s)});
  auto t = reconstruct(truth);
  return {std::move(t), std::move(truth)};
}

DenseTensor add_noise(const DenseTensor& t, double snr_db, std::uint64_t seed) {
  if (!std::isfinite(snr_db)) throw DomainError("snr_db must be finite");
  const double signal = frobenius_norm(t);
  if (signal == 0.0) throw DomainError("add_noise: zero tensor");
  Rng rng(seed);
  DenseTensor noise(t.shape());
  for (std::size_t k = 0; k < noise.size(); ++k) noise[k] = rng.complex_normal();
  const double scale = signal / (frobenius_norm(noise) * std::pow(10.0, snr_db / 20.0));
  DenseTensor out(t.shape());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = t[k] + scale * noise[k];
  return out;
}

cplx estimate_generator(const Vector& v) {
  if (v.size() < 2) throw DimensionError("estimate_generator needs length >= 2");
  const auto m = v.size() - 1;
  const auto head = v.head(m);
  const double denom = head.squaredNorm();
  if (denom == 0.0) throw DomainError("estimate_generator: leading subvector is zero");
  return head.dot(v.tail(m)) / denom;
}

std::pair<double, double> doa_from_generators(cplx z1, cplx z2) {
  const double p1 = std::arg(z1);
  const double p2 = std::arg(z2);
  if (!(p1 > 0.0 && p1 < kPi) || !(p2 > 0.0 && p2 < kPi))
    throw DomainError("generator phase outside (0, pi)");
  const double radial = std::hypot(p1, p2) / kPi;
  if (radial > 1.0) throw DomainError("generator phases exceed the visible region");
  return {rad2deg(std::atan2(p2, p1)), rad2deg(std::asin(radial))};
}

DoaEstimate estimate_doa(const CpdModel& model, const DoaScene& truth,
                         const std::vector<std::optional<std::size_t>>& permutation) {
  if (model.order() < 2 || model.factors[0].rows() < 2 || model.factors[1].rows() < 2)
    throw DimensionError("estimate_doa needs at least two rows in modes 1 and 2");
  if (permutation.size() != truth.sources.size()) throw DimensionError("permutation does not match the scene");
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  constexpr double inf = std::numeric_limits<double>::infinity();
  DoaEstimate est;
  for (std::size_t r = 0; r < truth.sources.size(); ++r) {
    double az = nan, el = nan;
    if (const auto& c = permutation[r]) {
      if (*c >= model.rank()) throw DimensionError("permutation refers to a missing model column");
      const auto col = static_cast<Eigen::Index>(*c);
      const cplx z1 = estimate_generator(model.factors[0].col(col));
      const cplx z2 = estimate_generator(model.factors[1].col(col));
      try {
        std::tie(az, el) = doa_from_generators(z1, z2);
      } catch (const DomainError&) {
      }
    }
    const auto& src = truth.sources[r];
    est.azimuth_deg.push_back(az);
    est.elevation_deg.push_back(el);
    est.azimuth_rel_err.push_back(std::isnan(az) ? inf : std::abs(az - src.azimuth_deg) / src.azimuth_deg);
    est.elevation_rel_err.push_back(std::isnan(el) ? inf : std::abs(el - src.elevation_deg) / src.elevation_deg);
  }
  return est;
}

DoaEstimate estimate_doa(const CpdModel& model, const DoaScene& truth) {
  truth.validate();
  if (model.order() < 2) throw DimensionError("estimate_doa needs at least two modes");
  const auto r = static_cast<Eigen::Index>(truth.sources.size());
  Matrix a(model.factors[0].rows(), r), b(model.factors[1].rows(), r);
  for (Eigen::Index k = 0; k < r; ++k) {
    const auto& s = truth.sources[static_cast<std::size_t>(k)];
    a.col(k) = steering_vector(s.azimuth_deg, s.elevation_deg, 1, static_cast<std::size_t>(a.rows()));
    b.col(k) = steering_vector(s.azimuth_deg, s.elevation_deg, 2, static_cast<std::size_t>(b.rows()));
  }
  const auto report = cpderr(CpdModel({a, b}), CpdModel({model.factors[0], model.factors[1]}));
  return estimate_doa(model, truth, report.permutation);
}

IncompleteTensor apply_mask(const IncompleteTensor& t, const std::vector<MaskPattern>& patterns) {
  const auto& shape = t.shape();
  if (shape.order() != 3) throw DimensionError("apply_mask expects a third-order tensor");
  IncompleteTensor out = t;
  const std::size_t k_len = shape[2];
  const std::size_t split = half_split(k_len);
  for (const auto& p : patterns) {
    if (p.row >= shape[0] || p.col >= shape[1])
      throw DimensionError("mask sensor (" + std::to_string(p.row + 1) + ", " + std::to_string(p.col + 1) +
                           ") is outside the " + std::to_string(shape[0]) + "x" + std::to_string(shape[1]) + " grid");
    std::size_t lo = 0, hi = k_len;
    if (p.kind == MaskKind::BreaksAtHalf) lo = split;
    if (p.kind == MaskKind::StartsAtHalf) hi = split;
    for (std::size_t k = lo; k < hi; ++k) out.mask[p.row + shape[0] * (p.col + shape[1] * k)] = false;
  }
  return out;
}

IncompleteTensor apply_mask(const DenseTensor& t, const std::vector<MaskPattern>& patterns) {
  return apply_mask(IncompleteTensor(t), patterns);
}

}  // namespace cpdkit
