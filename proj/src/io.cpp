#include "cpdkit/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace cpdkit {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%#.17g", v);
  return buf;
}

double parse_real(std::string_view token, const std::string& what) {
  double v = 0.0;
  const char* first = token.data();
  const char* last = first + token.size();
  if (!token.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last) throw ParseError(what + ": '" + std::string(token) + "' is not a number");
  if (!std::isfinite(v)) throw ParseError(what + ": '" + std::string(token) + "' is not finite");
  return v;
}

std::size_t parse_count(std::string_view token, const std::string& what) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc{} || ptr != token.data() + token.size())
    throw ParseError(what + ": '" + std::string(token) + "' is not a non-negative integer");
  return v;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

std::string header_line(const Shape& shape) {
  std::string h = "tns " + std::to_string(shape.order());
  for (auto d : shape.dims()) h += " " + std::to_string(d);
  return h + "\n";
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double number_from(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

}  // namespace

std::string serialize_tensor(const DenseTensor& t) { return serialize_tensor(IncompleteTensor(t)); }

std::string serialize_tensor(const IncompleteTensor& t) {
  std::string out = header_line(t.shape());
  out.reserve(out.size() + t.tensor.size() * 48);
  for (std::size_t k = 0; k < t.tensor.size(); ++k) {
    if (!t.mask[k]) {
      out += "* *\n";
      continue;
    }
    const auto v = t.tensor[k];
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
      throw DomainError("serialize_tensor: non-finite value at position " + std::to_string(k + 1));
    out += format_real(v.real());
    out += ' ';
    out += format_real(v.imag());
    out += '\n';
  }
  return out;
}

AnyTensor parse_tensor(const std::string& text) {
  const auto lines = split_lines(text);
  if (lines.empty()) throw ParseError("tensor file is empty");
  const auto head = split_ws(lines[0]);
  if (head.size() < 2 || head[0] != "tns") throw ParseError("tensor header must start with 'tns <order>'");
  const auto order = parse_count(head[1], "tensor order");
  if (order < 1 || head.size() != order + 2)
    throw ParseError("tensor header declares order " + std::string(head[1]) + " but lists " +
                     std::to_string(head.size() - 2) + " extents");
  std::vector<std::size_t> dims;
  for (std::size_t n = 0; n < order; ++n) dims.push_back(parse_count(head[n + 2], "tensor extent"));
  Shape shape = [&] {
    try {
      return Shape(dims);
    } catch (const DimensionError& e) {
      throw ParseError(std::string("tensor header: ") + e.what());
    }
  }();
  const std::size_t count = shape.element_count();
  if (lines.size() - 1 != count)
    throw ParseError("tensor file has " + std::to_string(lines.size() - 1) + " entries, header expects " +
                     std::to_string(count));
  DenseTensor t(shape);
  std::vector<bool> mask(count, true);
  bool any_missing = false;
  for (std::size_t k = 0; k < count; ++k) {
    const auto cells = split_ws(lines[k + 1]);
    const std::string where = "tensor line " + std::to_string(k + 2);
    if (cells.size() != 2) throw ParseError(where + ": expected '<re> <im>'");
    if (cells[0] == "*" && cells[1] == "*") {
      mask[k] = false;
      any_missing = true;
      continue;
    }
    t[k] = {parse_real(cells[0], where), parse_real(cells[1], where)};
  }
  if (any_missing) return IncompleteTensor(std::move(t), std::move(mask));
  return t;
}

IncompleteTensor as_incomplete(AnyTensor t) {
  if (auto* d = std::get_if<DenseTensor>(&t)) return IncompleteTensor(std::move(*d));
  return std::get<IncompleteTensor>(std::move(t));
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

void write_tensor(const fs::path& path, const DenseTensor& t) { write_text(path, serialize_tensor(t)); }
void write_tensor(const fs::path& path, const IncompleteTensor& t) { write_text(path, serialize_tensor(t)); }

AnyTensor read_tensor(const fs::path& path) {
  try {
    return parse_tensor(read_text(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_matrix(const fs::path& path, const Matrix& m) {
  DenseTensor t(Shape{static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())},
                std::vector<cplx>(m.data(), m.data() + m.size()));
  write_tensor(path, t);
}

Matrix read_matrix(const fs::path& path) {
  auto any = read_tensor(path);
  const auto* t = std::get_if<DenseTensor>(&any);
  if (!t) throw ParseError(path.string() + ": factor matrix must not contain missing entries");
  if (t->order() != 2) throw ParseError(path.string() + ": factor matrix must be an order-2 tensor");
  Matrix m(t->shape()[0], t->shape()[1]);
  std::copy(t->values().begin(), t->values().end(), m.data());
  return m;
}

void write_model(const fs::path& dir, const CpdModel& m) {
  for (std::size_t n = 0; n < m.order(); ++n)
    write_matrix(dir / ("factor" + std::to_string(n + 1) + ".tns"), m.factors[n]);
}

CpdModel read_model(const fs::path& dir) {
  std::vector<Matrix> factors;
  for (std::size_t n = 1;; ++n) {
    const auto p = dir / ("factor" + std::to_string(n) + ".tns");
    if (!fs::exists(p)) break;
    factors.push_back(read_matrix(p));
  }
  if (factors.empty()) throw ParseError("no factor1.tns found in " + dir.string());
  return CpdModel(std::move(factors));
}

std::string serialize_signals(const SourceSet& s) {
  if (static_cast<std::size_t>(s.signals.cols()) != s.labels.size())
    throw DimensionError("signal labels do not match the column count");
  std::string out;
  for (std::size_t r = 0; r < s.labels.size(); ++r) out += (r ? "," : "") + s.labels[r];
  out += '\n';
  char buf[64];
  for (Eigen::Index k = 0; k < s.signals.rows(); ++k) {
    for (Eigen::Index r = 0; r < s.signals.cols(); ++r) {
      std::snprintf(buf, sizeof(buf), "%.17g", s.signals(k, r));
      if (r) out += ',';
      out += buf;
    }
    out += '\n';
  }
  return out;
}

SourceSet parse_signals(const std::string& text, bool require_variation) {
  const auto lines = split_lines(text);
  if (lines.empty()) throw ParseError("signal CSV is empty");
  auto split_csv = [](std::string_view line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      cells.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    return cells;
  };
  SourceSet s;
  s.labels = split_csv(lines[0]);
  const auto cols = s.labels.size();
  if (lines.size() < 2) throw ParseError("signal CSV has no data rows");
  s.signals.resize(static_cast<Eigen::Index>(lines.size() - 1), static_cast<Eigen::Index>(cols));
  for (std::size_t k = 1; k < lines.size(); ++k) {
    const auto cells = split_csv(lines[k]);
    const std::string where = "signal CSV row " + std::to_string(k + 1);
    if (cells.size() != cols)
      throw ParseError(where + ": expected " + std::to_string(cols) + " cells, found " + std::to_string(cells.size()));
    for (std::size_t r = 0; r < cols; ++r) {
      if (cells[r].empty()) throw ParseError(where + ": empty cell");
      s.signals(static_cast<Eigen::Index>(k - 1), static_cast<Eigen::Index>(r)) = parse_real(cells[r], where);
    }
  }
  if (!require_variation) return s;
  try {
    s.validate();
  } catch (const DomainError& e) {
    throw ParseError(std::string("signal CSV: ") + e.what());
  }
  return s;
}

void save_signals(const SourceSet& s, const fs::path& path) { write_text(path, serialize_signals(s)); }

SourceSet load_signals(const fs::path& path, bool require_variation) {
  try {
    return parse_signals(read_text(path), require_variation);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Config

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, _] : obj.items())
    if (!allowed.count(key)) throw ConfigError("unknown key '" + (where.empty() ? key : where + "." + key) + "'");
}

const json& require(const json& obj, const std::string& key, const std::string& where) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw ConfigError("missing required key '" + where + key + "'");
  return *it;
}

std::size_t get_count(const json& v, const std::string& key, std::size_t min) {
  if (!v.is_number_integer() || (v.is_number_integer() && v.get<std::int64_t>() < 0))
    throw ConfigError("'" + key + "' must be a non-negative integer");
  const auto n = v.get<std::uint64_t>();
  if (n < min) throw ConfigError("'" + key + "' = " + std::to_string(n) + " must be >= " + std::to_string(min));
  return static_cast<std::size_t>(n);
}

double get_real(const json& v, const std::string& key) {
  if (!v.is_number()) throw ConfigError("'" + key + "' must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ConfigError("'" + key + "' must be finite");
  return d;
}

double get_open_interval(const json& v, const std::string& key, double lo, double hi) {
  const double d = get_real(v, key);
  if (!(d > lo && d < hi)) {
    std::ostringstream os;
    os << "'" << key << "' = " << d << " is outside (" << lo << ", " << hi << ")";
    throw ConfigError(os.str());
  }
  return d;
}

}  // namespace

SceneConfig parse_config(const json& doc, const fs::path& base_dir) {
  reject_unknown(doc,
                 {"grid_m1", "grid_m2", "time_len", "snr_db", "seed", "rank", "algorithm", "sources", "masks",
                  "signals", "missing_data_strategy", "max_iterations"},
                 "");
  SceneConfig c;
  c.base_dir = base_dir;
  c.scene.grid_m1 = get_count(require(doc, "grid_m1", ""), "grid_m1", 1);
  c.scene.grid_m2 = get_count(require(doc, "grid_m2", ""), "grid_m2", 1);
  c.scene.time_len = get_count(require(doc, "time_len", ""), "time_len", 2);

  const auto& snr = require(doc, "snr_db", "");
  if (snr.is_string() && snr.get<std::string>() == "inf")
    c.snr_db.reset();
  else
    c.snr_db = get_real(snr, "snr_db");

  const auto& seed = require(doc, "seed", "");
  if (!seed.is_number_unsigned()) throw ConfigError("'seed' must be a non-negative integer");
  c.seed = seed.get<std::uint64_t>();
  c.rank = get_count(require(doc, "rank", ""), "rank", 1);

  const auto& alg = require(doc, "algorithm", "");
  if (!alg.is_string()) throw ConfigError("'algorithm' must be a string");
  try {
    c.algorithm = parse_algorithm(alg.get<std::string>());
  } catch (const Error& e) {
    throw ConfigError(std::string("'algorithm': ") + e.what());
  }

  const auto& sources = require(doc, "sources", "");
  if (!sources.is_array() || sources.empty()) throw ConfigError("'sources' must be a non-empty array");
  for (std::size_t r = 0; r < sources.size(); ++r) {
    const std::string where = "sources[" + std::to_string(r) + "]";
    const auto& s = sources[r];
    reject_unknown(s, {"azimuth_deg", "elevation_deg", "attenuation"}, where);
    SourceSpec spec;
    spec.azimuth_deg = get_open_interval(require(s, "azimuth_deg", where + "."), where + ".azimuth_deg", 0.0, 90.0);
    spec.elevation_deg =
        get_open_interval(require(s, "elevation_deg", where + "."), where + ".elevation_deg", 0.0, 90.0);
    if (s.contains("attenuation")) {
      spec.attenuation = get_real(s["attenuation"], where + ".attenuation");
      if (!(spec.attenuation > 0.0)) throw ConfigError("'" + where + ".attenuation' must be > 0");
    }
    c.scene.sources.push_back(spec);
  }

  if (doc.contains("masks")) {
    const auto& masks = doc["masks"];
    if (!masks.is_array()) throw ConfigError("'masks' must be an array");
    for (std::size_t m = 0; m < masks.size(); ++m) {
      const std::string where = "masks[" + std::to_string(m) + "]";
      const auto& entry = masks[m];
      reject_unknown(entry, {"kind", "sensor"}, where);
      const auto& kind = require(entry, "kind", where + ".");
      if (!kind.is_string()) throw ConfigError("'" + where + ".kind' must be a string");
      MaskPattern p;
      try {
        p.kind = parse_mask_kind(kind.get<std::string>());
      } catch (const Error& e) {
        throw ConfigError("'" + where + ".kind': " + e.what());
      }
      const auto& sensor = require(entry, "sensor", where + ".");
      if (!sensor.is_array() || sensor.size() != 2)
        throw ConfigError("'" + where + ".sensor' must be [row, col] (1-based)");
      const auto row = get_count(sensor[0], where + ".sensor[0]", 1);
      const auto col = get_count(sensor[1], where + ".sensor[1]", 1);
      if (row > c.scene.grid_m1 || col > c.scene.grid_m2)
        throw ConfigError("'" + where + ".sensor' = [" + std::to_string(row) + ", " + std::to_string(col) +
                          "] is outside the " + std::to_string(c.scene.grid_m1) + "x" +
                          std::to_string(c.scene.grid_m2) + " grid");
      p.row = row - 1;
      p.col = col - 1;
      c.masks.push_back(p);
    }
  }

  const auto& signals = require(doc, "signals", "");
  if (!signals.is_string() || signals.get<std::string>().empty())
    throw ConfigError("'signals' must be 'synthetic' or a CSV path");
  c.signals = signals.get<std::string>();

  if (doc.contains("missing_data_strategy")) {
    const auto& v = doc["missing_data_strategy"];
    if (!v.is_string()) throw ConfigError("'missing_data_strategy' must be a string");
    try {
      c.missing_data_strategy = parse_missing_strategy(v.get<std::string>());
    } catch (const Error& e) {
      throw ConfigError(std::string("'missing_data_strategy': ") + e.what());
    }
  }
  if (doc.contains("max_iterations")) c.max_iterations = get_count(doc["max_iterations"], "max_iterations", 1);
  return c;
}

SceneConfig load_config(const fs::path& path) {
  json doc;
  try {
    doc = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_config(doc, path.parent_path());
}

json SceneConfig::to_json() const {
  json j;
  j["grid_m1"] = scene.grid_m1;
  j["grid_m2"] = scene.grid_m2;
  j["time_len"] = scene.time_len;
  j["snr_db"] = snr_db ? json(*snr_db) : json("inf");
  j["seed"] = seed;
  j["rank"] = rank;
  j["algorithm"] = to_string(algorithm);
  j["sources"] = json::array();
  for (const auto& s : scene.sources)
    j["sources"].push_back(
        {{"azimuth_deg", s.azimuth_deg}, {"elevation_deg", s.elevation_deg}, {"attenuation", s.attenuation}});
  j["masks"] = json::array();
  for (const auto& m : masks) j["masks"].push_back({{"kind", to_string(m.kind)}, {"sensor", {m.row + 1, m.col + 1}}});
  j["signals"] = signals;
  j["missing_data_strategy"] = to_string(missing_data_strategy);
  j["max_iterations"] = max_iterations;
  return j;
}

std::string SceneConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : to_json().dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void save_config(const SceneConfig& c, const fs::path& path) { write_json(path, c.to_json()); }

// ---------------------------------------------------------------------------
// Report

json EvalReport::to_json() const {
  json j;
  j["provenance"] = {{"seed", seed}, {"config_hash", config_hash}};
  j["solver"] = {{"algorithm", algorithm},
                 {"iterations", iterations},
                 {"converged", converged},
                 {"final_relative_residual", number_or_null(final_relative_residual)},
                 {"incomplete", incomplete},
                 {"missing_entries", missing_entries}};
  json perm = json::array();
  for (const auto& p : permutation) perm.push_back(p ? json(*p + 1) : json(nullptr));
  json dropped = json::array();
  for (auto d : dropped_estimate_columns) dropped.push_back(d + 1);
  json errs = json::array();
  for (double e : cpderr) errs.push_back(number_or_null(e));
  j["cpderr"] = {{"per_mode", errs}, {"permutation", perm}, {"dropped_estimate_columns", dropped}};

  json corr = json::array();
  for (std::size_t r = 0; r < correlation_r.size(); ++r)
    corr.push_back({{"label", r < source_labels.size() ? source_labels[r] : ""},
                    {"r", number_or_null(correlation_r[r])},
                    {"p", number_or_null(correlation_p[r])}});
  j["correlation"] = corr;

  json doa_j = json::array();
  for (std::size_t r = 0; r < doa_truth.size(); ++r)
    doa_j.push_back({{"azimuth_deg_true", doa_truth[r].azimuth_deg},
                     {"elevation_deg_true", doa_truth[r].elevation_deg},
                     {"azimuth_deg", number_or_null(doa.azimuth_deg[r])},
                     {"elevation_deg", number_or_null(doa.elevation_deg[r])},
                     {"azimuth_rel_err", number_or_null(doa.azimuth_rel_err[r])},
                     {"elevation_rel_err", number_or_null(doa.elevation_rel_err[r])}});
  j["doa"] = doa_j;
  return j;
}

EvalReport EvalReport::from_json(const json& j) {
  EvalReport r;
  try {
    r.seed = j.at("provenance").at("seed").get<std::uint64_t>();
    r.config_hash = j.at("provenance").at("config_hash").get<std::string>();
    const auto& s = j.at("solver");
    r.algorithm = s.at("algorithm").get<std::string>();
    r.iterations = s.at("iterations").get<std::size_t>();
    r.converged = s.at("converged").get<bool>();
    r.final_relative_residual = number_from(s.at("final_relative_residual"));
    r.incomplete = s.at("incomplete").get<bool>();
    r.missing_entries = s.at("missing_entries").get<std::size_t>();
    for (const auto& e : j.at("cpderr").at("per_mode")) r.cpderr.push_back(number_from(e));
    for (const auto& p : j.at("cpderr").at("permutation"))
      r.permutation.push_back(p.is_null() ? std::nullopt : std::optional<std::size_t>(p.get<std::size_t>() - 1));
    for (const auto& d : j.at("cpderr").at("dropped_estimate_columns"))
      r.dropped_estimate_columns.push_back(d.get<std::size_t>() - 1);
    for (const auto& c : j.at("correlation")) {
      r.source_labels.push_back(c.at("label").get<std::string>());
      r.correlation_r.push_back(number_from(c.at("r")));
      r.correlation_p.push_back(number_from(c.at("p")));
    }
    constexpr double inf = std::numeric_limits<double>::infinity();
    for (const auto& d : j.at("doa")) {
      r.doa_truth.push_back({d.at("azimuth_deg_true").get<double>(), d.at("elevation_deg_true").get<double>(), 1.0});
      r.doa.azimuth_deg.push_back(number_from(d.at("azimuth_deg")));
      r.doa.elevation_deg.push_back(number_from(d.at("elevation_deg")));
      const auto ae = number_from(d.at("azimuth_rel_err"));
      const auto ee = number_from(d.at("elevation_rel_err"));
      r.doa.azimuth_rel_err.push_back(std::isnan(ae) ? inf : ae);
      r.doa.elevation_rel_err.push_back(std::isnan(ee) ? inf : ee);
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("report: ") + e.what());
  }
  return r;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void save_report(const EvalReport& r, const fs::path& path) { write_json(path, r.to_json()); }
EvalReport load_report(const fs::path& path) { return EvalReport::from_json(read_json(path)); }

}  // namespace cpdkit
