#pragma once

#include <algorithm>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "eco/harness/training.hpp"
#include "eco/memory.hpp"

namespace eco::cli {

using Json = nlohmann::json;

/// Malformed or out-of-domain configuration. Maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A training run plus the storage width used for bytes/param accounting.
struct ExperimentConfig {
  harness::TrainConfig train;
  std::optional<StorageFormat> weight_format;  ///< defaults from the grid

  bool operator==(const ExperimentConfig&) const = default;
};

// ---------------------------------------------------------------------------
// Key checking
// ---------------------------------------------------------------------------

inline std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

/// Closest allowed key, if any lies within edit distance 2. Ties go to the
/// key sharing the longest prefix.
inline std::optional<std::string> nearest_key(std::string_view key, const std::vector<std::string>& allowed) {
  auto prefix = [&](std::string_view k) {
    std::size_t n = 0;
    while (n < k.size() && n < key.size() && k[n] == key[n]) ++n;
    return n;
  };
  std::optional<std::string> best;
  std::size_t best_d = 3, best_p = 0;
  for (const std::string& k : allowed) {
    const std::size_t d = edit_distance(key, k);
    const std::size_t p = prefix(k);
    if (d < best_d || (d == best_d && best && p > best_p)) {
      best_d = d;
      best_p = p;
      best = k;
    }
  }
  return best;
}

namespace detail {

inline std::string join_path(const std::string& path, std::string_view key) {
  return path.empty() ? std::string(key) : path + "." + std::string(key);
}

/// Read-only view of one JSON object that rejects keys outside `allowed`.
class ObjectReader {
 public:
  ObjectReader(const Json& j, std::string path, std::vector<std::string> allowed)
      : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + "expected an object");
    for (const auto& [k, v] : j_.items()) {
      if (std::find(allowed.begin(), allowed.end(), k) != allowed.end()) continue;
      std::string msg = "unknown key '" + join_path(path_, k) + "'";
      if (auto s = nearest_key(k, allowed)) msg += " (did you mean '" + *s + "'?)";
      throw ConfigError(msg);
    }
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const Json& raw(const std::string& key) const {
    if (!has(key)) throw ConfigError("missing key '" + join_path(path_, key) + "'");
    return j_.at(key);
  }

  std::string path(const std::string& key) const { return join_path(path_, key); }

  double real(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    const Json& v = j_.at(key);
    if (!v.is_number()) throw ConfigError("'" + path(key) + "' must be a number");
    return v.get<double>();
  }

  std::uint64_t natural(const std::string& key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    const Json& v = j_.at(key);
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer()) throw ConfigError("'" + path(key) + "' must be >= 0");
    throw ConfigError("'" + path(key) + "' must be a non-negative integer");
  }

  bool boolean(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const Json& v = j_.at(key);
    if (!v.is_boolean()) throw ConfigError("'" + path(key) + "' must be true or false");
    return v.get<bool>();
  }

  std::string string(const std::string& key, const std::string& fallback) const {
    if (!has(key)) return fallback;
    const Json& v = j_.at(key);
    if (!v.is_string()) throw ConfigError("'" + path(key) + "' must be a string");
    return v.get<std::string>();
  }

  std::string where() const { return path_.empty() ? "" : "'" + path_ + "': "; }

 private:
  const Json& j_;
  std::string path_;
};

template <typename T>
T pick(const std::string& field, const std::string& value,
       const std::vector<std::pair<std::string, T>>& options) {
  std::string names;
  for (const auto& [name, v] : options) {
    if (name == value) return v;
    names += (names.empty() ? "" : ", ") + name;
  }
  throw ConfigError("'" + field + "' must be one of " + names + " (got '" + value + "')");
}

template <typename T>
std::string name_of(const T& value, const std::vector<std::pair<std::string, T>>& options) {
  for (const auto& [name, v] : options)
    if (v == value) return name;
  return "?";
}

inline const std::vector<std::pair<std::string, Mode>>& mode_names() {
  static const std::vector<std::pair<std::string, Mode>> v{
      {"mw", Mode::MasterWeights}, {"naive", Mode::Naive}, {"eco", Mode::Eco}, {"exact", Mode::ExactInjection}};
  return v;
}

inline const std::vector<std::pair<std::string, OptimizerKind>>& optimizer_names() {
  static const std::vector<std::pair<std::string, OptimizerKind>> v{{"sgdm", OptimizerKind::Sgdm},
                                                                    {"adam", OptimizerKind::Adam}};
  return v;
}

inline const std::vector<std::pair<std::string, Rounding>>& rounding_names() {
  static const std::vector<std::pair<std::string, Rounding>> v{{"rtn", Rounding::RTN}, {"sr", Rounding::SR}};
  return v;
}

inline const std::vector<std::pair<std::string, Granularity>>& granularity_names() {
  static const std::vector<std::pair<std::string, Granularity>> v{{"tensor", Granularity::TensorWise},
                                                                  {"row", Granularity::RowWise}};
  return v;
}

inline const std::vector<std::pair<std::string, StorageFormat>>& storage_names() {
  static const std::vector<std::pair<std::string, StorageFormat>> v{
      {"fp32", StorageFormat::Fp32}, {"bf16", StorageFormat::Bf16}, {"fp8", StorageFormat::Fp8},
      {"int4", StorageFormat::Int4}, {"none", StorageFormat::None}};
  return v;
}

// Wraps a domain check so the message carries the config path.
template <typename F>
void checked(const std::string& path, F&& f) {
  try {
    f();
  } catch (const DomainError& e) {
    throw ConfigError("'" + path + "': " + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError("'" + path + "': " + e.what());
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

inline QuantSpec parse_quant(const Json& j, const std::string& path) {
  detail::ObjectReader r(j, path, {"grid", "rho", "delta", "bits", "rounding", "granularity", "zero_point"});
  const std::string grid = r.string("grid", "identity");
  QuantSpec q;
  if (grid == "identity") {
    q.grid = Identity{};
  } else if (grid == "uniform_max") {
    q.grid = UniformMax{r.real("rho", 1.0)};
  } else if (grid == "fixed_step") {
    q.grid = FixedStep{r.real("delta", 1.0)};
  } else if (grid == "fp8_e4m3") {
    q.grid = Fp8E4M3{};
  } else if (grid == "int_symmetric") {
    q.grid = IntSymmetric{static_cast<unsigned>(r.natural("bits", 8))};
  } else if (grid == "noise_model") {
    q.grid = NoiseModel{r.real("delta", 1.0)};
  } else {
    throw ConfigError("'" + r.path("grid") +
                      "' must be one of identity, uniform_max, fixed_step, fp8_e4m3, int_symmetric, noise_model "
                      "(got '" + grid + "')");
  }
  q.rounding = detail::pick(r.path("rounding"), r.string("rounding", "rtn"), detail::rounding_names());
  q.granularity = detail::pick(r.path("granularity"), r.string("granularity", "tensor"), detail::granularity_names());
  q.zero_point = r.real("zero_point", 0.0);
  detail::checked(path, [&] { q.validate(); });
  if (q.zero_point != 0.0) throw ConfigError("'" + r.path("zero_point") + "' must be 0 for training");
  return q;
}

inline harness::ObjectiveSpec parse_objective(const Json& j, const std::string& path) {
  const std::string kind = j.is_object() && j.contains("kind") && j.at("kind").is_string()
                               ? j.at("kind").get<std::string>()
                               : "";
  if (kind == "quadratic_1d") {
    detail::ObjectReader r(j, path, {"kind", "L"});
    const double L = r.real("L", 1.0);
    if (!(L >= 0.0)) throw ConfigError("'" + r.path("L") + "' must be >= 0");
    return harness::Quadratic1DSpec{L};
  }
  if (kind == "quadratic_nd") {
    detail::ObjectReader r(j, path, {"kind", "dim", "eig_min", "eig_max", "rotate"});
    harness::QuadraticNDSpec s{r.natural("dim", 10), r.real("eig_min", 0.1), r.real("eig_max", 1.0),
                               r.boolean("rotate", true)};
    if (s.dim == 0) throw ConfigError("'" + r.path("dim") + "' must be positive");
    if (!(s.eig_min >= 0.0)) throw ConfigError("'" + r.path("eig_min") + "' must be >= 0");
    if (!(s.eig_max >= s.eig_min)) throw ConfigError("'" + r.path("eig_max") + "' must be >= eig_min");
    return s;
  }
  if (kind == "linear_regression") {
    detail::ObjectReader r(j, path, {"kind", "samples", "dim", "noise"});
    harness::LinearRegressionSpec s{r.natural("samples", 64), r.natural("dim", 8), r.real("noise", 0.1)};
    if (s.samples == 0) throw ConfigError("'" + r.path("samples") + "' must be positive");
    if (s.dim == 0) throw ConfigError("'" + r.path("dim") + "' must be positive");
    if (!(s.noise >= 0.0)) throw ConfigError("'" + r.path("noise") + "' must be >= 0");
    return s;
  }
  if (kind == "mlp2") {
    detail::ObjectReader r(j, path, {"kind", "in", "hidden", "out", "samples", "noise"});
    harness::Mlp2Spec s{r.natural("in", 8), r.natural("hidden", 16), r.natural("out", 1), r.natural("samples", 128),
                        r.real("noise", 0.05)};
    for (const char* k : {"in", "hidden", "out", "samples"})
      if (r.natural(k, 1) == 0) throw ConfigError("'" + r.path(k) + "' must be positive");
    if (!(s.noise >= 0.0)) throw ConfigError("'" + r.path("noise") + "' must be >= 0");
    return s;
  }
  throw ConfigError("'" + detail::join_path(path, "kind") +
                    "' must be one of quadratic_1d, quadratic_nd, linear_regression, mlp2");
}

inline Hyper parse_hyper(const Json& j, const std::string& path) {
  detail::ObjectReader r(j, path, {"eta", "beta1", "beta2", "epsilon", "weight_decay", "clip_norm"});
  Hyper h;
  h.eta = r.real("eta", h.eta);
  h.beta1 = r.real("beta1", h.beta1);
  h.beta2 = r.real("beta2", h.beta2);
  h.epsilon = r.real("epsilon", h.epsilon);
  h.weight_decay = r.real("weight_decay", h.weight_decay);
  if (r.has("clip_norm") && !r.raw("clip_norm").is_null()) h.clip_norm = r.real("clip_norm", 1.0);
  detail::checked(path, [&] { h.validate(); });
  return h;
}

inline harness::LrSchedule parse_schedule(const Json& j, const std::string& path) {
  detail::ObjectReader r(j, path, {"kind", "peak", "floor", "warmup_frac"});
  harness::LrSchedule s;
  const std::string kind = r.string("kind", "constant");
  if (kind == "constant") {
    for (const char* k : {"peak", "floor", "warmup_frac"})
      if (r.has(k)) throw ConfigError("'" + r.path(k) + "' only applies to the cosine schedule");
    return s;
  }
  if (kind != "cosine") throw ConfigError("'" + r.path("kind") + "' must be one of constant, cosine");
  s.kind = harness::LrSchedule::Kind::Cosine;
  s.peak = r.real("peak", 0.0);
  s.floor = r.real("floor", 0.0);
  s.warmup_frac = r.real("warmup_frac", 0.0);
  detail::checked(path, [&] { s.validate(); });
  return s;
}

inline const std::vector<std::string>& top_level_keys() {
  static const std::vector<std::string> v{"objective", "optimizer",     "mode",       "hyper",
                                          "quant",     "group_quant",   "quantize_io", "steps",
                                          "seed",      "schedule",      "metrics_every", "batch_size",
                                          "init_scale", "init",         "weight_format"};
  return v;
}

inline ExperimentConfig parse_config_json(const Json& j) {
  detail::ObjectReader r(j, "", top_level_keys());
  ExperimentConfig out;
  harness::TrainConfig& c = out.train;
  c.objective = parse_objective(r.raw("objective"), "objective");
  c.optimizer = detail::pick("optimizer", r.string("optimizer", "sgdm"), detail::optimizer_names());
  c.mode = detail::pick("mode", r.string("mode", "eco"), detail::mode_names());
  if (r.has("hyper")) c.hyper = parse_hyper(r.raw("hyper"), "hyper");
  if (r.has("quant")) c.quant = parse_quant(r.raw("quant"), "quant");
  if (r.has("group_quant")) {
    const Json& g = r.raw("group_quant");
    if (!g.is_object()) throw ConfigError("'group_quant' must be an object");
    for (const auto& [name, spec] : g.items()) c.group_quant[name] = parse_quant(spec, "group_quant." + name);
  }
  c.quantize_io = r.boolean("quantize_io", false);
  c.steps = r.natural("steps", 0);
  c.seed = r.natural("seed", 0);
  if (r.has("schedule")) c.schedule = parse_schedule(r.raw("schedule"), "schedule");
  c.metrics_every = r.natural("metrics_every", 1);
  if (c.metrics_every == 0) throw ConfigError("'metrics_every' must be >= 1");
  c.batch_size = r.natural("batch_size", 0);
  c.init_scale = r.real("init_scale", 1.0);
  if (!(c.init_scale >= 0.0)) throw ConfigError("'init_scale' must be >= 0");
  if (r.has("init")) {
    const Json& v = r.raw("init");
    if (!v.is_array()) throw ConfigError("'init' must be an array of numbers");
    for (const Json& x : v) {
      if (!x.is_number()) throw ConfigError("'init' must be an array of numbers");
      c.init.push_back(x.get<double>());
    }
  }
  if (r.has("weight_format"))
    out.weight_format = detail::pick("weight_format", r.string("weight_format", ""), detail::storage_names());
  if (c.mode == Mode::ExactInjection && c.optimizer != OptimizerKind::Sgdm)
    throw ConfigError("'mode': exact requires optimizer sgdm");

  // Shape-level checks need the built objective.
  try {
    c.validate();
    const harness::Objective obj = harness::build_objective(c.objective, c.seed);
    const auto layout = obj.layout();
    for (const auto& [name, q] : c.group_quant) {
      (void)q;
      if (std::none_of(layout.begin(), layout.end(), [&](const harness::ParamInfo& p) { return p.name == name; }))
        throw ConfigError("'group_quant." + name + "' names no parameter of this objective");
    }
    if (!c.init.empty() && (layout.size() != 1 || layout[0].shape != Shape{c.init.size()}))
      throw ConfigError("'init' must match the single parameter tensor of the objective");
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  return out;
}

inline ExperimentConfig parse_config_text(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what());
  }
  return parse_config_json(j);
}

inline ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline Json quant_to_json(const QuantSpec& q) {
  Json j;
  std::visit(
      [&](const auto& g) {
        using G = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<G, Identity>) {
          j["grid"] = "identity";
        } else if constexpr (std::is_same_v<G, UniformMax>) {
          j["grid"] = "uniform_max";
          j["rho"] = g.rho;
        } else if constexpr (std::is_same_v<G, FixedStep>) {
          j["grid"] = "fixed_step";
          j["delta"] = g.delta;
        } else if constexpr (std::is_same_v<G, Fp8E4M3>) {
          j["grid"] = "fp8_e4m3";
        } else if constexpr (std::is_same_v<G, IntSymmetric>) {
          j["grid"] = "int_symmetric";
          j["bits"] = g.bits;
        } else {
          j["grid"] = "noise_model";
          j["delta"] = g.delta;
        }
      },
      q.grid);
  j["rounding"] = detail::name_of(q.rounding, detail::rounding_names());
  j["granularity"] = detail::name_of(q.granularity, detail::granularity_names());
  j["zero_point"] = q.zero_point;
  return j;
}

inline Json objective_to_json(const harness::ObjectiveSpec& spec) {
  return std::visit(
      [](const auto& s) -> Json {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, harness::Quadratic1DSpec>) {
          return {{"kind", "quadratic_1d"}, {"L", s.L}};
        } else if constexpr (std::is_same_v<S, harness::QuadraticNDSpec>) {
          return {{"kind", "quadratic_nd"}, {"dim", s.dim}, {"eig_min", s.eig_min}, {"eig_max", s.eig_max},
                  {"rotate", s.rotate}};
        } else if constexpr (std::is_same_v<S, harness::LinearRegressionSpec>) {
          return {{"kind", "linear_regression"}, {"samples", s.samples}, {"dim", s.dim}, {"noise", s.noise}};
        } else {
          return {{"kind", "mlp2"}, {"in", s.in},           {"hidden", s.hidden},
                  {"out", s.out},   {"samples", s.samples}, {"noise", s.noise}};
        }
      },
      spec);
}

inline Json config_to_json(const ExperimentConfig& cfg) {
  const harness::TrainConfig& c = cfg.train;
  Json j;
  j["objective"] = objective_to_json(c.objective);
  j["optimizer"] = detail::name_of(c.optimizer, detail::optimizer_names());
  j["mode"] = detail::name_of(c.mode, detail::mode_names());
  Json h{{"eta", c.hyper.eta},
         {"beta1", c.hyper.beta1},
         {"beta2", c.hyper.beta2},
         {"epsilon", c.hyper.epsilon},
         {"weight_decay", c.hyper.weight_decay}};
  if (c.hyper.clip_norm) h["clip_norm"] = *c.hyper.clip_norm;
  j["hyper"] = h;
  j["quant"] = quant_to_json(c.quant);
  Json g = Json::object();
  for (const auto& [name, q] : c.group_quant) g[name] = quant_to_json(q);
  j["group_quant"] = g;
  j["quantize_io"] = c.quantize_io;
  j["steps"] = c.steps;
  j["seed"] = c.seed;
  if (c.schedule.kind == harness::LrSchedule::Kind::Constant)
    j["schedule"] = {{"kind", "constant"}};
  else
    j["schedule"] = {{"kind", "cosine"},
                     {"peak", c.schedule.peak},
                     {"floor", c.schedule.floor},
                     {"warmup_frac", c.schedule.warmup_frac}};
  j["metrics_every"] = c.metrics_every;
  j["batch_size"] = c.batch_size;
  j["init_scale"] = c.init_scale;
  if (!c.init.empty()) j["init"] = c.init;
  if (cfg.weight_format) j["weight_format"] = detail::name_of(*cfg.weight_format, detail::storage_names());
  return j;
}

inline std::string serialize(const ExperimentConfig& cfg) { return config_to_json(cfg).dump(2); }

// ---------------------------------------------------------------------------
// Memory accounting of a configured run
// ---------------------------------------------------------------------------

/// Storage width of quantized weights when the config does not name one.
inline double grid_bytes(const QuantGrid& grid) {
  if (const auto* i = std::get_if<IntSymmetric>(&grid)) return static_cast<double>(i->bits) / 8.0;
  if (std::holds_alternative<Identity>(grid)) return bytes_per_element(StorageFormat::Fp32);
  return bytes_per_element(StorageFormat::Fp8);
}

/// Element-weighted static bytes per parameter. Quantized groups store the
/// low-precision weights plus an fp32 master (mw) or stored error (exact);
/// unquantized groups store fp32 weights only. Momentum is fp32, and so is
/// the second moment under Adam.
inline double config_bytes_per_param(const ExperimentConfig& cfg) {
  const harness::TrainConfig& c = cfg.train;
  const harness::Objective obj = harness::build_objective(c.objective, c.seed);
  const auto layout = obj.layout();
  const std::optional<StorageFormat> v =
      c.optimizer == OptimizerKind::Adam ? std::optional{StorageFormat::Fp32} : std::nullopt;
  double total = 0.0, count = 0.0;
  for (const harness::ParamInfo& p : layout) {
    const double n = static_cast<double>(shape_numel(p.shape));
    QuantSpec q;
    if (!p.io || c.quantize_io) {
      auto it = c.group_quant.find(p.name);
      q = it != c.group_quant.end() ? it->second : c.quant;
    }
    double per;
    if (q.is_identity()) {
      per = memory_bytes_per_param(StorageFormat::Fp32, std::nullopt, StorageFormat::Fp32, v);
    } else {
      const bool extra = c.mode == Mode::MasterWeights || c.mode == Mode::ExactInjection;
      const double w = cfg.weight_format ? bytes_per_element(*cfg.weight_format) : grid_bytes(q.grid);
      per = w + memory_bytes_per_param(StorageFormat::None, extra ? std::optional{StorageFormat::Fp32} : std::nullopt,
                                       StorageFormat::Fp32, v);
    }
    total += per * n;
    count += n;
  }
  return total / count;
}

}  // namespace eco::cli
