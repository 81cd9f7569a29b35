#pragma once

// One point of the transmitter design space, plus the schema that tells a
// proposer which values each field may take.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dia/error.hpp"
#include "dia/infotheory.hpp"

namespace dia {

struct Config {
  int keyframe_interval = 4;
  int downsample = 4;
  int quant_bits = 4;
  int grid_rows = 4;
  int grid_cols = 4;
  int top_k_blocks = 0;
  bool vsds_enabled = false;
  double lambda_ridge = 1.0;
  EntropyDomain entropy_domain = EntropyDomain::bytes;
  double epsilon = 1e-6;
  int latent_bins = 4;

  friend bool operator==(const Config&, const Config&) = default;
};

enum class FieldKind { integer, choice, boolean, real, category };

struct FieldDomain {
  std::string name;
  FieldKind kind = FieldKind::integer;
  double min = 0;
  double max = 0;
  std::vector<int> choices;
  std::vector<std::string> categories;
  bool tunable = true;
  std::string description;
};

using ConfigSchema = std::vector<FieldDomain>;

inline constexpr int kMaxGridSide = 16;
inline constexpr int kMaxTopK = 16;

inline const ConfigSchema& config_schema() {
  static const ConfigSchema schema = {
      {"keyframe_interval", FieldKind::integer, 1, 64, {}, {}, true,
       "frames between transmitted keyframes (frame 0 is always a keyframe)"},
      {"downsample", FieldKind::choice, 0, 0, {1, 2, 4, 8}, {}, true,
       "box-downsampling factor applied to keyframes"},
      {"quant_bits", FieldKind::choice, 0, 0, {2, 4, 8}, {}, true, "bits per transmitted sample"},
      {"grid_rows", FieldKind::integer, 1, kMaxGridSide, {}, {}, true, "block grid rows"},
      {"grid_cols", FieldKind::integer, 1, kMaxGridSide, {}, {}, true, "block grid columns"},
      {"top_k_blocks", FieldKind::integer, 0, kMaxTopK, {}, {}, true,
       "full-resolution block patches sent for the final frame (at most rows x cols)"},
      {"vsds_enabled", FieldKind::boolean, 0, 1, {}, {}, true,
       "choose patches by semantic-saliency ranking instead of block index"},
      {"lambda_ridge", FieldKind::real, 1e-3, 1e3, {}, {}, true, "ridge regularizer of the saliency fit"},
      {"entropy_domain", FieldKind::category, 0, 0, {}, {"bytes", "latent"}, false,
       "domain in which H(X), H(Y) are measured"},
      {"epsilon", FieldKind::real, 1e-12, 1.0, {}, {}, false, "KL regularizer in the preservation degree"},
      {"latent_bins", FieldKind::integer, 2, 16, {}, {}, false, "histogram bins per latent dimension"},
  };
  return schema;
}

inline std::string_view to_string(FieldKind k) {
  switch (k) {
    case FieldKind::integer: return "integer";
    case FieldKind::choice: return "choice";
    case FieldKind::boolean: return "boolean";
    case FieldKind::real: return "real";
    case FieldKind::category: return "category";
  }
  return "?";
}

inline nlohmann::json schema_to_json(const ConfigSchema& schema) {
  nlohmann::json fields = nlohmann::json::object();
  for (const auto& f : schema) {
    nlohmann::json j = {{"type", to_string(f.kind)}, {"tunable", f.tunable}, {"description", f.description}};
    switch (f.kind) {
      case FieldKind::integer: j["min"] = static_cast<int>(f.min); j["max"] = static_cast<int>(f.max); break;
      case FieldKind::real: j["min"] = f.min; j["max"] = f.max; break;
      case FieldKind::choice: j["values"] = f.choices; break;
      case FieldKind::category: j["values"] = f.categories; break;
      case FieldKind::boolean: break;
    }
    fields[f.name] = j;
  }
  return fields;
}

inline void validate(const Config& c) {
  auto in = [](int v, int lo, int hi) { return v >= lo && v <= hi; };
  auto one_of = [](int v, std::initializer_list<int> xs) { return std::find(xs.begin(), xs.end(), v) != xs.end(); };
  require(in(c.keyframe_interval, 1, 64), ErrorKind::parameter, "keyframe_interval must be in [1, 64]");
  require(one_of(c.downsample, {1, 2, 4, 8}), ErrorKind::parameter, "downsample must be one of 1, 2, 4, 8");
  require(one_of(c.quant_bits, {2, 4, 8}), ErrorKind::parameter, "quant_bits must be one of 2, 4, 8");
  require(in(c.grid_rows, 1, kMaxGridSide) && in(c.grid_cols, 1, kMaxGridSide), ErrorKind::parameter,
          "block grid sides must be in [1, 16]");
  require(in(c.top_k_blocks, 0, std::min(kMaxTopK, c.grid_rows * c.grid_cols)), ErrorKind::parameter,
          "top_k_blocks must be in [0, min(16, rows x cols)]");
  require(std::isfinite(c.lambda_ridge) && c.lambda_ridge > 0.0, ErrorKind::parameter, "lambda_ridge must be > 0");
  require(std::isfinite(c.epsilon) && c.epsilon > 0.0, ErrorKind::parameter, "epsilon must be > 0");
  require(in(c.latent_bins, 2, 16), ErrorKind::parameter, "latent_bins must be in [2, 16]");
}

inline nlohmann::json to_json(const Config& c) {
  return {{"keyframe_interval", c.keyframe_interval},
          {"downsample", c.downsample},
          {"quant_bits", c.quant_bits},
          {"block_grid", {c.grid_rows, c.grid_cols}},
          {"top_k_blocks", c.top_k_blocks},
          {"vsds_enabled", c.vsds_enabled},
          {"lambda_ridge", c.lambda_ridge},
          {"entropy_domain", std::string(to_string(c.entropy_domain))},
          {"epsilon", c.epsilon},
          {"latent_bins", c.latent_bins}};
}

/// Strict parse: unknown keys and out-of-domain values are errors. Missing
/// keys keep the values of `defaults`.
inline Config config_from_json(const nlohmann::json& j, const Config& defaults = {}) {
  require(j.is_object(), ErrorKind::format, "config must be a JSON object");
  Config c = defaults;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "keyframe_interval") c.keyframe_interval = value.get<int>();
      else if (key == "downsample") c.downsample = value.get<int>();
      else if (key == "quant_bits") c.quant_bits = value.get<int>();
      else if (key == "block_grid") {
        const auto rc = value.get<std::vector<int>>();
        require(rc.size() == 2, ErrorKind::format, "block_grid must be [rows, cols]");
        c.grid_rows = rc[0];
        c.grid_cols = rc[1];
      } else if (key == "top_k_blocks") c.top_k_blocks = value.get<int>();
      else if (key == "vsds_enabled") c.vsds_enabled = value.get<bool>();
      else if (key == "lambda_ridge") c.lambda_ridge = value.get<double>();
      else if (key == "entropy_domain") c.entropy_domain = entropy_domain_from_string(value.get<std::string>());
      else if (key == "epsilon") c.epsilon = value.get<double>();
      else if (key == "latent_bins") c.latent_bins = value.get<int>();
      else throw Error(ErrorKind::format, "unknown config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::format, std::string("bad config value: ") + e.what());
  }
  validate(c);
  return c;
}

namespace detail {

inline int nearest_choice(double v, const std::vector<int>& choices) {
  int best = choices.front();
  for (int c : choices) {
    if (std::abs(c - v) < std::abs(best - v)) best = c;
  }
  return best;
}

inline const FieldDomain& field(const char* name) {
  for (const auto& f : config_schema()) {
    if (f.name == name) return f;
  }
  throw Error(ErrorKind::parameter, std::string("no schema field ") + name);
}

inline std::optional<double> as_number(const nlohmann::json& v) {
  if (v.is_number()) return v.get<double>();
  if (v.is_boolean()) return v.get<bool>() ? 1.0 : 0.0;
  if (v.is_string()) {
    try {
      std::size_t used = 0;
      const double d = std::stod(v.get<std::string>(), &used);
      if (used == v.get<std::string>().size()) return d;
    } catch (const std::exception&) {
    }
  }
  return std::nullopt;
}

}  // namespace detail

/// Lenient parse for proposer output: each tunable field is pulled into its
/// domain (nearest choice on ties picks the smaller value), fields that are
/// absent or not tunable come from `base`. Returns nullopt when the input is
/// not an object or carries a value that cannot be read as a number.
inline std::optional<Config> clamp_config(const nlohmann::json& j, const Config& base) {
  if (!j.is_object()) return std::nullopt;
  Config c = base;
  auto clamp_int = [](double v, const FieldDomain& f) {
    return static_cast<int>(std::clamp(std::round(v), f.min, f.max));
  };
  for (const auto& [key, value] : j.items()) {
    if (key == "block_grid") {
      if (!value.is_array() || value.size() != 2) return std::nullopt;
      const auto r = detail::as_number(value[0]), k = detail::as_number(value[1]);
      if (!r || !k || !std::isfinite(*r) || !std::isfinite(*k)) return std::nullopt;
      c.grid_rows = clamp_int(*r, detail::field("grid_rows"));
      c.grid_cols = clamp_int(*k, detail::field("grid_cols"));
      continue;
    }
    const FieldDomain* f = nullptr;
    for (const auto& candidate : config_schema()) {
      if (candidate.name == key) f = &candidate;
    }
    if (f == nullptr || !f->tunable) continue;
    const auto v = detail::as_number(value);
    if (!v || !std::isfinite(*v)) return std::nullopt;
    if (key == "keyframe_interval") c.keyframe_interval = clamp_int(*v, *f);
    else if (key == "downsample") c.downsample = detail::nearest_choice(*v, f->choices);
    else if (key == "quant_bits") c.quant_bits = detail::nearest_choice(*v, f->choices);
    else if (key == "grid_rows") c.grid_rows = clamp_int(*v, *f);
    else if (key == "grid_cols") c.grid_cols = clamp_int(*v, *f);
    else if (key == "top_k_blocks") c.top_k_blocks = clamp_int(*v, *f);
    else if (key == "vsds_enabled") c.vsds_enabled = *v != 0.0;
    else if (key == "lambda_ridge") c.lambda_ridge = std::clamp(*v, f->min, f->max);
  }
  c.top_k_blocks = std::min(c.top_k_blocks, c.grid_rows * c.grid_cols);
  validate(c);
  return c;
}

}  // namespace dia
