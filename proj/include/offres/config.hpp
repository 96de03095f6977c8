#pragma once

#include "error.hpp"

#include <json.hpp>

#include <cmath>
#include <string>

namespace offres::config {

using json = nlohmann::json;

// A small subset of JSON Schema: type, properties, additionalProperties (bool),
// required, items, minItems, enum, minimum, maximum, exclusiveMinimum.

namespace detail {

inline std::string escape_token(std::string const &t)
{
  std::string out;
  for (char c : t) {
    if (c == '~') {
      out += "~0";
    } else if (c == '/') {
      out += "~1";
    } else {
      out += c;
    }
  }
  return out;
}

inline bool has_type(json const &v, std::string const &type)
{
  if (type == "object") { return v.is_object(); }
  if (type == "array") { return v.is_array(); }
  if (type == "string") { return v.is_string(); }
  if (type == "boolean") { return v.is_boolean(); }
  if (type == "integer") { return v.is_number_integer() || (v.is_number_float() && std::floor(v.get<double>()) == v.get<double>()); }
  if (type == "number") { return v.is_number(); }
  if (type == "null") { return v.is_null(); }
  return false;
}

inline void check(json const &v, json const &schema, std::string const &ptr)
{
  std::string const where = ptr.empty() ? "/" : ptr;
  if (auto t = schema.find("type"); t != schema.end()) {
    bool ok = false;
    if (t->is_array()) {
      for (auto const &x : *t) { ok = ok || has_type(v, x.get<std::string>()); }
    } else {
      ok = has_type(v, t->get<std::string>());
    }
    if (!ok) { throw ConfigError(where, "expected " + t->dump()); }
  }
  if (auto e = schema.find("enum"); e != schema.end()) {
    bool found = false;
    for (auto const &x : *e) { found = found || x == v; }
    if (!found) { throw ConfigError(where, "must be one of " + e->dump()); }
  }
  if (v.is_number()) {
    double const x = v.get<double>();
    if (auto m = schema.find("minimum"); m != schema.end() && x < m->get<double>()) {
      throw ConfigError(where, "must be >= " + m->dump());
    }
    if (auto m = schema.find("exclusiveMinimum"); m != schema.end() && x <= m->get<double>()) {
      throw ConfigError(where, "must be > " + m->dump());
    }
    if (auto m = schema.find("maximum"); m != schema.end() && x > m->get<double>()) {
      throw ConfigError(where, "must be <= " + m->dump());
    }
  }
  if (v.is_object()) {
    json const props = schema.value("properties", json::object());
    if (auto r = schema.find("required"); r != schema.end()) {
      for (auto const &k : *r) {
        if (!v.contains(k.get<std::string>())) { throw ConfigError(ptr + "/" + escape_token(k.get<std::string>()), "is required"); }
      }
    }
    bool const closed = schema.contains("additionalProperties") && schema["additionalProperties"] == false;
    for (auto it = v.begin(); it != v.end(); ++it) {
      std::string const child = ptr + "/" + escape_token(it.key());
      if (props.contains(it.key())) {
        check(it.value(), props[it.key()], child);
      } else if (closed) {
        throw ConfigError(child, "unknown key");
      }
    }
  }
  if (v.is_array()) {
    if (auto m = schema.find("minItems"); m != schema.end() && v.size() < m->get<std::size_t>()) {
      throw ConfigError(where, "needs at least " + m->dump() + " items");
    }
    if (auto items = schema.find("items"); items != schema.end()) {
      for (std::size_t i = 0; i < v.size(); ++i) { check(v[i], *items, ptr + "/" + std::to_string(i)); }
    }
  }
}

} // namespace detail

/// Throws ConfigError naming the JSON pointer of the first violation.
inline void validate(json const &doc, json const &schema) { detail::check(doc, schema, ""); }

/// Schema of the pipeline configuration file accepted by the command-line tool.
inline json const &pipeline_schema()
{
  static json const schema = json::parse(R"JSON(
{
  "$schema": "https://json-schema.org/draft/2020-12/schema",
  "title": "offres pipeline configuration",
  "type": "object",
  "additionalProperties": false,
  "properties": {
    "seed": {"type": "integer", "minimum": 0},
    "threads": {"type": "integer", "minimum": 1},
    "grid": {
      "type": "object", "additionalProperties": false,
      "properties": {
        "oversamp": {"type": "number", "minimum": 1},
        "kernel_width": {"type": "number", "exclusiveMinimum": 0}
      }
    },
    "trajectory": {
      "type": "object", "additionalProperties": false,
      "properties": {
        "n_cones": {"type": "integer", "minimum": 1},
        "interleaves_per_cone": {"type": "integer", "minimum": 1},
        "samples_per_interleaf": {"type": "integer", "minimum": 3},
        "t_read": {"type": "number", "exclusiveMinimum": 0},
        "twist": {"type": "number", "exclusiveMinimum": 0},
        "grid_size": {"type": "integer", "minimum": 2},
        "fov_cm": {"type": "number", "exclusiveMinimum": 0},
        "dcf": {"enum": ["analytic", "pipemenon"]},
        "dcf_iterations": {"type": "integer", "minimum": 1}
      }
    },
    "phantom": {
      "type": "object", "additionalProperties": false,
      "properties": {
        "grid_size": {"type": "integer", "minimum": 12},
        "n_vessels": {"type": "integer", "minimum": 1}
      }
    },
    "fieldmap": {
      "type": "object", "additionalProperties": false,
      "properties": {
        "f_max": {"type": "number", "exclusiveMinimum": 0},
        "n_blobs": {"type": "integer", "minimum": 0},
        "ramp": {"type": "boolean"},
        "min_width": {"type": "number", "exclusiveMinimum": 0},
        "max_width": {"type": "number", "exclusiveMinimum": 0}
      }
    },
    "forward": {
      "type": "object", "additionalProperties": false,
      "properties": {
        "n_bins": {"type": "integer", "minimum": 1},
        "noise_sigma": {"type": "number", "minimum": 0},
        "max_work": {"type": "number", "exclusiveMinimum": 0}
      }
    },
    "autofocus": {
      "type": "object", "additionalProperties": false,
      "properties": {
        "f_min": {"type": "number"},
        "f_max": {"type": "number"},
        "n_freqs": {"type": "integer", "minimum": 1},
        "metric_window": {"type": "integer", "minimum": 0},
        "lowpass_sigma": {"type": "number", "exclusiveMinimum": 0},
        "fieldmap_smooth_sigma": {"type": "number", "minimum": 0},
        "mask_fraction": {"type": "number", "minimum": 0, "maximum": 1},
        "max_resident": {"type": "integer", "minimum": 1}
      }
    },
    "network": {
      "type": "object", "additionalProperties": false,
      "properties": {
        "n_res_blocks": {"type": "integer", "minimum": 0},
        "channels": {"type": "integer", "minimum": 1},
        "kernel": {"type": "integer", "minimum": 1},
        "global_skip": {"type": "boolean"},
        "learning_rate": {"type": "number", "exclusiveMinimum": 0},
        "lr_decay": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "patch": {"type": "integer", "minimum": 1},
        "patch_stride": {"type": "integer", "minimum": 1},
        "batch": {"type": "integer", "minimum": 1},
        "output_init_scale": {"type": "number", "minimum": 0}
      }
    },
    "train": {
      "type": "object", "additionalProperties": false,
      "properties": {
        "epochs": {"type": "integer", "minimum": 1},
        "val_fraction": {"type": "number", "minimum": 0, "maximum": 1}
      }
    },
    "corpus": {
      "type": "object", "additionalProperties": false,
      "properties": {
        "n_phantoms": {"type": "integer", "minimum": 1},
        "factors": {"type": "array", "minItems": 1, "items": {"type": "number", "exclusiveMinimum": 0}},
        "n_freqs": {"type": "integer", "minimum": 1},
        "f_max": {"type": "number", "minimum": 0},
        "use_fieldmap": {"type": "boolean"},
        "train_fraction": {"type": "number", "exclusiveMinimum": 0, "maximum": 1}
      }
    },
    "inference": {
      "type": "object", "additionalProperties": false,
      "properties": {
        "tile": {"type": "integer", "minimum": 0},
        "overlap": {"type": "integer", "minimum": 0}
      }
    },
    "sweep": {
      "type": "object", "additionalProperties": false,
      "properties": {
        "f_max": {"type": "number", "exclusiveMinimum": 0},
        "n_freqs": {"type": "integer", "minimum": 2},
        "methods": {"type": "array", "items": {"enum": ["none", "autofocus", "net"]}}
      }
    }
  }
}
)JSON");
  return schema;
}

/// Value at a JSON pointer in `doc`, or `fallback` when absent.
template <typename T>
T get_or(json const &doc, std::string const &pointer, T fallback)
{
  json::json_pointer const p(pointer);
  return doc.contains(p) ? doc.at(p).get<T>() : fallback;
}

} // namespace offres::config
