#pragma once

#include <cstdint>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "loggas/errors.hpp"
#include "loggas/flow.hpp"
#include "loggas/gibbs.hpp"
#include "loggas/potentials.hpp"
#include "loggas/semigroup.hpp"

namespace loggas {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Config access with unknown-key rejection. Every key a subcommand reads is
// marked consumed; finish() rejects anything left over, recursively through
// child readers, so typos in experiment files fail loudly instead of being
// silently ignored.
// ---------------------------------------------------------------------------

class ConfigReader {
 public:
  ConfigReader(const json& node, std::string path)
      : node_(&node), path_(std::move(path)) {
    if (!node.is_object())
      throw ConfigError(where("") + "expected an object");
  }

  bool has(const std::string& key) const { return node_->contains(key); }

  double require_number(const std::string& key) {
    const json& v = get(key);
    if (!v.is_number()) throw ConfigError(where(key) + "expected a number");
    return v.get<double>();
  }

  double number(const std::string& key, double def) {
    if (!has(key)) return def;
    return require_number(key);
  }

  std::int64_t require_integer(const std::string& key) {
    const json& v = get(key);
    if (!v.is_number_integer())
      throw ConfigError(where(key) + "expected an integer");
    return v.get<std::int64_t>();
  }

  std::int64_t integer(const std::string& key, std::int64_t def) {
    if (!has(key)) return def;
    return require_integer(key);
  }

  std::size_t count(const std::string& key, std::size_t def) {
    if (!has(key)) return def;
    std::int64_t v = require_integer(key);
    if (v < 0) throw ConfigError(where(key) + "expected a nonnegative count");
    return static_cast<std::size_t>(v);
  }

  std::uint64_t seed(const std::string& key, std::uint64_t def) {
    if (!has(key)) return def;
    const json& v = get(key);
    if (!v.is_number_integer() && !v.is_number_unsigned())
      throw ConfigError(where(key) + "expected an integer seed");
    return v.get<std::uint64_t>();
  }

  std::string require_text(const std::string& key) {
    const json& v = get(key);
    if (!v.is_string()) throw ConfigError(where(key) + "expected a string");
    return v.get<std::string>();
  }

  std::string text(const std::string& key, const std::string& def) {
    if (!has(key)) return def;
    return require_text(key);
  }

  bool flag(const std::string& key, bool def) {
    if (!has(key)) return def;
    const json& v = get(key);
    if (!v.is_boolean()) throw ConfigError(where(key) + "expected a boolean");
    return v.get<bool>();
  }

  std::vector<double> require_numbers(const std::string& key) {
    const json& v = get(key);
    if (!v.is_array()) throw ConfigError(where(key) + "expected an array");
    std::vector<double> out;
    out.reserve(v.size());
    for (const auto& e : v) {
      if (!e.is_number())
        throw ConfigError(where(key) + "expected an array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  std::vector<double> numbers(const std::string& key,
                              std::vector<double> def) {
    if (!has(key)) return def;
    return require_numbers(key);
  }

  std::vector<std::string> require_texts(const std::string& key) {
    const json& v = get(key);
    if (!v.is_array()) throw ConfigError(where(key) + "expected an array");
    std::vector<std::string> out;
    for (const auto& e : v) {
      if (!e.is_string())
        throw ConfigError(where(key) + "expected an array of strings");
      out.push_back(e.get<std::string>());
    }
    return out;
  }

  ConfigReader child(const std::string& key) {
    const json& v = get(key);
    return ConfigReader(v, path_.empty() ? key : path_ + "." + key);
  }

  bool is_array(const std::string& key) const {
    return has(key) && (*node_)[key].is_array();
  }

  bool is_object(const std::string& key) const {
    return has(key) && (*node_)[key].is_object();
  }

  // Raw subtree access for shapes the typed getters do not cover; the
  // caller owns validation of everything below this key.
  const json& raw(const std::string& key) { return get(key); }

  const std::string& path() const { return path_; }

  void finish() const {
    for (const auto& [key, value] : node_->items()) {
      (void)value;
      if (seen_.find(key) == seen_.end())
        throw ConfigError("unknown config key: " +
                          (path_.empty() ? key : path_ + "." + key));
    }
  }

 private:
  const json& get(const std::string& key) {
    if (!node_->contains(key))
      throw ConfigError("missing config key: " +
                        (path_.empty() ? key : path_ + "." + key));
    seen_.insert(key);
    return (*node_)[key];
  }

  std::string where(const std::string& key) const {
    std::string p = path_;
    if (!key.empty()) p = p.empty() ? key : p + "." + key;
    return p.empty() ? std::string("config: ") : "config key " + p + ": ";
  }

  const json* node_;
  std::string path_;
  std::set<std::string> seen_;
};

// ---------------------------------------------------------------------------
// Hashing, formatting, file I/O.
// ---------------------------------------------------------------------------

inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// Hash of the canonical (sorted-key, compact) dump, so key order in the
// experiment file does not change the hash.
inline std::string config_hash(const json& config) {
  nlohmann::json sorted = nlohmann::json::parse(config.dump());
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(sorted.dump())));
  return std::string("fnv1a64:") + buf;
}

inline std::string utc_timestamp() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_text_file(const std::string& path,
                            const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  out << content;
  if (!out) throw ConfigError("write failed: " + path);
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const std::exception& e) {
    throw ConfigError("invalid JSON in " + path + ": " + e.what());
  }
  return doc;
}

// ---------------------------------------------------------------------------
// Serialization of the report structures.
// ---------------------------------------------------------------------------

inline json to_json(const VerificationReport& r) {
  json j;
  j["inequality"] = r.inequality;
  j["potential"] = r.potential;
  j["observable"] = r.observable;
  j["k"] = r.k;
  j["t"] = r.t;
  j["curvature"] = r.curvature;
  j["left"] = r.left;
  j["right"] = r.right;
  j["margin"] = r.margin;
  j["pooled_stderr"] = r.pooled_stderr;
  j["z"] = r.z;
  j["pass"] = r.pass;
  j["inconclusive"] = r.inconclusive;
  j["n_paths"] = r.n_paths;
  json d = json::object();
  for (const auto& [key, val] : r.details) d[key] = val;
  j["details"] = d;
  return j;
}

inline json to_json(const ConvexityReport& r) {
  json j;
  j["potential"] = r.potential;
  j["k"] = r.k;
  j["n_configs"] = r.n_configs;
  j["n_directions"] = r.n_directions;
  j["seed"] = r.seed;
  j["min_quadratic_form"] = r.min_quadratic_form;
  j["min_midpoint_slack_rel"] = r.min_midpoint_slack_rel;
  j["hessian_tolerance"] = r.hessian_tolerance;
  j["midpoint_tolerance"] = r.midpoint_tolerance;
  j["hessian_pass"] = r.hessian_pass();
  j["midpoint_pass"] = r.midpoint_pass();
  j["pass"] = r.pass();
  return j;
}

inline json to_json(const ExpMomentReport& r) {
  json j;
  j["potential"] = r.potential;
  j["observable"] = r.observable;
  j["k"] = r.k;
  j["t"] = r.t;
  j["s"] = r.s;
  j["estimate"] = r.estimate;
  j["stderr"] = r.stderr_;
  j["prefix_means"] = {r.prefix[0], r.prefix[1], r.prefix[2]};
  j["stable"] = r.stable;
  j["threshold_strict"] = r.threshold_strict;
  j["threshold_limit"] = r.threshold_limit;
  j["within_strict"] = r.within_strict;
  j["n_paths"] = r.n_paths;
  return j;
}

inline json to_json(const SamplerDiagnostics& d) {
  json j;
  j["acceptance_rate"] = d.acceptance_rate;
  j["adapted_step"] = d.adapted_step;
  j["total_steps"] = d.total_steps;
  j["mean_energy"] = d.mean_energy;
  return j;
}

inline json to_json(const StepStats& s) {
  json j;
  j["steps"] = s.steps;
  j["splits"] = s.splits;
  j["projections"] = s.projections;
  j["projection_fraction"] = s.projection_fraction();
  return j;
}

inline json to_json(const ResidualTable& r) {
  json j;
  j["check"] = r.check;
  j["times"] = r.times;
  j["lhs"] = r.lhs;
  j["rhs"] = r.rhs;
  j["residual"] = r.residual;
  j["worst"] = r.worst;
  j["tolerance"] = r.tolerance;
  j["pass"] = r.pass;
  return j;
}

inline json to_json(const DisplacementReport& r) {
  json j;
  j["ts"] = r.ts;
  j["slack"] = r.slack;
  j["min_slack"] = r.min_slack;
  j["w2"] = r.w2;
  j["tolerance"] = r.tolerance;
  j["pass"] = r.pass;
  return j;
}

// ---------------------------------------------------------------------------
// Report envelope and consolidation. Every emitted report carries the
// command, the hash of the config that produced it, and the single
// timestamp field; numeric results live in a flat "results" array whose
// rows all share the same six summary columns.
// ---------------------------------------------------------------------------

inline json result_row(const std::string& name, double K, double t,
                       double margin, double z, bool pass) {
  json j;
  j["name"] = name;
  j["K"] = K;
  j["t"] = t;
  j["margin"] = margin;
  j["z"] = z;
  j["pass"] = pass;
  return j;
}

inline json report_envelope(const std::string& command, const json& config) {
  json j;
  j["command"] = command;
  j["config_hash"] = config_hash(config);
  j["generated_at"] = utc_timestamp();
  return j;
}

struct Summary {
  json doc;
  std::string csv;
  bool all_pass = true;
  std::size_t rows = 0;
};

inline Summary summarize_reports(const std::vector<json>& docs) {
  Summary out;
  std::ostringstream csv;
  csv << "name,K,t,margin,z,pass\n";
  json rows = json::array();
  for (const auto& doc : docs) {
    if (!doc.is_object() || !doc.contains("results") ||
        !doc["results"].is_array())
      throw ConfigError("report schema mismatch: missing results array");
    for (const auto& row : doc["results"]) {
      for (const char* key : {"name", "K", "t", "margin", "z", "pass"})
        if (!row.contains(key))
          throw ConfigError(std::string("report schema mismatch: row lacks ") +
                            key);
      if (!row["name"].is_string() || !row["pass"].is_boolean())
        throw ConfigError("report schema mismatch: bad row types");
      bool pass = row["pass"].get<bool>();
      out.all_pass = out.all_pass && pass;
      csv << row["name"].get<std::string>() << ","
          << format_double(row["K"].get<double>()) << ","
          << format_double(row["t"].get<double>()) << ","
          << format_double(row["margin"].get<double>()) << ","
          << format_double(row["z"].get<double>()) << "," << (pass ? 1 : 0)
          << "\n";
      rows.push_back(row);
      ++out.rows;
    }
  }
  out.doc["generated_at"] = utc_timestamp();
  out.doc["rows"] = rows;
  out.doc["all_pass"] = out.all_pass;
  out.csv = csv.str();
  return out;
}

// ---------------------------------------------------------------------------
// CSV writers for densities and trajectories.
// ---------------------------------------------------------------------------

inline void write_density_csv(const std::string& path, const GridDensity& d,
                              const std::string& preamble = "") {
  std::ostringstream out;
  out << preamble << "node,value\n";
  for (std::size_t j = 0; j < d.cells(); ++j)
    out << format_double(d.node(j)) << "," << format_double(d.p[j]) << "\n";
  write_text_file(path, out.str());
}

inline void write_trajectory_csv(const std::string& path,
                                 const std::vector<Trajectory>& paths,
                                 const std::string& preamble = "") {
  std::ostringstream out;
  out << preamble << "path_id,t,particle_index,x\n";
  for (std::size_t pid = 0; pid < paths.size(); ++pid) {
    const Trajectory& tr = paths[pid];
    for (std::size_t rec = 0; rec < tr.times.size(); ++rec)
      for (std::size_t i = 0; i < tr.states[rec].count(); ++i)
        out << pid << "," << format_double(tr.times[rec]) << "," << i << ","
            << format_double(tr.states[rec][i]) << "\n";
  }
  write_text_file(path, out.str());
}

}  // namespace loggas