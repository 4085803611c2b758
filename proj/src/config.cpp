#include "implicit_sparse/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace implicit_sparse {

namespace {

using nlohmann::json;

std::string position(const std::string& text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

[[noreturn]] void bad(const std::string& source, const std::string& key, const std::string& what) {
  throw ConfigError(source + ": key '" + key + "' " + what);
}

double as_number(const json& v, const std::string& source, const std::string& key) {
  if (!v.is_number()) bad(source, key, "must be a number");
  return v.get<double>();
}

std::size_t as_count(const json& v, const std::string& source, const std::string& key) {
  if (v.is_number_unsigned()) return v.get<std::size_t>();
  if (v.is_number_float()) {
    const double x = v.get<double>();
    if (x >= 0.0 && x == std::floor(x) && x < 1e18) return static_cast<std::size_t>(x);
  }
  bad(source, key, "must be a nonnegative integer");
}

std::string as_string(const json& v, const std::string& source, const std::string& key) {
  if (!v.is_string()) bad(source, key, "must be a string");
  return v.get<std::string>();
}

bool as_bool(const json& v, const std::string& source, const std::string& key) {
  if (!v.is_boolean()) bad(source, key, "must be true or false");
  return v.get<bool>();
}

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed,
                    const std::string& source, const std::string& prefix) {
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(source + ": unknown key '" + prefix + key + "'");
  }
}

SweepAxis parse_axis(const json& v, const std::string& source, const std::string& key) {
  if (!v.is_object()) bad(source, key, "must be an object with 'name' and 'values'");
  reject_unknown(v, {"name", "values"}, source, key + ".");
  if (!v.contains("name") || !v.contains("values")) bad(source, key, "needs 'name' and 'values'");
  SweepAxis axis;
  axis.name = as_string(v["name"], source, key + ".name");
  if (!v["values"].is_array()) bad(source, key + ".values", "must be an array");
  for (const json& x : v["values"]) axis.values.push_back(as_number(x, source, key + ".values"));
  return axis;
}

Algorithm parse_algorithm(const std::string& s, const std::string& source) {
  if (s == "alg1") return Algorithm::alg1;
  if (s == "alg2") return Algorithm::alg2;
  bad(source, "algorithm", "must be 'alg1' or 'alg2'");
}

json axis_json(const SweepAxis& a) { return {{"name", a.name}, {"values", a.values}}; }

}  // namespace

ExperimentConfig parse_config_text(const std::string& text, std::optional<Preset> preset,
                                   const std::string& source) {
  json doc;
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
    doc = json::object();
  } else {
    try {
      doc = json::parse(text);
    } catch (const json::parse_error& e) {
      const std::size_t at = e.byte > 0 ? e.byte - 1 : 0;
      const std::string what = e.what();
      const std::size_t cut = what.find(": ", what.find("column"));
      const std::string detail = cut == std::string::npos ? what : what.substr(cut + 2);
      throw ConfigError(source + ": parse error at " + position(text, at) + ": " + detail);
    }
  }
  if (!doc.is_object()) throw ConfigError(source + ": top level must be an object");

  reject_unknown(doc,
                 {"family", "preset", "n", "d", "k", "gamma", "sigma", "alpha", "eta", "eta_tilde",
                  "tau", "repetitions", "design", "signal", "signal_base", "random_signs",
                  "algorithm", "max_iters", "snapshot_every", "validation_fraction",
                  "target_l2_sq", "axis", "axis2", "lasso", "base_seed", "threads"},
                 source, "");

  Family family = Family::phase_transition_gamma;
  if (doc.contains("family")) {
    try {
      family = parse_family(as_string(doc["family"], source, "family"));
    } catch (const ParameterError& e) {
      throw ConfigError(source + ": " + e.what());
    }
  }
  Preset chosen = Preset::paper;
  if (doc.contains("preset")) {
    try {
      chosen = parse_preset(as_string(doc["preset"], source, "preset"));
    } catch (const ParameterError& e) {
      throw ConfigError(source + ": " + e.what());
    }
  }
  if (preset) chosen = *preset;

  ExperimentConfig c = default_config(family, chosen);
  for (const auto& [key, v] : doc.items()) {
    if (key == "family" || key == "preset") continue;
    if (key == "n") c.n = as_count(v, source, key);
    else if (key == "d") c.d = as_count(v, source, key);
    else if (key == "k") c.k = as_count(v, source, key);
    else if (key == "gamma") c.gamma = as_number(v, source, key);
    else if (key == "sigma") c.sigma = as_number(v, source, key);
    else if (key == "alpha") c.alpha = as_number(v, source, key);
    else if (key == "eta") {
      if (v.is_string() && v.get<std::string>() == "auto") c.eta.reset();
      else if (v.is_number()) c.eta = v.get<double>();
      else bad(source, key, "must be a number or \"auto\"");
    } else if (key == "eta_tilde") c.eta_tilde = as_number(v, source, key);
    else if (key == "tau") c.tau = as_count(v, source, key);
    else if (key == "repetitions") c.repetitions = as_count(v, source, key);
    else if (key == "design") {
      if (v.is_string()) {
        try {
          c.design = DesignKind{parse_design_variant(v.get<std::string>()), 0.0};
        } catch (const ParameterError& e) {
          throw ConfigError(source + ": " + e.what());
        }
      } else if (v.is_object()) {
        reject_unknown(v, {"variant", "mu"}, source, "design.");
        if (!v.contains("variant")) bad(source, "design", "needs 'variant'");
        try {
          c.design.variant = parse_design_variant(as_string(v["variant"], source, "design.variant"));
        } catch (const ParameterError& e) {
          throw ConfigError(source + ": " + e.what());
        }
        c.design.mu = v.contains("mu") ? as_number(v["mu"], source, "design.mu") : 0.0;
      } else {
        bad(source, key, "must be a string or an object");
      }
    } else if (key == "signal") {
      const std::string s = as_string(v, source, key);
      if (s == "constant") c.signal = SignalSpec::Variant::constant;
      else if (s == "geometric") c.signal = SignalSpec::Variant::geometric;
      else bad(source, key, "must be 'constant' or 'geometric'");
    } else if (key == "signal_base") c.signal_base = as_number(v, source, key);
    else if (key == "random_signs") c.random_signs = as_bool(v, source, key);
    else if (key == "algorithm") c.algorithm = parse_algorithm(as_string(v, source, key), source);
    else if (key == "max_iters") c.max_iters = as_count(v, source, key);
    else if (key == "snapshot_every") c.snapshot_every = as_count(v, source, key);
    else if (key == "validation_fraction") c.validation_fraction = as_number(v, source, key);
    else if (key == "target_l2_sq") c.target_l2_sq = as_number(v, source, key);
    else if (key == "axis") {
      if (v.is_null()) c.axis = {};
      else c.axis = parse_axis(v, source, key);
    } else if (key == "axis2") {
      if (v.is_null()) c.axis2.reset();
      else c.axis2 = parse_axis(v, source, key);
    } else if (key == "lasso") {
      if (!v.is_object()) bad(source, key, "must be an object");
      reject_unknown(v, {"path_length", "min_ratio", "tol", "max_sweeps"}, source, "lasso.");
      if (v.contains("path_length")) c.lasso.path_length = as_count(v["path_length"], source, "lasso.path_length");
      if (v.contains("min_ratio")) c.lasso.min_ratio = as_number(v["min_ratio"], source, "lasso.min_ratio");
      if (v.contains("tol")) c.lasso.tol = as_number(v["tol"], source, "lasso.tol");
      if (v.contains("max_sweeps")) c.lasso.max_sweeps = as_count(v["max_sweeps"], source, "lasso.max_sweeps");
    } else if (key == "base_seed") {
      if (!v.is_number_unsigned()) bad(source, key, "must be a nonnegative integer");
      c.base_seed = v.get<std::uint64_t>();
    } else if (key == "threads") c.threads = as_count(v, source, key);
  }

  try {
    validate(c);
  } catch (const ParameterError& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return c;
}

ExperimentConfig parse_config_file(const std::string& path, std::optional<Preset> preset) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config file '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config_text(text.str(), preset, path);
}

std::string serialize(const ExperimentConfig& c) {
  json j;
  j["family"] = to_string(c.family);
  j["preset"] = to_string(c.preset);
  j["n"] = c.n;
  j["d"] = c.d;
  j["k"] = c.k;
  j["gamma"] = c.gamma;
  j["sigma"] = c.sigma;
  j["alpha"] = c.alpha;
  if (c.eta) j["eta"] = *c.eta;
  else j["eta"] = "auto";
  j["eta_tilde"] = c.eta_tilde;
  j["tau"] = c.tau;
  j["repetitions"] = c.repetitions;
  j["design"] = {{"variant", to_string(c.design.variant)}, {"mu", c.design.mu}};
  j["signal"] = c.signal == SignalSpec::Variant::geometric ? "geometric" : "constant";
  j["signal_base"] = c.signal_base;
  j["random_signs"] = c.random_signs;
  j["algorithm"] = c.algorithm == Algorithm::alg1 ? "alg1" : "alg2";
  j["max_iters"] = c.max_iters;
  j["snapshot_every"] = c.snapshot_every;
  j["validation_fraction"] = c.validation_fraction;
  j["target_l2_sq"] = c.target_l2_sq;
  j["axis"] = c.axis.values.empty() && c.axis.name.empty() ? json(nullptr) : axis_json(c.axis);
  j["axis2"] = c.axis2 ? axis_json(*c.axis2) : json(nullptr);
  j["lasso"] = {{"path_length", c.lasso.path_length},
                {"min_ratio", c.lasso.min_ratio},
                {"tol", c.lasso.tol},
                {"max_sweeps", c.lasso.max_sweeps}};
  j["base_seed"] = c.base_seed;
  j["threads"] = c.threads;
  return j.dump(2) + "\n";
}

}  // namespace implicit_sparse
