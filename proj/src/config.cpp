#include "infograd/config.hpp"

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace infograd {

namespace {

enum class Type { Real, Int, Bool, U64, Choice, Text };

struct KeySpec {
  std::string key;
  Type type;
  std::string value;
  std::vector<std::string> choices = {};
};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<KeySpec> dsm_keys(const std::string& steps, const std::string& batch, const std::string& sigma,
                              bool relative, const std::string& weight_decay) {
  return {
      {"dsm_mode", Type::Choice, "perturb_y_fixed_sigma", {"perturb_y_fixed_sigma", "perturb_w_sqrt_t"}},
      {"dsm_sigma", Type::Real, sigma},
      {"dsm_sigma_relative", Type::Bool, relative ? "true" : "false"},
      {"dsm_steps", Type::Int, steps},
      {"dsm_batch", Type::Int, batch},
      {"hidden", Type::Int, "256"},
      {"lr_theta", Type::Real, "0.001"},
      {"weight_decay", Type::Real, weight_decay},
      {"clip_norm", Type::Real, "1"},
      {"stein", Type::Bool, "true"},
  };
}

std::vector<KeySpec> ascent_keys(const std::string& iterations, const std::string& lr_eta,
                                 const std::string& samples) {
  return {
      {"iterations", Type::Int, iterations},
      {"lr_eta", Type::Real, lr_eta},
      {"samples", Type::Int, samples},
      {"radius", Type::Real, "5"},
      {"warm_start", Type::Bool, "true"},
      {"regularizer", Type::Choice, "none", {"none", "squared_frobenius"}},
      {"lambda", Type::Real, "0"},
  };
}

std::vector<KeySpec> schema(std::string_view experiment) {
  std::vector<KeySpec> s{{"seed", Type::U64, std::to_string(kDefaultSeed)}};
  auto add = [&s](std::vector<KeySpec> more) { s.insert(s.end(), more.begin(), more.end()); };
  if (experiment == "e1_scalar_gradient") {
    add({{"sigma_x", Type::Real, "1"},
         {"t", Type::Real, "0.5"},
         {"alpha_min", Type::Real, "0"},
         {"alpha_max", Type::Real, "3"},
         {"alpha_points", Type::Int, "61"},
         {"samples", Type::Int, "200000"}});
  } else if (experiment == "e2_vector_gradient") {
    add({{"n", Type::Int, "8"},
         {"sigma_x2", Type::Real, "1"},
         {"t", Type::Real, "0.5"},
         {"cond_ratio", Type::Real, "12"},
         {"alpha_max", Type::Real, "3"},
         {"alpha_points", Type::Int, "16"},
         {"samples", Type::Int, "100000"},
         {"score_mode", Type::Choice, "both", {"analytic", "learned", "both"}}});
    add(dsm_keys("1000", "4096", "0.1", true, "0.0001"));
  } else if (experiment == "e3_mi_maximize") {
    add({{"n", Type::Int, "8"},
         {"sigma_x2", Type::Real, "1"},
         {"t", Type::Real, "0.5"},
         {"init", Type::Choice, "gaussian", {"gaussian", "test_matrix"}},
         {"score_mode", Type::Choice, "both", {"analytic", "learned", "both"}}});
    add(ascent_keys("60", "0.2", "50000"));
    add(dsm_keys("1000", "4096", "0.1", true, "0.0001"));
  } else if (experiment == "e4_tanh_maximize") {
    add({{"n", Type::Int, "12"},
         {"sigma_x2", Type::Real, "1"},
         {"t", Type::Real, "0.5"},
         {"init", Type::Choice, "gaussian", {"gaussian", "test_matrix"}},
         {"score_mode", Type::Choice, "learned", {"learned"}},
         {"kde_samples", Type::Int, "10000"},
         {"kde_every", Type::Int, "5"}});
    add(ascent_keys("60", "0.2", "50000"));
    add(dsm_keys("1000", "4096", "0.1", true, "0.0001"));
  } else if (experiment == "e5_ib_optimize") {
    add({{"n", Type::Int, "12"},
         {"k", Type::Int, "4"},
         {"t", Type::Real, "0.5"},
         {"beta", Type::Real, "1"},
         {"init", Type::Choice, "gaussian", {"gaussian", "test_matrix"}},
         {"score_mode", Type::Choice, "learned", {"analytic", "learned"}}});
    add(ascent_keys("100", "0.05", "10000"));
    add(dsm_keys("200", "512", "0.1", false, "0"));
  } else if (experiment == "validate") {
    add({{"tag", Type::Text, ""}, {"tolerance_scale", Type::Real, "1"}});
  } else {
    throw Error(ErrorCode::ConfigInvalid, "unknown experiment '" + std::string(experiment) + "'");
  }
  return s;
}

const KeySpec& find_spec(const std::vector<KeySpec>& specs, const std::string& key,
                         const std::string& experiment) {
  for (const auto& s : specs) {
    if (s.key == key) return s;
  }
  throw Error(ErrorCode::ConfigInvalid, "unknown key '" + key + "' for " + experiment);
}

bool parse_real(const std::string& v, double& out) {
  if (v.empty()) return false;
  char* end = nullptr;
  errno = 0;
  out = std::strtod(v.c_str(), &end);
  return errno == 0 && end == v.c_str() + v.size() && std::isfinite(out);
}

template <class T>
bool parse_integer(const std::string& v, T& out) {
  const char* first = v.data();
  const char* last = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

bool parse_bool(const std::string& v, bool& out) {
  if (v == "true" || v == "1") return out = true, true;
  if (v == "false" || v == "0") return out = false, true;
  return false;
}

void check_value(const KeySpec& spec, const std::string& value) {
  bool ok = true;
  switch (spec.type) {
    case Type::Real: { double d; ok = parse_real(value, d); break; }
    case Type::Int: { long long i; ok = parse_integer(value, i); break; }
    case Type::Bool: { bool b; ok = parse_bool(value, b); break; }
    case Type::U64: { std::uint64_t u; ok = parse_integer(value, u); break; }
    case Type::Choice: {
      ok = false;
      for (const auto& c : spec.choices) ok = ok || c == value;
      break;
    }
    case Type::Text: break;
  }
  if (!ok) throw Error(ErrorCode::ConfigInvalid, "bad value '" + value + "' for key '" + spec.key + "'");
}

}  // namespace

const std::vector<std::string>& experiment_ids() {
  static const std::vector<std::string> ids{"e1_scalar_gradient", "e2_vector_gradient", "e3_mi_maximize",
                                            "e4_tanh_maximize", "e5_ib_optimize", "validate"};
  return ids;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

ExperimentConfig ExperimentConfig::defaults(std::string_view experiment) {
  ExperimentConfig c;
  c.experiment_ = std::string(experiment);
  for (const auto& s : schema(experiment)) c.values_[s.key] = s.value;
  if (const char* env = std::getenv("INFOGRAD_SEED"); env != nullptr && *env != '\0') {
    std::uint64_t u = 0;
    if (!parse_integer(std::string(env), u)) {
      throw Error(ErrorCode::ConfigInvalid, "INFOGRAD_SEED is not an unsigned 64-bit integer");
    }
    c.values_["seed"] = std::to_string(u);
  }
  if (experiment == "e2_vector_gradient") {
    c.notes_.push_back("alpha grid: alpha_points equally spaced values in (0, alpha_max]");
  }
  if (experiment == "e4_tanh_maximize") {
    c.notes_.push_back(
        "interpretation: noise level, radius, sample sizes and score schedule copied from e3_mi_maximize");
  }
  return c;
}

ExperimentConfig ExperimentConfig::parse(std::string_view experiment, std::string_view text) {
  ExperimentConfig c = defaults(experiment);
  std::istringstream is{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::ConfigInvalid, "line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    if (key == "experiment") {
      if (value != experiment) {
        throw Error(ErrorCode::ConfigInvalid, "config is for '" + value + "', not '" + std::string(experiment) + "'");
      }
      continue;
    }
    c.set(key, value);
  }
  return c;
}

ExperimentConfig ExperimentConfig::load(std::string_view experiment, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot read config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(experiment, ss.str());
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  const auto specs = schema(experiment_);
  const KeySpec& spec = find_spec(specs, key, experiment_);
  check_value(spec, value);
  values_[key] = value;
  if (value != spec.value) overridden_.insert(key);
}

void ExperimentConfig::set_assignment(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw Error(ErrorCode::ConfigInvalid, "override '" + std::string(assignment) + "' is not key=value");
  }
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

const std::string& ExperimentConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw Error(ErrorCode::ConfigInvalid, "key '" + key + "' not set");
  return it->second;
}

double ExperimentConfig::get_double(const std::string& key) const {
  double d = 0.0;
  if (!parse_real(get(key), d)) throw Error(ErrorCode::ConfigInvalid, "key '" + key + "' is not a number");
  return d;
}

Index ExperimentConfig::get_int(const std::string& key) const {
  long long i = 0;
  if (!parse_integer(get(key), i)) throw Error(ErrorCode::ConfigInvalid, "key '" + key + "' is not an integer");
  return static_cast<Index>(i);
}

bool ExperimentConfig::get_bool(const std::string& key) const {
  bool b = false;
  if (!parse_bool(get(key), b)) throw Error(ErrorCode::ConfigInvalid, "key '" + key + "' is not a boolean");
  return b;
}

std::uint64_t ExperimentConfig::seed() const {
  std::uint64_t u = 0;
  if (!parse_integer(get("seed"), u)) throw Error(ErrorCode::ConfigInvalid, "seed is not an unsigned integer");
  return u;
}

std::string ExperimentConfig::canonical() const {
  std::string out = "experiment = " + experiment_ + "\n";
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

std::string ExperimentConfig::echo() const {
  std::string out = "# infograd effective configuration\n";
  for (const auto& n : notes_) out += "# " + n + "\n";
  if (!overridden_.empty()) {
    out += "# overridden:";
    for (const auto& k : overridden_) out += " " + k;
    out += "\n";
  }
  return out + canonical();
}

std::uint64_t ExperimentConfig::hash() const { return stable_hash(canonical()); }

}  // namespace infograd
