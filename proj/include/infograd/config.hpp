#pragma once

// Flat "key = value" experiment configuration with per-experiment defaults.

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "infograd/core_math.hpp"

namespace infograd {

inline constexpr std::uint64_t kDefaultSeed = 20240607;

const std::vector<std::string>& experiment_ids();

class ExperimentConfig {
 public:
  // Defaults for one experiment id; the seed defaults to INFOGRAD_SEED when set.
  static ExperimentConfig defaults(std::string_view experiment);
  // Defaults overlaid with the key = value lines of `text` ('#' starts a comment).
  static ExperimentConfig parse(std::string_view experiment, std::string_view text);
  static ExperimentConfig load(std::string_view experiment, const std::string& path);

  const std::string& experiment() const noexcept { return experiment_; }

  // Rejects unknown keys and values that do not parse as the key's type.
  void set(const std::string& key, const std::string& value);
  void set_assignment(std::string_view assignment);  // "key=value"
  bool has(const std::string& key) const { return values_.count(key) != 0; }

  const std::string& get(const std::string& key) const;
  double get_double(const std::string& key) const;
  Index get_int(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::uint64_t seed() const;
  void set_seed(std::uint64_t seed) { set("seed", std::to_string(seed)); }

  const std::map<std::string, std::string>& values() const noexcept { return values_; }
  const std::set<std::string>& overridden() const noexcept { return overridden_; }

  // Canonical text form; parse(experiment, echo()) reproduces values() exactly.
  std::string echo() const;
  // FNV-1a over the canonical key = value lines (comments excluded).
  std::uint64_t hash() const;

 private:
  std::string canonical() const;

  std::string experiment_;
  std::map<std::string, std::string> values_;
  std::set<std::string> overridden_;
  std::vector<std::string> notes_;
};

std::string format_double(double v);  // 17 significant digits
std::string hex64(std::uint64_t v);

}  // namespace infograd
