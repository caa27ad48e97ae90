#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "hdrsplat/datagen.hpp"
#include "hdrsplat/metrics.hpp"
#include "hdrsplat/optimizer.hpp"

namespace hdrsplat {

struct ConfigKey {
  std::string name;           // `section.key`
  std::string default_value;
  std::string help;
};

// Every recognised key with its default.
const std::vector<ConfigKey>& config_registry();

/// Resolved run configuration.
///
/// Files hold `section.key = value` lines ('#' starts a comment). Unknown keys
/// and malformed values raise ConfigError. Later sets override earlier ones,
/// so applying the file first and then command-line flags gives flag priority.
class RunConfig {
 public:
  RunConfig();

  void set(const std::string& key, const std::string& value);
  void load_file(const std::filesystem::path& path);
  bool is_set_explicitly(const std::string& key) const;

  const std::string& get(const std::string& key) const;
  double get_double(const std::string& key) const;
  long long get_int(const std::string& key) const;
  bool get_bool(const std::string& key) const;

  RigSpec rig_spec() const;
  ExposurePolicy exposure_policy() const;
  TrainConfig train_config() const;
  HisNorm his_norm() const;

  // All keys, sorted, in the file syntax; reloading it reproduces the config.
  void write(const std::filesystem::path& path) const;

 private:
  std::map<std::string, std::string> values_;
  std::map<std::string, bool> explicit_;
};

}  // namespace hdrsplat
