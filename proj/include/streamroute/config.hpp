// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "streamroute/memory.hpp"
#include "streamroute/reason.hpp"
#include "streamroute/simulator.hpp"

namespace streamroute {

struct ReadinessTrainingConfig {
  int epochs = 200;
  double learning_rate = 0.5;
  bool operator==(const ReadinessTrainingConfig&) const = default;
};

struct EnvironmentConfig {
  SyntheticStreamConfig stream;
  OracleConfig oracle;
  QueryConfig queries;
  ReadinessTrainingConfig readiness;
  bool operator==(const EnvironmentConfig&) const = default;
};

struct RunConfig {
  CompressionPolicy memory;
  BandConfig band;
  TrainerConfig trainer;
  bool warm_start = false;
  EnvironmentConfig environment;
  std::string output_dir = "out";
  std::uint64_t seed = 7;

  // Throws ConfigError naming the offending key.
  void validate() const;
  bool operator==(const RunConfig&) const = default;
};

// Key path (e.g. "band.eta") -> scalar text, applied on top of the document.
using ConfigOverrides = std::map<std::string, std::string>;

// Collects STREAMROUTE_SECTION__KEY=value variables from the process
// environment as {"section.key": value}.
ConfigOverrides overrides_from_environment();

// Parses a YAML document. Missing keys keep their defaults; unknown keys,
// malformed values and invariant violations throw ConfigError.
RunConfig parse_config(const std::string& text, const ConfigOverrides& overrides = {});
RunConfig load_config(const std::filesystem::path& path, const ConfigOverrides& overrides = {});

std::string dump_config(const RunConfig& config);
void save_config(const RunConfig& config, const std::filesystem::path& path);

}  // namespace streamroute
