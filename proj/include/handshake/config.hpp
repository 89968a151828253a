#pragma once

#include <cstdint>
#include <map>
#include <string>

#include <json.hpp>

#include "handshake/interaction.hpp"
#include "handshake/metrics.hpp"
#include "handshake/oracle.hpp"
#include "handshake/preference.hpp"

namespace handshake {

inline constexpr int kConfigSchemaVersion = 1;

/// Everything a session depends on. Loaded from a single JSON document;
/// absent keys keep their defaults, unknown keys are rejected.
struct ExperimentConfig {
  std::uint64_t seed = 1;
  double duration_s = kDefaultDurationS;
  BodyPose body;
  SimConfig sim;
  LearnerSettings learning;
  MetricOptions metrics;
  HumanHandModel neutral_hand{0.04, 2.0, 0.0, 150.0, 3.0, 0.0};
  GripRange grip;
  std::map<std::string, nlohmann::json> oracles;
  std::string default_oracle = "ideal_population";
  int threads = 0;  // batch workers; 0 = hardware concurrency (not hashed)

  ExperimentConfig();
};

nlohmann::json config_to_json(const ExperimentConfig& config);
/// Throws ConfigInvalid on unknown keys, wrong types or out-of-range values.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);
void validate(const ExperimentConfig& config);

/// FNV-1a over the canonical JSON of the semantic fields, as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

}  // namespace handshake
