#pragma once

#include <cstdint>
#include <limits>
#include <variant>

#include <json.hpp>

#include "handshake/interaction.hpp"
#include "handshake/preference.hpp"

namespace handshake {

/// beta value meaning "always pick the higher utility".
inline constexpr double kInfiniteBeta = std::numeric_limits<double>::infinity();

struct LinearPreference {
  Vec3 omega_true = Vec3::Zero();
  double beta = 1.0;
};

struct IdealPointPreference {
  HandshakeParams target;
  double beta = 1.0;
  Vec3 weights = Vec3::Ones();
};

using PreferenceKind = std::variant<LinearPreference, IdealPointPreference>;

struct GripRange {
  double min = 50.0;
  double max = 500.0;
};

/// Synthetic participant answering comparison queries.
class SyntheticUser {
 public:
  SyntheticUser(PreferenceKind kind, std::uint64_t seed, GripRange grip = {});

  /// Preference utility of a handshake (without beta).
  double utility(const HandshakeParams& p) const;

  Choice answer(const Query& query);

  /// Hand that shakes the way this user prefers. Its phase is aligned with
  /// the onset of the robot's shake, so `params` only fixes the time origin.
  HumanHandModel hand_for(const HandshakeParams& params) const;

  /// Preferred point in parameter space (projected into the box).
  HandshakeParams preferred() const;

  const PreferenceKind& kind() const { return kind_; }
  double beta() const;

 private:
  PreferenceKind kind_;
  GripRange grip_;
  Rng rng_;
};

/// Grip damping assigned by hand_for.
inline constexpr double kOracleGripDamping = 3.0;

/// JSON definition: {"kind": "linear", "omega": [..], "beta": 1 | "inf"} or
/// {"kind": "ideal_point", "target": {amplitude_cm, frequency_hz, stiffness},
///  "beta": .., "weights": [..], "target_spread": {..}?}. A target_spread
/// draws the target per session from a clipped normal around "target";
/// "target": "uniform" draws it uniformly from the parameter box.
PreferenceKind preference_from_json(const nlohmann::json& j, std::uint64_t seed);
void validate_oracle_json(const nlohmann::json& j);

}  // namespace handshake
