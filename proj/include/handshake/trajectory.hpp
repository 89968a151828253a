#pragma once

#include <Eigen/Core>

namespace handshake {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Parameter box of an active handshake.
inline constexpr double kAmplitudeMinCm = 1.0;
inline constexpr double kAmplitudeMaxCm = 10.0;
inline constexpr double kFrequencyMinHz = 1.0;
inline constexpr double kFrequencyMaxHz = 3.5;
inline constexpr double kStiffnessMin = 30.0;
inline constexpr double kStiffnessMax = 200.0;
inline constexpr double kDefaultDurationS = 3.0;

/// One handshake: oscillation amplitude/frequency, Cartesian stiffness k
/// (K_p = k I) and duration. Amplitude is stored in meters.
struct HandshakeParams {
  double amplitude_m = 0.0;
  double frequency_hz = 0.0;
  double stiffness = 115.0;
  double duration_s = kDefaultDurationS;

  static HandshakeParams from_cm(double amplitude_cm, double frequency_hz, double stiffness,
                                 double duration_s = kDefaultDurationS) {
    return {amplitude_cm / 100.0, frequency_hz, stiffness, duration_s};
  }
  static HandshakeParams passive(double stiffness, double duration_s = kDefaultDurationS) {
    return {0.0, 0.0, stiffness, duration_s};
  }

  double amplitude_cm() const { return amplitude_m * 100.0; }
  bool is_passive() const { return amplitude_m == 0.0 && frequency_hz == 0.0; }

  /// Active parameters inside the range box, or a passive handshake with
  /// in-range stiffness. Duration must be positive either way.
  bool valid() const;

  bool operator==(const HandshakeParams&) const = default;
};

/// Throws InvalidArgument when !p.valid().
void validate(const HandshakeParams& p);

struct NominalPose {
  double x = 0.06;
  double y = -0.08;
  double z = -0.24;

  Vec3 vec() const { return {x, y, z}; }
};

struct BodyPose {
  double pitch_rad = 0.6;
};

struct AmplitudeComponents {
  double x;
  double z;
};

/// Splits a world-vertical amplitude into leg-frame x/z for a pitched body.
AmplitudeComponents map_amplitude(double amplitude, double pitch_rad);

/// World vertical axis expressed in the leg frame of a body pitched by `pitch_rad`.
Vec3 world_up_in_leg(double pitch_rad);

/// Desired foot position in the leg frame at time t after shake onset.
Vec3 foot_target(const HandshakeParams& params, const NominalPose& nominal, const BodyPose& body,
                 double t);

}  // namespace handshake
