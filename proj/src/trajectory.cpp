#include "handshake/trajectory.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "handshake/errors.hpp"

namespace handshake {

bool HandshakeParams::valid() const {
  if (!(duration_s > 0.0) || !std::isfinite(duration_s)) return false;
  if (!(stiffness >= kStiffnessMin && stiffness <= kStiffnessMax)) return false;
  if (is_passive()) return true;
  const double a = amplitude_cm();
  return a >= kAmplitudeMinCm && a <= kAmplitudeMaxCm && frequency_hz >= kFrequencyMinHz &&
         frequency_hz <= kFrequencyMaxHz;
}

void validate(const HandshakeParams& p) {
  if (!p.valid()) {
    throw InvalidArgument("handshake parameters out of range: a=" + std::to_string(p.amplitude_cm()) +
                          " cm, f=" + std::to_string(p.frequency_hz) +
                          " Hz, k=" + std::to_string(p.stiffness) +
                          ", T=" + std::to_string(p.duration_s) + " s");
  }
}

AmplitudeComponents map_amplitude(double amplitude, double pitch_rad) {
  return {-amplitude * std::sin(pitch_rad), amplitude * std::cos(pitch_rad)};
}

Vec3 world_up_in_leg(double pitch_rad) {
  return {-std::sin(pitch_rad), 0.0, std::cos(pitch_rad)};
}

Vec3 foot_target(const HandshakeParams& params, const NominalPose& nominal, const BodyPose& body,
                 double t) {
  if (params.amplitude_m == 0.0) return nominal.vec();
  const auto [ax, az] = map_amplitude(params.amplitude_m, body.pitch_rad);
  const double s = std::sin(2.0 * std::numbers::pi * params.frequency_hz * t);
  return {nominal.x + ax * s, nominal.y, nominal.z + az * s};
}

}  // namespace handshake
