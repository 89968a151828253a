#pragma once

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <mutex>
#include <optional>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "handshake/leg.hpp"
#include "handshake/rng.hpp"
#include "handshake/trajectory.hpp"

namespace handshake {

/// Stand-in for the human partner. The hand pulls the foot toward an
/// oscillating target along the world vertical through a spring-damper grip.
struct HumanHandModel {
  double intent_amplitude = 0.0;  // m
  double intent_frequency = 0.0;  // Hz
  double intent_phase = 0.0;      // rad, relative to shake onset
  double grip_stiffness = 0.0;    // N/m; 0 is a fully passive hand
  double grip_damping = 0.0;      // N s/m
  double drift_rate = 0.0;        // m/s, hand nominal drift along the world vertical

  bool valid() const;
  bool operator==(const HumanHandModel&) const = default;
};

enum class PhaseKind { Rest, Sit, Wait, Shake, Return };

struct ShakePhase {
  PhaseKind kind = PhaseKind::Rest;
  double elapsed = 0.0;  // seconds spent in Shake
};

std::string_view to_string(PhaseKind kind);

/// Rest->Sit->Wait->Shake->Return->Wait; Shake only from Wait.
bool is_allowed_transition(PhaseKind from, PhaseKind to);

struct SimConfig {
  LegConfig leg;
  NominalPose nominal;
  double dt = 0.001;
  double joint_damping = ControllerGains::kJointDamping;

  // Grasp detection.
  double nominal_window_s = 0.5;
  double torque_floor = 0.05;
  double grasp_ratio = 1.5;

  // Scripted human arrival in Wait: attaches after the nominal window plus
  // a delay and a uniform jitter, then pulls the foot down by grasp_pull_m.
  double grasp_delay_s = 0.1;
  double grasp_jitter_s = 0.2;
  double grasp_pull_m = 0.03;
  // run_handshake injects a grasp event when torque detection has not fired
  // this long after the hand attached (e.g. a passive hand).
  double grasp_timeout_s = 1.0;

  double return_epsilon_m = 0.005;
  double return_timeout_s = 2.0;

  // Std of the white force noise of an attached hand, N per axis.
  double force_noise_n = 0.1;

  // Divergence guards.
  double max_speed = 50.0;

  bool valid() const;
};

/// Time series of one shake window, sampled every dt.
struct HandshakeLog {
  double dt = 0.001;
  double pitch_rad = 0.0;
  std::uint64_t seed = 0;
  HandshakeParams params;
  std::vector<Vec3> desired_path;
  std::vector<Vec3> actual_path;
  std::vector<Vec3> torques;
  std::vector<Vec3> joint_vel;

  std::size_t size() const { return desired_path.size(); }
  bool consistent() const;
  bool operator==(const HandshakeLog&) const = default;
};

/// Projection of a leg-frame path onto the world vertical.
std::vector<double> world_vertical(const std::vector<Vec3>& path, double pitch_rad);

void write_log_csv(const HandshakeLog& log, std::ostream& out);
/// Parses the CSV body; dt, params, pitch and seed come from the envelope.
HandshakeLog read_log_csv(std::istream& in, const nlohmann::json& envelope);
nlohmann::json log_envelope(const HandshakeLog& log);

/// True when at least two of three joints carry >= ratio x their nominal
/// torque magnitude. Throws NominalTooSmall if a nominal is below `floor`.
bool detect_grasp(const Vec3& current_torque, const Vec3& nominal_torque, double floor = 0.05,
                  double ratio = 1.5);

/// Grasp events from outside the loop (e.g. a UI button). Each Wait phase
/// consumes at most one event; leftovers are dropped when it does.
class GraspEventQueue {
 public:
  void push();
  bool try_consume();
  std::size_t pending() const;

 private:
  mutable std::mutex mutex_;
  std::size_t count_ = 0;
};

/// Terms of the foot force that are linear in the state:
///   F(p, v) = sum_i K_i (anchor_i - p) - C v + constant
struct LinearForceModel {
  Mat3 stiffness = Mat3::Zero();
  Vec3 anchored = Vec3::Zero();  // sum_i K_i anchor_i
  Mat3 damping = Mat3::Zero();
  Vec3 constant = Vec3::Zero();

  void add_spring(const Mat3& k, const Vec3& anchor, const Mat3& c);
  Vec3 force(const FootState& s) const;
};

/// One linearly implicit Euler step of m pdd = F(p, v): springs and dampers
/// are evaluated at the new state, the constant force at the old one.
FootState integrate_foot(const FootState& state, const LinearForceModel& forces, double mass,
                         double dt);

/// One handshake cell (robot leg + human hand) driven at 1/dt Hz.
class InteractionSim {
 public:
  InteractionSim(const SimConfig& config, const HandshakeParams& params, const HumanHandModel& hand,
                 const BodyPose& body, std::uint64_t seed);

  /// Integrates one tick and then evaluates phase transitions.
  void step();

  /// Applies the transition rules of the current phase. Rest and Sit are
  /// scripted and advance unconditionally.
  ShakePhase advance_phase();

  ShakePhase phase() const { return phase_; }
  double time() const { return static_cast<double>(tick_) * config_.dt; }
  const FootState& foot() const { return foot_; }
  JointState joints() const;
  Vec3 rest_position() const;
  Vec3 last_torque() const { return last_torque_; }
  bool hand_attached() const { return attached_; }
  double hand_attach_time() const { return attach_time_; }

  GraspEventQueue& grasp_events() { return events_; }

  /// Shake onsets, and grasp detections (torque rule or consumed event).
  int shakes_started() const { return shakes_started_; }
  int grasps_detected() const { return grasps_detected_; }

  /// Parameters for the next shake; only honored in Wait.
  void set_params(const HandshakeParams& params);

  /// Overrides the foot state (scripted poses).
  void set_foot(const FootState& foot) { foot_ = foot; }

  std::optional<HandshakeLog> take_log();

 private:
  Vec3 hand_target() const;
  Vec3 desired() const;
  bool grasp_now();

  SimConfig config_;
  HandshakeParams params_;
  HumanHandModel hand_;
  BodyPose body_;
  ControllerGains gains_;
  std::uint64_t seed_;
  Rng rng_;

  ShakePhase phase_;
  std::int64_t tick_ = 0;
  std::int64_t phase_tick_ = 0;  // ticks spent in the current phase
  FootState foot_;
  Vec3 last_torque_ = Vec3::Zero();

  double arrival_time_ = 0.0;
  bool attached_ = false;
  double attach_time_ = 0.0;
  Vec3 hand_anchor_ = Vec3::Zero();

  std::deque<Vec3> wait_torques_;
  Vec3 wait_torque_sum_ = Vec3::Zero();
  bool grasp_flag_ = false;

  GraspEventQueue events_;
  int shakes_started_ = 0;
  int grasps_detected_ = 0;

  HandshakeLog current_;
  std::optional<HandshakeLog> finished_;
};

/// Runs one Wait -> Shake -> Return cycle and returns the shake log.
HandshakeLog run_handshake(const HandshakeParams& params, const HumanHandModel& hand,
                           const BodyPose& body, std::uint64_t seed, const SimConfig& config = {});

}  // namespace handshake
