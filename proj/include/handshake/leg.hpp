#pragma once

#include "handshake/trajectory.hpp"

namespace handshake {

/// Geometry of the front-right leg plus the point-mass foot surrogate.
///
/// Joint convention: q0 abducts about the leg-frame x axis, q1 (hip) and
/// q2 (knee) flex about y. At q = 0 the leg hangs straight down and the
/// foot sits at (0, -hip_offset, -(thigh_len + calf_len)). The knee uses
/// the q2 <= 0 branch.
struct LegConfig {
  double hip_offset = 0.08;
  double thigh_len = 0.213;
  double calf_len = 0.213;
  double foot_mass = 0.15;
  double gravity = 9.81;

  double max_reach() const { return hip_offset + thigh_len + calf_len; }
  bool valid() const;
};

struct JointState {
  Vec3 q = Vec3::Zero();
  Vec3 qdot = Vec3::Zero();
};

struct FootState {
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
};

struct ControllerGains {
  Mat3 kp_cart = Mat3::Zero();
  Mat3 kd_cart = Mat3::Zero();
  Mat3 kd_joint = Mat3::Zero();

  static constexpr double kDampingRatio = 0.02;
  static constexpr double kJointDamping = 0.8;

  /// K_p = k I, K_d = 0.02 K_p, joint damping 0.8 I unless overridden.
  static ControllerGains from_stiffness(double k, double joint_damping = kJointDamping);

  bool valid() const;
};

Vec3 forward_kinematics(const Vec3& q, const LegConfig& cfg);

/// Columns are dp/dq_i.
Mat3 jacobian(const Vec3& q, const LegConfig& cfg);

/// tau = J^T [K_p (p_d - p) - K_d v] - K_d,joint qdot
Vec3 cartesian_pd_torque(const JointState& state, const FootState& foot, const Vec3& target,
                         const ControllerGains& gains, const LegConfig& cfg);

struct IkOptions {
  // Project unreachable targets onto the workspace boundary instead of throwing.
  bool clamp = false;
  // Targets this close to full extension are snapped to the straight knee.
  double extension_tolerance = 1e-6;
};

/// Throws UnreachableTarget outside the workspace unless options.clamp is set.
Vec3 inverse_kinematics(const Vec3& p, const LegConfig& cfg, const IkOptions& options = {});

}  // namespace handshake
