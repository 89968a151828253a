#include "handshake/leg.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "handshake/errors.hpp"

namespace handshake {

namespace {

struct PlanarFoot {
  double x;  // sagittal position before abduction
  double y;
  double z;
};

PlanarFoot sagittal(const Vec3& q, const LegConfig& cfg) {
  const double s1 = std::sin(q[1]), c1 = std::cos(q[1]);
  const double s12 = std::sin(q[1] + q[2]), c12 = std::cos(q[1] + q[2]);
  return {-cfg.thigh_len * s1 - cfg.calf_len * s12, -cfg.hip_offset,
          -cfg.thigh_len * c1 - cfg.calf_len * c12};
}

double wrap_angle(double a) { return std::remainder(a, 2.0 * std::numbers::pi); }

}  // namespace

bool LegConfig::valid() const {
  return hip_offset > 0.0 && thigh_len > 0.0 && calf_len > 0.0 && foot_mass > 0.0 &&
         std::isfinite(gravity);
}

ControllerGains ControllerGains::from_stiffness(double k, double joint_damping) {
  ControllerGains g;
  g.kp_cart = k * Mat3::Identity();
  g.kd_cart = kDampingRatio * g.kp_cart;
  g.kd_joint = joint_damping * Mat3::Identity();
  return g;
}

bool ControllerGains::valid() const {
  auto diag_nonneg = [](const Mat3& m) {
    const Mat3 off = m - Mat3(m.diagonal().asDiagonal());
    return off.isZero(0.0) && (m.diagonal().array() >= 0.0).all() && m.allFinite();
  };
  return diag_nonneg(kp_cart) && diag_nonneg(kd_cart) && diag_nonneg(kd_joint);
}

Vec3 forward_kinematics(const Vec3& q, const LegConfig& cfg) {
  const auto f = sagittal(q, cfg);
  const double s0 = std::sin(q[0]), c0 = std::cos(q[0]);
  return {f.x, f.y * c0 - f.z * s0, f.y * s0 + f.z * c0};
}

Mat3 jacobian(const Vec3& q, const LegConfig& cfg) {
  const auto f = sagittal(q, cfg);
  const double s0 = std::sin(q[0]), c0 = std::cos(q[0]);
  const double s12 = std::sin(q[1] + q[2]), c12 = std::cos(q[1] + q[2]);

  // Sagittal-plane derivatives, then rotated by the abduction.
  const double dx_dq1 = f.z;
  const double dz_dq1 = -f.x;
  const double dx_dq2 = -cfg.calf_len * c12;
  const double dz_dq2 = cfg.calf_len * s12;

  Mat3 j;
  j.col(0) << 0.0, -f.y * s0 - f.z * c0, f.y * c0 - f.z * s0;
  j.col(1) << dx_dq1, -dz_dq1 * s0, dz_dq1 * c0;
  j.col(2) << dx_dq2, -dz_dq2 * s0, dz_dq2 * c0;
  return j;
}

Vec3 cartesian_pd_torque(const JointState& state, const FootState& foot, const Vec3& target,
                         const ControllerGains& gains, const LegConfig& cfg) {
  const Vec3 force = gains.kp_cart * (target - foot.p) - gains.kd_cart * foot.v;
  return jacobian(state.q, cfg).transpose() * force - gains.kd_joint * state.qdot;
}

Vec3 inverse_kinematics(const Vec3& p, const LegConfig& cfg, const IkOptions& options) {
  if (!p.allFinite()) throw UnreachableTarget("non-finite foot target");
  const double h = cfg.hip_offset;
  const double l1 = cfg.thigh_len, l2 = cfg.calf_len;

  // Abduction: rotate the target back into the sagittal plane y = -h.
  const double r2 = p.y() * p.y() + p.z() * p.z();
  double zs;
  if (r2 < h * h) {
    if (!options.clamp) throw UnreachableTarget("target inside the abduction cylinder");
    zs = 0.0;
  } else {
    zs = -std::sqrt(r2 - h * h);
  }
  const double q0 = std::atan2(p.z(), p.y()) - std::atan2(zs, -h);

  double xs = p.x();
  double d = std::hypot(xs, zs);
  const double reach = l1 + l2;
  const double inner = std::abs(l1 - l2);
  if (d > reach) {
    if (d - reach > options.extension_tolerance) {
      if (!options.clamp) throw UnreachableTarget("target beyond leg reach");
      xs *= reach / d;
      zs *= reach / d;
    }
    d = reach;
  } else if (d < inner) {
    if (!options.clamp) throw UnreachableTarget("target inside the inner workspace boundary");
    d = inner;
  } else if (reach - d <= options.extension_tolerance) {
    d = reach;
  }

  const double cos_knee = std::clamp((d * d - l1 * l1 - l2 * l2) / (2.0 * l1 * l2), -1.0, 1.0);
  const double q2 = -std::acos(cos_knee);
  const double k1 = l1 + l2 * std::cos(q2);
  const double k2 = l2 * std::sin(q2);
  const double q1 = std::atan2(-xs, -zs) - std::atan2(k2, k1);
  return {wrap_angle(q0), wrap_angle(q1), q2};
}

}  // namespace handshake
