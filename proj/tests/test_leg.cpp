#include <cmath>
#include <numbers>

#include <Eigen/Geometry>
#include <gtest/gtest.h>

#include "handshake/errors.hpp"
#include "handshake/leg.hpp"
#include "handshake/rng.hpp"

using namespace handshake;

namespace {

// Independent chain of rigid transforms: abduct about x, offset the hip,
// flex the hip about y, walk down the thigh, flex the knee, walk down the calf.
Vec3 chain_fk(const Vec3& q, const LegConfig& c) {
  using Eigen::AngleAxisd;
  const Eigen::Matrix3d r0 = AngleAxisd(q[0], Vec3::UnitX()).toRotationMatrix();
  const Eigen::Matrix3d r1 = AngleAxisd(q[1], Vec3::UnitY()).toRotationMatrix();
  const Eigen::Matrix3d r2 = AngleAxisd(q[2], Vec3::UnitY()).toRotationMatrix();
  const Vec3 calf(0, 0, -c.calf_len);
  const Vec3 thigh(0, 0, -c.thigh_len);
  const Vec3 hip(0, -c.hip_offset, 0);
  return r0 * (hip + r1 * (thigh + r2 * calf));
}

Vec3 random_q(Rng& rng) {
  return {uniform(rng, -0.6, 0.6), uniform(rng, -1.2, 1.2), uniform(rng, -2.5, -0.1)};
}

}  // namespace

TEST(ForwardKinematics, MatchesTransformChain) {
  const LegConfig cfg;
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 q(uniform(rng, -3, 3), uniform(rng, -3, 3), uniform(rng, -3, 3));
    EXPECT_LT((forward_kinematics(q, cfg) - chain_fk(q, cfg)).norm(), 1e-14);
  }
}

TEST(ForwardKinematics, StraightDown) {
  const LegConfig cfg;
  const Vec3 p = forward_kinematics(Vec3::Zero(), cfg);
  EXPECT_NEAR(p.x(), 0.0, 1e-15);
  EXPECT_NEAR(p.y(), -0.08, 1e-15);
  EXPECT_NEAR(p.z(), -0.426, 1e-15);
}

TEST(ForwardKinematics, SingleLinkQuarterTurn) {
  LegConfig cfg;
  cfg.calf_len = 0.0;
  const Vec3 p = forward_kinematics({0.0, std::numbers::pi / 2, 0.0}, cfg);
  EXPECT_NEAR(p.x(), -cfg.thigh_len, 1e-15);
  EXPECT_NEAR(p.y(), -cfg.hip_offset, 1e-15);
  EXPECT_NEAR(p.z(), 0.0, 1e-15);
}

TEST(Jacobian, MatchesCentralDifferences) {
  const LegConfig cfg;
  Rng rng(2);
  const double eps = 1e-6;
  for (int i = 0; i < 200; ++i) {
    const Vec3 q = random_q(rng);
    const Mat3 j = jacobian(q, cfg);
    for (int c = 0; c < 3; ++c) {
      Vec3 dq = Vec3::Zero();
      dq[c] = eps;
      const Vec3 fd = (chain_fk(q + dq, cfg) - chain_fk(q - dq, cfg)) / (2 * eps);
      EXPECT_LE((j.col(c) - fd).norm(), 1e-5 * std::max(1.0, fd.norm())) << "column " << c;
    }
  }
}

TEST(Jacobian, SingularWhenStraight) {
  const LegConfig cfg;
  EXPECT_NEAR(jacobian({0.2, 0.4, 0.0}, cfg).determinant(), 0.0, 1e-15);
  EXPECT_GT(std::abs(jacobian({0.2, 0.4, -1.0}, cfg).determinant()), 1e-4);
}

TEST(InverseKinematics, RoundTrip) {
  const LegConfig cfg;
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 q = random_q(rng);
    // IK returns the foot-below-hip solution; skip poses on the other branch.
    if (cfg.thigh_len * std::cos(q[1]) + cfg.calf_len * std::cos(q[1] + q[2]) < 0.02) continue;
    const Vec3 p = forward_kinematics(q, cfg);
    const Vec3 back = inverse_kinematics(p, cfg);
    EXPECT_LT((back - q).norm(), 1e-9);
    EXPECT_LT((forward_kinematics(back, cfg) - p).norm(), 1e-9);
  }
}

TEST(InverseKinematics, NominalPoseReachable) {
  const LegConfig cfg;
  const Vec3 p = NominalPose{}.vec();
  const Vec3 q = inverse_kinematics(p, cfg);
  EXPECT_LT((forward_kinematics(q, cfg) - p).norm(), 1e-12);
  EXPECT_LE(q[2], 0.0);
}

TEST(InverseKinematics, Unreachable) {
  const LegConfig cfg;
  EXPECT_THROW(inverse_kinematics({0.0, -0.08, -0.5}, cfg), UnreachableTarget);
  EXPECT_THROW(inverse_kinematics({0.0, -0.01, 0.01}, cfg), UnreachableTarget);
  EXPECT_THROW(inverse_kinematics({NAN, 0, 0}, cfg), UnreachableTarget);
  const Vec3 q = inverse_kinematics({0.0, -0.08, -0.5}, cfg, {.clamp = true});
  EXPECT_NEAR(forward_kinematics(q, cfg).z(), -0.426, 1e-12);
}

TEST(InverseKinematics, SnapsFullExtension) {
  const LegConfig cfg;
  const Vec3 q = inverse_kinematics({0.0, -0.08, -0.426 - 5e-7}, cfg);
  EXPECT_DOUBLE_EQ(q[2], 0.0);
}

TEST(CartesianPd, ZeroErrorZeroTorque) {
  const LegConfig cfg;
  const auto gains = ControllerGains::from_stiffness(115);
  JointState js;
  js.q = Vec3(0.1, 0.5, -1.2);
  FootState foot{forward_kinematics(js.q, cfg), Vec3::Zero()};
  EXPECT_EQ(cartesian_pd_torque(js, foot, foot.p, gains, cfg), Vec3::Zero());
}

TEST(CartesianPd, GainsFromStiffness) {
  const auto g = ControllerGains::from_stiffness(100);
  EXPECT_TRUE(g.kp_cart.isApprox(100 * Mat3::Identity()));
  EXPECT_TRUE(g.kd_cart.isApprox(2 * Mat3::Identity()));
  EXPECT_TRUE(g.kd_joint.isApprox(0.8 * Mat3::Identity()));
  EXPECT_TRUE(g.valid());
  ControllerGains bad = g;
  bad.kp_cart(0, 1) = 1.0;
  EXPECT_FALSE(bad.valid());
}

TEST(CartesianPd, PowerBalance) {
  const LegConfig cfg;
  const auto gains = ControllerGains::from_stiffness(150, 0.0);
  Rng rng(4);
  for (int i = 0; i < 100; ++i) {
    JointState js;
    js.q = random_q(rng);
    js.qdot = Vec3(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
    const Mat3 j = jacobian(js.q, cfg);
    FootState foot{forward_kinematics(js.q, cfg), j * js.qdot};
    const Vec3 target = foot.p + Vec3(uniform(rng, -0.05, 0.05), 0.01, uniform(rng, -0.05, 0.05));
    const Vec3 force = gains.kp_cart * (target - foot.p) - gains.kd_cart * foot.v;
    const Vec3 tau = cartesian_pd_torque(js, foot, target, gains, cfg);
    EXPECT_NEAR(tau.dot(js.qdot), force.dot(foot.v), 1e-12);
  }
}

TEST(CartesianPd, LinearInError) {
  const LegConfig cfg;
  const auto gains = ControllerGains::from_stiffness(80, 0.0);
  JointState js;
  js.q = Vec3(0.0, 0.3, -0.9);
  FootState foot{forward_kinematics(js.q, cfg), Vec3::Zero()};
  const Vec3 e(0.01, -0.02, 0.005);
  const Vec3 t1 = cartesian_pd_torque(js, foot, foot.p + e, gains, cfg);
  const Vec3 t3 = cartesian_pd_torque(js, foot, foot.p + 3 * e, gains, cfg);
  EXPECT_LT((t3 - 3 * t1).norm(), 1e-13);
}

TEST(CartesianPd, JointDampingOpposesMotion) {
  const LegConfig cfg;
  const auto gains = ControllerGains::from_stiffness(100);
  JointState js;
  js.q = Vec3(0.0, 0.3, -0.9);
  js.qdot = Vec3(1.0, -2.0, 0.5);
  FootState foot{forward_kinematics(js.q, cfg), Vec3::Zero()};
  EXPECT_TRUE(cartesian_pd_torque(js, foot, foot.p, gains, cfg).isApprox(-0.8 * js.qdot));
}

TEST(CartesianPd, SingleLinkNormalError) {
  LegConfig cfg;
  cfg.calf_len = 0.0;
  const double k = 120.0, e = 0.01;
  const auto gains = ControllerGains::from_stiffness(k, 0.0);
  JointState js;
  FootState foot{forward_kinematics(js.q, cfg), Vec3::Zero()};
  // The link hangs along -z, so x is its normal in the sagittal plane.
  const Vec3 tau = cartesian_pd_torque(js, foot, foot.p + Vec3(e, 0, 0), gains, cfg);
  EXPECT_NEAR(std::abs(tau[1]), k * cfg.thigh_len * e, 1e-15);
  EXPECT_NEAR(tau[0], 0.0, 1e-15);
  EXPECT_NEAR(tau[2], 0.0, 1e-15);
}
