#include <cmath>
#include <numbers>

#include <Eigen/Geometry>
#include <gtest/gtest.h>

#include "handshake/errors.hpp"
#include "handshake/rng.hpp"
#include "handshake/trajectory.hpp"

using namespace handshake;

TEST(MapAmplitude, Upright) {
  const auto m = map_amplitude(0.05, 0.0);
  EXPECT_DOUBLE_EQ(m.x, 0.0);
  EXPECT_DOUBLE_EQ(m.z, 0.05);
}

TEST(MapAmplitude, QuarterTurn) {
  const auto m = map_amplitude(0.05, std::numbers::pi / 2);
  EXPECT_NEAR(m.x, -0.05, 1e-15);
  EXPECT_NEAR(m.z, 0.0, 1e-15);
}

TEST(MapAmplitude, ThirtyDegrees) {
  const auto m = map_amplitude(0.04, std::numbers::pi / 6);
  EXPECT_NEAR(m.x, -0.02, 1e-15);
  EXPECT_NEAR(m.z, 0.02 * std::sqrt(3.0), 1e-15);
}

TEST(MapAmplitude, PreservesNorm) {
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const double a = uniform(rng, 0.0, 0.1);
    const double th = uniform(rng, 0.0, 1.5);
    const auto m = map_amplitude(a, th);
    EXPECT_NEAR(m.x * m.x + m.z * m.z, a * a, 1e-15);
  }
}

TEST(FootTarget, ZeroAmplitudeStaysAtNominal) {
  const NominalPose nom;
  const auto p = HandshakeParams::passive(115);
  for (double t : {0.0, 0.3, 1.7, 2.99}) EXPECT_EQ(foot_target(p, nom, BodyPose{0.4}, t), nom.vec());
}

TEST(FootTarget, StartsAtNominal) {
  const NominalPose nom;
  const auto p = HandshakeParams::from_cm(7, 3.1, 60);
  EXPECT_EQ(foot_target(p, nom, BodyPose{0.6}, 0.0), nom.vec());
}

TEST(FootTarget, QuarterPeriodPeak) {
  const NominalPose nom;
  const auto p = HandshakeParams::from_cm(5, 2, 100);
  const Vec3 pd = foot_target(p, nom, BodyPose{0.0}, 0.125);
  EXPECT_NEAR(pd.z(), nom.z + 0.05, 1e-15);
  EXPECT_DOUBLE_EQ(pd.x(), nom.x);
  EXPECT_DOUBLE_EQ(pd.y(), nom.y);
}

TEST(FootTarget, PeriodicBoundedPlanar) {
  const NominalPose nom;
  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    const auto p = HandshakeParams::from_cm(uniform(rng, 1, 10), uniform(rng, 1, 3.5), 100);
    const BodyPose body{uniform(rng, 0.0, 1.5)};
    const double t = uniform(rng, 0.0, 2.0);
    const Vec3 a = foot_target(p, nom, body, t);
    const Vec3 b = foot_target(p, nom, body, t + 1.0 / p.frequency_hz);
    EXPECT_LT((a - b).norm(), 1e-12);
    EXPECT_LE((a - nom.vec()).norm(), p.amplitude_m + 1e-15);
    EXPECT_EQ(a.y(), nom.y);
  }
}

TEST(FootTarget, PeakIndependentOfPitch) {
  const NominalPose nom;
  const auto p = HandshakeParams::from_cm(6, 1.5, 100);
  const double quarter = 0.25 / p.frequency_hz;
  for (double th : {0.0, 0.3, 0.6, 1.2}) {
    EXPECT_NEAR((foot_target(p, nom, BodyPose{th}, quarter) - nom.vec()).norm(), 0.06, 1e-14);
  }
}

TEST(FootTarget, MovesAlongWorldVertical) {
  const NominalPose nom;
  const auto p = HandshakeParams::from_cm(4, 2, 100);
  const double th = 0.6;
  const Vec3 d = foot_target(p, nom, BodyPose{th}, 0.1) - nom.vec();
  const Vec3 up = world_up_in_leg(th);
  EXPECT_NEAR(d.cross(up).norm(), 0.0, 1e-15);
  // Rotating the leg frame by the body pitch maps `up` back onto world z.
  EXPECT_NEAR(std::cos(th) * up.z() - std::sin(th) * up.x(), 1.0, 1e-15);
}

TEST(HandshakeParams, Validity) {
  EXPECT_TRUE(HandshakeParams::from_cm(1, 1, 30).valid());
  EXPECT_TRUE(HandshakeParams::from_cm(10, 3.5, 200).valid());
  EXPECT_TRUE(HandshakeParams::passive(30).valid());
  EXPECT_FALSE(HandshakeParams::from_cm(11, 2, 100).valid());
  EXPECT_FALSE(HandshakeParams::from_cm(5, 2, 20).valid());
  EXPECT_FALSE(HandshakeParams::from_cm(0, 2, 100).valid());
  EXPECT_FALSE(HandshakeParams::from_cm(5, 2, 100, 0.0).valid());
  EXPECT_THROW(validate(HandshakeParams::from_cm(5, 4, 100)), InvalidArgument);
}

TEST(Rng, DerivedStreamsDiffer) {
  EXPECT_NE(derive_seed(1, 1), derive_seed(1, 2));
  EXPECT_NE(derive_seed(1, 1), derive_seed(2, 1));
  EXPECT_EQ(derive_seed(5, 7), derive_seed(5, 7));
}

TEST(Rng, UniformAndNormalMoments) {
  Rng rng(42);
  const int n = 200000;
  double su = 0, sn = 0, sn2 = 0;
  for (int i = 0; i < n; ++i) {
    const double u = uniform01(rng);
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    su += u;
    const double z = standard_normal(rng);
    sn += z;
    sn2 += z * z;
  }
  EXPECT_NEAR(su / n, 0.5, 0.005);
  EXPECT_NEAR(sn / n, 0.0, 0.01);
  EXPECT_NEAR(sn2 / n, 1.0, 0.015);
}

TEST(Rng, UniformIndexCoversRange) {
  Rng rng(9);
  std::array<int, 7> counts{};
  for (int i = 0; i < 70000; ++i) ++counts[uniform_index(rng, 7)];
  for (int c : counts) EXPECT_NEAR(c, 10000, 400);
}
