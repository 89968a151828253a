#include <cmath>
#include <functional>
#include <limits>
#include <numbers>

#include <gtest/gtest.h>

#include "handshake/errors.hpp"
#include "handshake/metrics.hpp"

using namespace handshake;

namespace {

constexpr double kPi = std::numbers::pi;

// Minimum over every monotone warping path, by exhaustive recursion.
double brute_dtw(const std::vector<double>& x, const std::vector<double>& y) {
  std::function<double(std::size_t, std::size_t)> go = [&](std::size_t i, std::size_t j) {
    const double c = std::abs(x[i] - y[j]);
    if (i == 0 && j == 0) return c;
    double best = std::numeric_limits<double>::infinity();
    if (i > 0) best = std::min(best, go(i - 1, j));
    if (j > 0) best = std::min(best, go(i, j - 1));
    if (i > 0 && j > 0) best = std::min(best, go(i - 1, j - 1));
    return c + best;
  };
  return go(x.size() - 1, y.size() - 1);
}

std::vector<double> sine(std::size_t n, double dt, double a, double f, double phase = 0.0) {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = a * std::sin(2 * kPi * f * i * dt + phase);
  return out;
}

// Upright body, so the world vertical is the leg z axis.
HandshakeLog synthetic_log(double a_des, double f_des, double a_act, double f_act, double lag = 0.0) {
  HandshakeLog log;
  log.dt = 0.001;
  log.pitch_rad = 0.0;
  log.params = HandshakeParams::from_cm(a_des * 100, f_des, 100);
  const NominalPose nom;
  for (int i = 0; i < 3000; ++i) {
    const double t = i * log.dt;
    log.desired_path.push_back(nom.vec() + Vec3(0, 0, a_des * std::sin(2 * kPi * f_des * t)));
    log.actual_path.push_back(nom.vec() + Vec3(0, 0, a_act * std::sin(2 * kPi * f_act * t - lag)));
    log.torques.push_back(Vec3(0.5, -1.0, 0.25));
    log.joint_vel.push_back(Vec3(2.0, 1.0, -4.0));
  }
  return log;
}

}  // namespace

TEST(Dtw, MatchesExhaustiveSearch) {
  Rng rng(8);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> x(1 + uniform_index(rng, 6)), y(1 + uniform_index(rng, 6));
    for (auto& v : x) v = uniform(rng, -1, 1);
    for (auto& v : y) v = uniform(rng, -1, 1);
    EXPECT_NEAR(dtw(x, y), brute_dtw(x, y), 1e-12);
  }
}

TEST(Dtw, HandExample) {
  const std::vector<double> x{0, 1, 2};
  const std::vector<double> y{0, 2};
  EXPECT_DOUBLE_EQ(dtw(x, y), 1.0);
  EXPECT_DOUBLE_EQ(dtw(x, x), 0.0);
}

TEST(Dtw, SymmetricAndShiftInvariant) {
  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x(40), y(55);
    for (auto& v : x) v = uniform(rng, -1, 1);
    for (auto& v : y) v = uniform(rng, -1, 1);
    EXPECT_NEAR(dtw(x, y), dtw(y, x), 1e-12);
    auto xs = x, ys = y;
    for (auto& v : xs) v += 3.25;
    for (auto& v : ys) v += 3.25;
    EXPECT_NEAR(dtw(xs, ys), dtw(x, y), 1e-9);
  }
}

TEST(Dtw, EmptyThrows) {
  EXPECT_THROW(dtw(std::vector<double>{}, std::vector<double>{1.0}), EmptySequence);
}

TEST(Plv, ConstantLagLocksPerfectly) {
  const auto x = sine(3000, 0.001, 1.0, 2.0);
  for (double lag : {0.0, 0.7, kPi / 2, kPi}) {
    EXPECT_NEAR(plv(x, sine(3000, 0.001, 0.3, 2.0, lag), 0.001), 1.0, 5e-3) << lag;
  }
}

TEST(Plv, DifferentFrequenciesDoNotLock) {
  const auto x = sine(3000, 0.001, 1.0, 2.0);
  EXPECT_LT(plv(x, sine(3000, 0.001, 1.0, 3.3), 0.001), 0.2);
}

TEST(Plv, IndependentNoiseIsLow) {
  Rng rng(5);
  std::vector<double> x(3000), y(3000);
  for (auto& v : x) v = standard_normal(rng);
  for (auto& v : y) v = standard_normal(rng);
  const double r = plv(x, y, 0.001);
  EXPECT_GE(r, 0.0);
  EXPECT_LT(r, 0.1);
}

TEST(Plv, Errors) {
  const std::vector<double> flat(500, 1.0);
  EXPECT_THROW(plv(flat, sine(500, 0.001, 1, 2), 0.001), DegenerateSignal);
  EXPECT_THROW(plv(sine(10, 0.001, 1, 2), sine(10, 0.001, 1, 2), 0.001), InvalidArgument);
  EXPECT_THROW(plv(sine(100, 0.001, 1, 2), sine(101, 0.001, 1, 2), 0.001), InvalidArgument);
}

TEST(Frequency, TwoAndAHalfAgainstTwoIsTwentyFivePercent) {
  EXPECT_NEAR(frequency_error(synthetic_log(0.04, 2.0, 0.04, 2.5)), 25.0, 0.5);
}

TEST(Frequency, DominantFrequencyOfSine) {
  for (double f : {1.0, 1.53, 2.2, 3.5}) {
    EXPECT_NEAR(dominant_frequency(sine(3000, 0.001, 0.05, f), 0.001), f, 0.01) << f;
  }
}

TEST(Amplitude, HalfAmplitudeIsFiftyPercent) {
  EXPECT_NEAR(amplitude_error(synthetic_log(0.06, 2.0, 0.03, 2.0)), 50.0, 0.5);
  EXPECT_NEAR(amplitude_error(synthetic_log(0.06, 2.0, 0.06, 2.0, 0.4)), 0.0, 0.5);
}

TEST(Amplitude, OscillationAmplitudeIgnoresTrend) {
  auto x = sine(3000, 0.001, 0.02, 2.0);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += 0.01 * i * 0.001;
  EXPECT_NEAR(oscillation_amplitude(x, 0.0005), 0.02, 2e-4);
  EXPECT_EQ(oscillation_amplitude(std::vector<double>(100, 0.3), 0.0005), 0.0);
}

TEST(Extrema, AlternateAndRespectProminence) {
  const std::vector<double> x{0, 1, 0.99, 1.0, 0, -1, 0, 1, 0};
  const auto e = find_extrema(x, 0.5);
  ASSERT_EQ(e.size(), 3u);
  EXPECT_DOUBLE_EQ(x[e[0]], 1.0);
  EXPECT_EQ(e[1], 5u);
  EXPECT_EQ(e[2], 7u);
}

TEST(TorqueAndPower, ConstantExamples) {
  const auto log = synthetic_log(0.04, 2.0, 0.04, 2.0);
  EXPECT_DOUBLE_EQ(mean_torque(log), 1.75);
  EXPECT_DOUBLE_EQ(mean_torque(log, TorqueMode::AbsMean), 1.75);
  EXPECT_DOUBLE_EQ(mean_power(log), 1.0 + 1.0 + 1.0);
}

TEST(TorqueAndPower, AlternatingSignsSeparateModes) {
  auto log = synthetic_log(0.04, 2.0, 0.04, 2.0);
  for (std::size_t i = 0; i < log.size(); ++i) log.torques[i] = (i % 2 ? 1.0 : -1.0) * Vec3(1, 2, 3);
  EXPECT_DOUBLE_EQ(mean_torque(log), 6.0);
  EXPECT_NEAR(mean_torque(log, TorqueMode::AbsMean), 0.0, 1e-12);
}

TEST(Evaluate, PassiveLeavesErrorsEmpty) {
  auto log = synthetic_log(0.04, 2.0, 0.0, 2.0);
  log.params = HandshakeParams::passive(100);
  for (auto& p : log.desired_path) p = NominalPose{}.vec();
  const auto r = evaluate(log);
  EXPECT_FALSE(r.amplitude_error_pct);
  EXPECT_FALSE(r.frequency_error_pct);
  EXPECT_FALSE(r.plv);
  EXPECT_THROW(amplitude_error(log), PassiveUndefined);
}

TEST(Evaluate, ActiveFillsEverything) {
  const auto r = evaluate(synthetic_log(0.05, 1.5, 0.04, 1.5, 0.3));
  ASSERT_TRUE(r.amplitude_error_pct && r.frequency_error_pct && r.plv);
  EXPECT_NEAR(*r.amplitude_error_pct, 20.0, 0.5);
  EXPECT_NEAR(*r.frequency_error_pct, 0.0, 0.5);
  EXPECT_NEAR(*r.plv, 1.0, 1e-3);
  EXPECT_GT(r.dtw_m, 0.0);
}

TEST(Pearson, Examples) {
  const std::vector<double> x{1, 2, 3, 4, 5};
  EXPECT_DOUBLE_EQ(pearson(x, std::vector<double>{2, 4, 6, 8, 10}), 1.0);
  EXPECT_DOUBLE_EQ(pearson(x, std::vector<double>{5, 4, 3, 2, 1}), -1.0);
  EXPECT_NEAR(pearson(x, std::vector<double>{1, 3, 2, 5, 4}), 0.8, 1e-12);
  EXPECT_THROW(pearson(x, std::vector<double>(5, 1.0)), ZeroVariance);
}

TEST(CorrelationMatrix, SymmetricWithUnitDiagonal) {
  Rng rng(12);
  std::vector<std::vector<double>> s(4, std::vector<double>(30));
  for (auto& v : s)
    for (auto& x : v) x = uniform01(rng);
  s[3].assign(30, 2.0);
  const auto m = correlation_matrix({"a", "b", "c", "flat"}, s);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(m.r[i][i], 1.0);
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(m.r[i][j], m.r[j][i]);
    EXPECT_FALSE(m.r[i][3]);
  }
  EXPECT_FALSE(m.r[3][3]);
}

TEST(Plv, IncommensurateOverTenSeconds) {
  EXPECT_LT(plv(sine(10000, 0.001, 1.0, 2.0), sine(10000, 0.001, 1.0, 3.1), 0.001), 0.2);
}

TEST(Plv, IdenticalSignals) {
  const auto x = sine(3000, 0.001, 0.04, 1.7, 0.3);
  EXPECT_NEAR(plv(x, x, 0.001), 1.0, 1e-6);
}

TEST(Frequency, PureSineBelowOnePercent) {
  EXPECT_LT(frequency_error(synthetic_log(0.04, 2.0, 0.04, 2.0)), 1.0);
}
