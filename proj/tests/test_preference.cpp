#include <cmath>
#include <map>

#include <gtest/gtest.h>

#include "handshake/errors.hpp"
#include "handshake/preference.hpp"

using namespace handshake;

namespace {

Choice pick(const HandshakeParams& chosen, const HandshakeParams& rejected) {
  return {Query{chosen, rejected}, Side::Left};
}

}  // namespace

TEST(Features, BoxCornersAndCenter) {
  EXPECT_TRUE(features(HandshakeParams::from_cm(1, 1, 30)).isZero(1e-15));
  EXPECT_TRUE(features(HandshakeParams::from_cm(10, 3.5, 200)).isApprox(Vec3::Ones(), 1e-15));
  EXPECT_TRUE(features(HandshakeParams::from_cm(5.5, 2.25, 115)).isApprox(Vec3::Constant(0.5), 1e-15));
  const Vec3 passive = features(HandshakeParams::passive(200));
  EXPECT_NEAR(passive[0], -1.0 / 9.0, 1e-15);
  EXPECT_NEAR(passive[1], -0.4, 1e-15);
  EXPECT_NEAR(passive[2], 1.0, 1e-15);
}

TEST(Features, InverseRoundTrip) {
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    const Vec3 phi(uniform01(rng), uniform01(rng), uniform01(rng));
    EXPECT_TRUE(features(params_from_features(phi)).isApprox(phi, 1e-12));
  }
}

TEST(Softmax, Examples) {
  const Vec3 w(1.0, -2.0, 0.5);
  const Vec3 a(0.2, 0.4, 0.9), b(0.7, 0.1, 0.3);
  EXPECT_DOUBLE_EQ(choice_probability(w, a, a), 0.5);
  const double ra = w.dot(a), rb = w.dot(b);
  for (double beta : {0.0, 1.0, 3.0, 25.0}) {
    const double expect = std::exp(beta * ra) / (std::exp(beta * ra) + std::exp(beta * rb));
    EXPECT_NEAR(choice_probability(w, a, b, beta), expect, 1e-15);
    EXPECT_NEAR(choice_probability(w, a, b, beta) + choice_probability(w, b, a, beta), 1.0, 1e-15);
  }
  EXPECT_DOUBLE_EQ(choice_probability(w, Vec3(1000, 0, 0), Vec3::Zero()), 1.0);
  EXPECT_DOUBLE_EQ(choice_probability(w, Vec3::Zero(), Vec3(1000, 0, 0)), 0.0);
}

TEST(Softmax, LogSigmoidStable) {
  EXPECT_NEAR(log_sigmoid(0.0), std::log(0.5), 1e-15);
  EXPECT_NEAR(log_sigmoid(2.0), std::log(1.0 / (1.0 + std::exp(-2.0))), 1e-15);
  EXPECT_NEAR(log_sigmoid(-800.0), -800.0, 1e-12);
  EXPECT_EQ(log_sigmoid(800.0), 0.0);
}

TEST(Prior, LawOfLargeNumbers) {
  LearnerSettings s;
  s.n_samples = 40000;
  s.omega_cap = 100.0;  // effectively untruncated
  const Belief b = initialize_belief(5, s);
  EXPECT_LT(b.mean().cwiseAbs().maxCoeff(), 0.02);
  EXPECT_LT((b.stddev() - Vec3::Ones()).cwiseAbs().maxCoeff(), 0.02);
}

TEST(Prior, CapAndMaskRespected) {
  LearnerSettings s;
  s.n_samples = 5000;
  s.omega_cap = 1.0;
  s.active = {true, false, true};
  for (const auto& w : initialize_belief(2, s).samples) {
    EXPECT_LE(w.norm(), 1.0 + 1e-12);
    EXPECT_EQ(w[1], 0.0);
  }
}

TEST(Posterior, MetropolisMatchesGridIn1d) {
  LearnerSettings s;
  s.n_samples = 20000;
  s.burn_in = 500;
  s.thin = 5;
  s.active = {true, false, false};
  s.beta = 2.0;
  const auto hi = HandshakeParams::from_cm(9, 2, 100);
  const auto lo = HandshakeParams::from_cm(2, 2, 100);
  const auto mid = HandshakeParams::from_cm(5, 2, 100);
  const std::vector<Choice> choices{pick(hi, lo), pick(hi, mid), pick(mid, hi), pick(mid, lo)};
  const Belief post = update_belief(initialize_belief(1, s), choices, s);

  // Independent grid posterior over w1 in [-cap, cap].
  const int grid = 1000;
  const int bins = 30;
  std::vector<double> hist_grid(bins, 0.0), hist_mh(bins, 0.0);
  double z = 0.0;
  for (int i = 0; i < grid; ++i) {
    const double w = -s.omega_cap + (i + 0.5) * 2 * s.omega_cap / grid;
    double lp = -0.5 * w * w;
    for (const auto& c : choices) {
      const double d = features(c.chosen())[0] - features(c.rejected())[0];
      lp += -std::log(1.0 + std::exp(-s.beta * w * d));
    }
    const double p = std::exp(lp);
    hist_grid[static_cast<std::size_t>(i * bins / grid)] += p;
    z += p;
  }
  for (auto& h : hist_grid) h /= z;
  for (const auto& w : post.samples) {
    const int bin = std::clamp(static_cast<int>((w[0] + s.omega_cap) / (2 * s.omega_cap) * bins), 0, bins - 1);
    hist_mh[static_cast<std::size_t>(bin)] += 1.0 / static_cast<double>(post.samples.size());
  }
  double tv = 0.0;
  for (int b = 0; b < bins; ++b) tv += 0.5 * std::abs(hist_grid[b] - hist_mh[b]);
  EXPECT_LT(tv, 0.05);
}

TEST(Posterior, TruncatedOutsideCap) {
  LearnerSettings s;
  EXPECT_EQ(log_posterior(Vec3(3.1, 0, 0), {}, s), -std::numeric_limits<double>::infinity());
  EXPECT_NEAR(log_posterior(Vec3(1, 1, 0), {}, s), -1.0, 1e-15);
}

TEST(Posterior, ConsistentChoicesPushWeightPositive) {
  LearnerSettings s;
  PreferenceLearner learner(generate_candidates(3), s, 4, 5);
  const double start = learner.belief().mean()[0];
  for (int i = 0; i < 10; ++i) {
    const double f = 1.2 + 0.2 * i;
    learner.record(pick(HandshakeParams::from_cm(8, f, 100), HandshakeParams::from_cm(2, f, 100)));
  }
  EXPECT_GT(learner.belief().mean()[0], start);
  EXPECT_GT(learner.belief().mean()[0], 0.5);
  EXPECT_EQ(learner.trace().size(), 11u);
  EXPECT_EQ(learner.trace().back().trial, 10);
}

TEST(Candidates, TwelveRandomThenThreePassive) {
  const auto c = generate_candidates(77);
  ASSERT_EQ(c.size(), 15u);
  for (int i = 0; i < 12; ++i) {
    EXPECT_TRUE(c[i].valid());
    EXPECT_FALSE(c[i].is_passive());
  }
  EXPECT_EQ(c[12], HandshakeParams::passive(30));
  EXPECT_EQ(c[13], HandshakeParams::passive(115));
  EXPECT_EQ(c[14], HandshakeParams::passive(200));
  EXPECT_EQ(generate_candidates(77), c);
  EXPECT_NE(generate_candidates(78), c);
}

TEST(QuerySelection, UniformOverUnusedPairs) {
  const auto c = generate_candidates(1);
  Rng rng(2);
  std::map<PairKey, int> counts;
  int left_lower = 0;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) {
    const Query q = select_query({}, c, rng);
    ASSERT_NE(q.left_index, q.right_index);
    left_lower += q.left_index < q.right_index;
    ++counts[{std::min(q.left_index, q.right_index), std::max(q.left_index, q.right_index)}];
  }
  ASSERT_EQ(counts.size(), 105u);
  const double expected = draws / 105.0;
  double chi2 = 0.0;
  for (const auto& [k, n] : counts) chi2 += (n - expected) * (n - expected) / expected;
  // 104 degrees of freedom; 0.999 quantile is about 157.
  EXPECT_LT(chi2, 157.0);
  EXPECT_NEAR(left_lower / static_cast<double>(draws), 0.5, 0.01);
}

TEST(QuerySelection, NeverRepeatsAndExhausts) {
  const std::vector<HandshakeParams> c{HandshakeParams::passive(30), HandshakeParams::passive(115),
                                       HandshakeParams::passive(200)};
  Rng rng(3);
  std::vector<PairKey> used;
  for (int i = 0; i < 3; ++i) {
    const Query q = select_query(used, c, rng);
    const PairKey k{std::min(q.left_index, q.right_index), std::max(q.left_index, q.right_index)};
    EXPECT_EQ(std::count(used.begin(), used.end(), k), 0);
    used.push_back(k);
  }
  EXPECT_THROW(select_query(used, c, rng), Exhausted);
}

TEST(Optimum, ArgmaxAndLowerIndexTie) {
  const auto c = generate_candidates(4);
  EXPECT_EQ(optimized_index(Vec3::Zero(), c), 0u);
  std::vector<HandshakeParams> dup{HandshakeParams::from_cm(3, 2, 100), HandshakeParams::from_cm(9, 2, 100),
                                   HandshakeParams::from_cm(9, 2, 100)};
  EXPECT_EQ(optimized_index(Vec3(1, 0, 0), dup), 1u);
  EXPECT_EQ(optimized_index(Vec3(-1, 0, 0), dup), 0u);
  const Vec3 w(0.3, -1.0, 0.8);
  std::size_t best = 0;
  for (std::size_t i = 1; i < c.size(); ++i) {
    if (w.dot(features(c[i])) > w.dot(features(c[best]))) best = i;
  }
  EXPECT_EQ(optimized_index(w, c), best);
}

TEST(Ablation, InteriorOptimum) {
  const auto v = ablation_variants(HandshakeParams::from_cm(5, 2, 100));
  ASSERT_EQ(v.size(), 6u);
  const char* labels[] = {"a-", "a+", "f-", "f+", "k-", "k+"};
  for (int i = 0; i < 6; ++i) {
    EXPECT_EQ(v[i].label, labels[i]);
    EXPECT_FALSE(v[i].clipped);
    EXPECT_FALSE(v[i].identity);
  }
  EXPECT_NEAR(v[0].params.amplitude_cm(), 3.0, 1e-12);
  EXPECT_NEAR(v[1].params.amplitude_cm(), 7.0, 1e-12);
  EXPECT_DOUBLE_EQ(v[2].params.frequency_hz, 1.5);
  EXPECT_DOUBLE_EQ(v[3].params.frequency_hz, 2.5);
  EXPECT_DOUBLE_EQ(v[4].params.stiffness, 60.0);
  EXPECT_DOUBLE_EQ(v[5].params.stiffness, 140.0);
}

TEST(Ablation, ClipsAtBounds) {
  const auto v = ablation_variants(HandshakeParams::from_cm(9.5, 3.3, 180));
  EXPECT_NEAR(v[1].params.amplitude_cm(), 10.0, 1e-12);
  EXPECT_TRUE(v[1].clipped);
  EXPECT_DOUBLE_EQ(v[3].params.frequency_hz, 3.5);
  EXPECT_TRUE(v[3].clipped);
  EXPECT_DOUBLE_EQ(v[5].params.stiffness, 200.0);
  EXPECT_TRUE(v[5].clipped);
  EXPECT_FALSE(v[0].clipped);
}

TEST(Ablation, PassiveOptimumKeepsShape) {
  const auto v = ablation_variants(HandshakeParams::passive(30));
  for (int i = 0; i < 4; ++i) {
    EXPECT_TRUE(v[i].identity);
    EXPECT_TRUE(v[i].params.is_passive());
  }
  EXPECT_TRUE(v[4].identity);
  EXPECT_TRUE(v[4].clipped);
  EXPECT_DOUBLE_EQ(v[5].params.stiffness, 70.0);
  EXPECT_FALSE(v[5].identity);
}

TEST(Learner, DeterministicAndTraceGrows) {
  auto run = [] {
    PreferenceLearner l(generate_candidates(10), LearnerSettings{}, 11, 12);
    for (int i = 0; i < 4; ++i) {
      const Query q = l.next_query();
      l.record({q, i % 2 ? Side::Left : Side::Right});
    }
    return l;
  };
  const auto a = run();
  const auto b = run();
  EXPECT_EQ(a.trace().size(), 5u);
  EXPECT_EQ(a.belief().samples, b.belief().samples);
  EXPECT_EQ(a.best_index(), b.best_index());
}

TEST(Sides, Strings) {
  EXPECT_EQ(side_from_string("left"), Side::Left);
  EXPECT_EQ(to_string(Side::Right), "right");
  EXPECT_THROW(side_from_string("up"), InvalidArgument);
}

TEST(Posterior, AmplitudeLoverAcrossSeeds) {
  int positive = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    PreferenceLearner learner(generate_candidates(seed), LearnerSettings{}, derive_seed(seed, 2),
                              derive_seed(seed, 3));
    for (int i = 0; i < 10; ++i) {
      const Query q = learner.next_query();
      learner.record({q, features(q.left)[0] >= features(q.right)[0] ? Side::Left : Side::Right});
    }
    positive += learner.belief().mean()[0] > 0.0;
  }
  EXPECT_GE(positive, 99);
}

TEST(QuerySelection, EveryPairWithinTenPercent) {
  const auto c = generate_candidates(1);
  Rng rng(2);
  std::map<PairKey, int> counts;
  for (int i = 0; i < 100000; ++i) {
    const Query q = select_query({}, c, rng);
    ++counts[{std::min(q.left_index, q.right_index), std::max(q.left_index, q.right_index)}];
  }
  for (const auto& [k, n] : counts) EXPECT_NEAR(n, 100000 / 105.0, 0.1 * 100000 / 105.0);
}
