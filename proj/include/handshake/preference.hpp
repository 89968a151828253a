#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "handshake/rng.hpp"
#include "handshake/trajectory.hpp"

namespace handshake {

inline constexpr int kRandomCandidates = 12;
inline constexpr std::array<double, 3> kPassiveStiffness = {30.0, 115.0, 200.0};
inline constexpr int kCandidateCount = kRandomCandidates + static_cast<int>(kPassiveStiffness.size());

/// Min-max normalized (amplitude, frequency, stiffness) over the active
/// parameter box. Passive handshakes map below zero on the first two axes.
Vec3 features(const HandshakeParams& params);

/// Inverse of features() for points inside the box (duration taken as default).
HandshakeParams params_from_features(const Vec3& phi);

inline double reward(const Vec3& omega, const Vec3& phi) { return omega.dot(phi); }

/// Softmax probability of choosing the left option; beta scales rewards.
double choice_probability(const Vec3& omega, const Vec3& left_phi, const Vec3& right_phi,
                          double beta = 1.0);

/// log(1 / (1 + exp(-z))) without overflow.
double log_sigmoid(double z);

struct LearnerSettings {
  int n_samples = 100;
  double omega_cap = 3.0;
  double proposal_std = 0.25;
  int burn_in = 200;
  int thin = 5;
  double beta = 1.0;
  // Dimensions of omega the sampler may move; inactive ones stay at 0.
  std::array<bool, 3> active = {true, true, true};

  bool valid() const;
};

/// Posterior over reward weights, represented by samples.
struct Belief {
  std::vector<Vec3> samples;
  Rng rng;

  Vec3 mean() const;
  Vec3 stddev() const;
};

enum class Side { Left, Right };

std::string_view to_string(Side side);
Side side_from_string(std::string_view s);

struct Query {
  HandshakeParams left;
  HandshakeParams right;
  int left_index = -1;  // candidate indices, -1 when not from the candidate set
  int right_index = -1;

  bool operator==(const Query&) const = default;
};

struct Choice {
  Query query;
  Side selected = Side::Left;

  const HandshakeParams& chosen() const { return selected == Side::Left ? query.left : query.right; }
  const HandshakeParams& rejected() const { return selected == Side::Left ? query.right : query.left; }
};

/// N draws from N(0, I) on the active dimensions, norms clipped to the cap.
Belief initialize_belief(std::uint64_t seed, const LearnerSettings& settings = {});

/// Unnormalized log posterior: Gaussian prior truncated to |omega| <= cap
/// times the softmax likelihood of every choice.
double log_posterior(const Vec3& omega, std::span<const Choice> choices,
                     const LearnerSettings& settings);

/// Refreshes all samples with a Metropolis-Hastings chain started at the
/// current posterior mean: burn_in steps, then every thin-th state is kept.
Belief update_belief(const Belief& belief, std::span<const Choice> choices,
                     const LearnerSettings& settings = {});

/// 12 uniform draws over the parameter box followed by the three passive
/// handshakes (k = 30, 115, 200).
std::vector<HandshakeParams> generate_candidates(std::uint64_t seed);

using PairKey = std::pair<int, int>;  // (lower index, higher index)

/// A uniformly random unused unordered pair with random presentation order.
/// Throws Exhausted when every pair has been used.
Query select_query(std::span<const PairKey> used, std::span<const HandshakeParams> candidates,
                   Rng& rng);

/// Index of the candidate with the highest reward under the mean weight;
/// ties go to the lower index.
std::size_t optimized_index(const Vec3& mean_omega, std::span<const HandshakeParams> candidates);
HandshakeParams optimized_params(const Belief& belief, std::span<const HandshakeParams> candidates);

struct BeliefTraceRow {
  int trial = 0;
  HandshakeParams best;
  Vec3 mean = Vec3::Zero();
  Vec3 stddev = Vec3::Zero();
};

BeliefTraceRow belief_trace_row(int trial, const Belief& belief,
                                std::span<const HandshakeParams> candidates);

struct AblationVariant {
  std::string label;  // a-, a+, f-, f+, k-, k+
  HandshakeParams params;
  bool clipped = false;   // the perturbation hit a range bound
  bool identity = false;  // the variant equals the optimum
};

inline constexpr double kAblationAmplitudeCm = 2.0;
inline constexpr double kAblationFrequencyHz = 0.5;
inline constexpr double kAblationStiffness = 40.0;

/// One-parameter perturbations of the optimum, in the order a-, a+, f-, f+,
/// k-, k+, clipped to the parameter box. A passive optimum keeps its
/// amplitude and frequency, so those four variants are identities.
std::vector<AblationVariant> ablation_variants(const HandshakeParams& opt);

/// Session-level learning state: candidates, belief, choices and trace.
class PreferenceLearner {
 public:
  PreferenceLearner(std::vector<HandshakeParams> candidates, const LearnerSettings& settings,
                    std::uint64_t belief_seed, std::uint64_t query_seed);

  Query next_query();
  void record(const Choice& choice);

  const std::vector<HandshakeParams>& candidates() const { return candidates_; }
  const Belief& belief() const { return belief_; }
  const std::vector<Choice>& choices() const { return choices_; }
  const std::vector<BeliefTraceRow>& trace() const { return trace_; }
  std::size_t best_index() const;
  HandshakeParams best() const { return candidates_[best_index()]; }

 private:
  std::vector<HandshakeParams> candidates_;
  LearnerSettings settings_;
  Belief belief_;
  Rng query_rng_;
  std::vector<PairKey> used_;
  std::vector<Choice> choices_;
  std::vector<BeliefTraceRow> trace_;
};

}  // namespace handshake
