#include "handshake/preference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "handshake/errors.hpp"

namespace handshake {

Vec3 features(const HandshakeParams& p) {
  return {(p.amplitude_cm() - kAmplitudeMinCm) / (kAmplitudeMaxCm - kAmplitudeMinCm),
          (p.frequency_hz - kFrequencyMinHz) / (kFrequencyMaxHz - kFrequencyMinHz),
          (p.stiffness - kStiffnessMin) / (kStiffnessMax - kStiffnessMin)};
}

HandshakeParams params_from_features(const Vec3& phi) {
  return HandshakeParams::from_cm(kAmplitudeMinCm + phi[0] * (kAmplitudeMaxCm - kAmplitudeMinCm),
                                  kFrequencyMinHz + phi[1] * (kFrequencyMaxHz - kFrequencyMinHz),
                                  kStiffnessMin + phi[2] * (kStiffnessMax - kStiffnessMin));
}

double log_sigmoid(double z) {
  return z >= 0.0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z));
}

double choice_probability(const Vec3& omega, const Vec3& left_phi, const Vec3& right_phi,
                          double beta) {
  const double rl = beta * reward(omega, left_phi);
  const double rr = beta * reward(omega, right_phi);
  const double top = std::max(rl, rr);
  const double el = std::exp(rl - top), er = std::exp(rr - top);
  return el / (el + er);
}

bool LearnerSettings::valid() const {
  return n_samples >= 2 && omega_cap > 0.0 && proposal_std > 0.0 && burn_in >= 0 && thin >= 1 &&
         beta >= 0.0 && std::isfinite(beta) && std::any_of(active.begin(), active.end(), [](bool a) { return a; });
}

Vec3 Belief::mean() const {
  Vec3 m = Vec3::Zero();
  for (const auto& s : samples) m += s;
  return m / static_cast<double>(samples.size());
}

Vec3 Belief::stddev() const {
  const Vec3 m = mean();
  Vec3 v = Vec3::Zero();
  for (const auto& s : samples) v += (s - m).cwiseAbs2();
  return (v / static_cast<double>(samples.size())).cwiseSqrt();
}

std::string_view to_string(Side side) { return side == Side::Left ? "left" : "right"; }

Side side_from_string(std::string_view s) {
  if (s == "left") return Side::Left;
  if (s == "right") return Side::Right;
  throw InvalidArgument("selection must be 'left' or 'right'");
}

namespace {

Vec3 masked(Vec3 w, const LearnerSettings& s) {
  for (int k = 0; k < 3; ++k) {
    if (!s.active[static_cast<std::size_t>(k)]) w[k] = 0.0;
  }
  return w;
}

Vec3 clip_norm(const Vec3& w, double cap) {
  const double n = w.norm();
  return n > cap ? Vec3(w * (cap / n)) : w;
}

Vec3 gaussian3(Rng& rng) {
  const double a = standard_normal(rng);
  const double b = standard_normal(rng);
  const double c = standard_normal(rng);
  return {a, b, c};
}

}  // namespace

Belief initialize_belief(std::uint64_t seed, const LearnerSettings& settings) {
  if (!settings.valid()) throw InvalidArgument("invalid learner settings");
  Belief b{{}, Rng(seed)};
  b.samples.reserve(static_cast<std::size_t>(settings.n_samples));
  for (int i = 0; i < settings.n_samples; ++i) {
    b.samples.push_back(clip_norm(masked(gaussian3(b.rng), settings), settings.omega_cap));
  }
  return b;
}

double log_posterior(const Vec3& omega, std::span<const Choice> choices,
                     const LearnerSettings& settings) {
  if (omega.norm() > settings.omega_cap) return -std::numeric_limits<double>::infinity();
  double lp = -0.5 * omega.squaredNorm();
  for (const auto& c : choices) {
    const double diff = reward(omega, features(c.chosen()) - features(c.rejected()));
    lp += log_sigmoid(settings.beta * diff);
  }
  return lp;
}

Belief update_belief(const Belief& belief, std::span<const Choice> choices,
                     const LearnerSettings& settings) {
  if (!settings.valid()) throw InvalidArgument("invalid learner settings");
  Belief next{{}, belief.rng};
  Rng& rng = next.rng;

  Vec3 state = clip_norm(masked(belief.mean(), settings), settings.omega_cap);
  double lp = log_posterior(state, choices, settings);
  auto advance = [&]() {
    const Vec3 proposal = masked(state + settings.proposal_std * gaussian3(rng), settings);
    const double lp_new = log_posterior(proposal, choices, settings);
    const double u = uniform01(rng);
    if (std::isfinite(lp_new) && std::log(u) < lp_new - lp) {
      state = proposal;
      lp = lp_new;
    }
  };

  for (int i = 0; i < settings.burn_in; ++i) advance();
  next.samples.reserve(static_cast<std::size_t>(settings.n_samples));
  for (int i = 0; i < settings.n_samples; ++i) {
    for (int t = 0; t < settings.thin; ++t) advance();
    next.samples.push_back(state);
  }
  return next;
}

std::vector<HandshakeParams> generate_candidates(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<HandshakeParams> out;
  out.reserve(kCandidateCount);
  for (int i = 0; i < kRandomCandidates; ++i) {
    const double a = uniform(rng, kAmplitudeMinCm, kAmplitudeMaxCm);
    const double f = uniform(rng, kFrequencyMinHz, kFrequencyMaxHz);
    const double k = uniform(rng, kStiffnessMin, kStiffnessMax);
    out.push_back(HandshakeParams::from_cm(a, f, k));
  }
  for (double k : kPassiveStiffness) out.push_back(HandshakeParams::passive(k));
  return out;
}

Query select_query(std::span<const PairKey> used, std::span<const HandshakeParams> candidates,
                   Rng& rng) {
  const int n = static_cast<int>(candidates.size());
  std::vector<PairKey> open;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (std::find(used.begin(), used.end(), PairKey{i, j}) == used.end()) open.emplace_back(i, j);
    }
  }
  if (open.empty()) throw Exhausted("every candidate pair has been queried");
  auto [a, b] = open[uniform_index(rng, open.size())];
  if (uniform_index(rng, 2) == 1) std::swap(a, b);
  return {candidates[static_cast<std::size_t>(a)], candidates[static_cast<std::size_t>(b)], a, b};
}

std::size_t optimized_index(const Vec3& mean_omega, std::span<const HandshakeParams> candidates) {
  if (candidates.empty()) throw InvalidArgument("no candidates");
  std::size_t best = 0;
  double best_reward = reward(mean_omega, features(candidates[0]));
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const double r = reward(mean_omega, features(candidates[i]));
    if (r > best_reward) {
      best_reward = r;
      best = i;
    }
  }
  return best;
}

HandshakeParams optimized_params(const Belief& belief, std::span<const HandshakeParams> candidates) {
  return candidates[optimized_index(belief.mean(), candidates)];
}

BeliefTraceRow belief_trace_row(int trial, const Belief& belief,
                                std::span<const HandshakeParams> candidates) {
  return {trial, optimized_params(belief, candidates), belief.mean(), belief.stddev()};
}

std::vector<AblationVariant> ablation_variants(const HandshakeParams& opt) {
  validate(opt);
  struct Step {
    const char* label;
    int axis;
    double delta;
  };
  static constexpr Step steps[] = {
      {"a-", 0, -kAblationAmplitudeCm}, {"a+", 0, kAblationAmplitudeCm},
      {"f-", 1, -kAblationFrequencyHz}, {"f+", 1, kAblationFrequencyHz},
      {"k-", 2, -kAblationStiffness},   {"k+", 2, kAblationStiffness},
  };
  std::vector<AblationVariant> out;
  for (const auto& s : steps) {
    AblationVariant v{s.label, opt, false, false};
    if (s.axis == 2) {
      const double raw = opt.stiffness + s.delta;
      v.params.stiffness = std::clamp(raw, kStiffnessMin, kStiffnessMax);
      v.clipped = v.params.stiffness != raw;
    } else if (opt.is_passive()) {
      v.clipped = true;
    } else if (s.axis == 0) {
      const double raw = opt.amplitude_cm() + s.delta;
      const double a = std::clamp(raw, kAmplitudeMinCm, kAmplitudeMaxCm);
      v.params.amplitude_m = a / 100.0;
      v.clipped = a != raw;
    } else {
      const double raw = opt.frequency_hz + s.delta;
      v.params.frequency_hz = std::clamp(raw, kFrequencyMinHz, kFrequencyMaxHz);
      v.clipped = v.params.frequency_hz != raw;
    }
    v.identity = v.params == opt;
    out.push_back(v);
  }
  return out;
}

PreferenceLearner::PreferenceLearner(std::vector<HandshakeParams> candidates,
                                     const LearnerSettings& settings, std::uint64_t belief_seed,
                                     std::uint64_t query_seed)
    : candidates_(std::move(candidates)),
      settings_(settings),
      belief_(initialize_belief(belief_seed, settings)),
      query_rng_(query_seed) {
  if (candidates_.size() < 2) throw InvalidArgument("need at least two candidates");
  trace_.push_back(belief_trace_row(0, belief_, candidates_));
}

Query PreferenceLearner::next_query() {
  Query q = select_query(used_, candidates_, query_rng_);
  used_.emplace_back(std::min(q.left_index, q.right_index), std::max(q.left_index, q.right_index));
  return q;
}

void PreferenceLearner::record(const Choice& choice) {
  choices_.push_back(choice);
  belief_ = update_belief(belief_, choices_, settings_);
  trace_.push_back(belief_trace_row(static_cast<int>(choices_.size()), belief_, candidates_));
}

std::size_t PreferenceLearner::best_index() const {
  return optimized_index(belief_.mean(), candidates_);
}

}  // namespace handshake
