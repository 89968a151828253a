#include "handshake/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "handshake/errors.hpp"

namespace handshake {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

Vec3 preferred_features(const PreferenceKind& kind) {
  return std::visit(
      overloaded{
          [](const LinearPreference& l) -> Vec3 {
            const double scale = l.omega_true.cwiseAbs().maxCoeff();
            if (scale == 0.0) return Vec3::Constant(0.5);
            return (Vec3::Constant(0.5) + 0.5 * l.omega_true / scale).cwiseMax(0.0).cwiseMin(1.0);
          },
          [](const IdealPointPreference& p) -> Vec3 { return features(p.target); },
      },
      kind);
}

}  // namespace

SyntheticUser::SyntheticUser(PreferenceKind kind, std::uint64_t seed, GripRange grip)
    : kind_(std::move(kind)), grip_(grip), rng_(seed) {
  if (beta() < 0.0 || std::isnan(beta())) throw InvalidArgument("oracle beta must be >= 0");
  if (!(grip_.min >= 0.0 && grip_.max >= grip_.min)) throw InvalidArgument("invalid grip range");
  if (const auto* p = std::get_if<IdealPointPreference>(&kind_)) {
    if (p->target.is_passive() || !p->target.valid()) {
      throw InvalidArgument("ideal-point target must lie inside the parameter box");
    }
    if ((p->weights.array() < 0.0).any()) throw InvalidArgument("ideal-point weights must be >= 0");
  }
}

double SyntheticUser::beta() const {
  return std::visit([](const auto& k) { return k.beta; }, kind_);
}

double SyntheticUser::utility(const HandshakeParams& p) const {
  const Vec3 phi = features(p);
  return std::visit(overloaded{
                        [&](const LinearPreference& l) { return l.omega_true.dot(phi); },
                        [&](const IdealPointPreference& ip) {
                          const Vec3 d = phi - features(ip.target);
                          return -ip.weights.dot(d.cwiseAbs2());
                        },
                    },
                    kind_);
}

Choice SyntheticUser::answer(const Query& query) {
  const double ul = utility(query.left);
  const double ur = utility(query.right);
  const double b = beta();
  Side side;
  if (std::isinf(b)) {
    side = ul >= ur ? Side::Left : Side::Right;
  } else {
    const double p_left = std::exp(log_sigmoid(b * (ul - ur)));
    side = uniform01(rng_) < p_left ? Side::Left : Side::Right;
  }
  return {query, side};
}

HandshakeParams SyntheticUser::preferred() const {
  return params_from_features(preferred_features(kind_));
}

HumanHandModel SyntheticUser::hand_for(const HandshakeParams& /*params*/) const {
  const Vec3 phi = preferred_features(kind_);
  const HandshakeParams pref = params_from_features(phi);
  const double stiff = std::clamp(phi[2], 0.0, 1.0);
  HumanHandModel hand;
  hand.intent_amplitude = pref.amplitude_m;
  hand.intent_frequency = pref.frequency_hz;
  hand.intent_phase = 0.0;
  hand.grip_stiffness = grip_.max - stiff * (grip_.max - grip_.min);
  hand.grip_damping = kOracleGripDamping;
  hand.drift_rate = 0.0;
  return hand;
}

// -- JSON ---------------------------------------------------------------------

namespace {

double beta_from_json(const nlohmann::json& j) {
  if (!j.contains("beta")) return 1.0;
  const auto& b = j.at("beta");
  if (b.is_string()) {
    if (b.get<std::string>() == "inf") return kInfiniteBeta;
    throw ConfigInvalid("oracle beta must be a number or \"inf\"");
  }
  const double v = b.get<double>();
  if (!(v >= 0.0)) throw ConfigInvalid("oracle beta must be >= 0");
  return v;
}

Vec3 vec3_from_json(const nlohmann::json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) throw ConfigInvalid(std::string(what) + " must be a 3-array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

HandshakeParams target_from_json(const nlohmann::json& t) {
  return HandshakeParams::from_cm(t.at("amplitude_cm").get<double>(), t.at("frequency_hz").get<double>(),
                                  t.at("stiffness").get<double>());
}

}  // namespace

PreferenceKind preference_from_json(const nlohmann::json& j, std::uint64_t seed) {
  try {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "linear") {
      return LinearPreference{vec3_from_json(j.at("omega"), "omega"), beta_from_json(j)};
    }
    if (kind == "ideal_point") {
      IdealPointPreference p;
      const auto& t = j.at("target");
      if (t.is_string()) {
        if (t.get<std::string>() != "uniform") throw ConfigInvalid("oracle target must be an object or \"uniform\"");
        Rng rng(seed);
        p.target = HandshakeParams::from_cm(uniform(rng, kAmplitudeMinCm, kAmplitudeMaxCm),
                                            uniform(rng, kFrequencyMinHz, kFrequencyMaxHz),
                                            uniform(rng, kStiffnessMin, kStiffnessMax));
      } else {
        p.target = target_from_json(t);
      }
      p.beta = beta_from_json(j);
      if (j.contains("weights")) p.weights = vec3_from_json(j.at("weights"), "weights");
      if (j.contains("target_spread") && !t.is_string()) {
        const auto& s = j.at("target_spread");
        Rng rng(seed);
        const double a = p.target.amplitude_cm() + s.value("amplitude_cm", 0.0) * standard_normal(rng);
        const double f = p.target.frequency_hz + s.value("frequency_hz", 0.0) * standard_normal(rng);
        const double k = p.target.stiffness + s.value("stiffness", 0.0) * standard_normal(rng);
        p.target = HandshakeParams::from_cm(std::clamp(a, kAmplitudeMinCm, kAmplitudeMaxCm),
                                            std::clamp(f, kFrequencyMinHz, kFrequencyMaxHz),
                                            std::clamp(k, kStiffnessMin, kStiffnessMax));
      }
      if (!p.target.valid()) throw ConfigInvalid("ideal-point target outside the parameter box");
      return p;
    }
    throw ConfigInvalid("unknown oracle kind '" + kind + "'");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigInvalid(std::string("bad oracle definition: ") + e.what());
  }
}

void validate_oracle_json(const nlohmann::json& j) { (void)preference_from_json(j, 0); }

}  // namespace handshake
