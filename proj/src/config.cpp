#include "handshake/config.hpp"

#include <cstdio>
#include <fstream>
#include <thread>

#include "handshake/errors.hpp"

namespace handshake {

using nlohmann::json;

ExperimentConfig::ExperimentConfig() {
  oracles["ideal_center"] = {
      {"kind", "ideal_point"},
      {"target", {{"amplitude_cm", 5.0}, {"frequency_hz", 2.0}, {"stiffness", 90.0}}},
      {"beta", 10.0},
      {"weights", {1.0, 1.0, 1.0}},
  };
  // Targets spread like the preferred parameters of a participant pool.
  oracles["ideal_population"] = {
      {"kind", "ideal_point"},
      {"target", {{"amplitude_cm", 5.0}, {"frequency_hz", 2.0}, {"stiffness", 90.0}}},
      {"target_spread", {{"amplitude_cm", 1.15}, {"frequency_hz", 0.39}, {"stiffness", 21.7}}},
      {"beta", 10.0},
      {"weights", {1.0, 1.0, 1.0}},
  };
  oracles["ideal_uniform"] = {
      {"kind", "ideal_point"},
      {"target", "uniform"},
      {"beta", 10.0},
      {"weights", {1.0, 1.0, 1.0}},
  };
  oracles["linear_rational"] = {
      {"kind", "linear"},
      {"omega", {1.0, -0.5, 0.3}},
      {"beta", "inf"},
  };
  oracles["linear_noisy"] = {
      {"kind", "linear"},
      {"omega", {1.0, -0.5, 0.3}},
      {"beta", 1.0},
  };
}

namespace {

json hand_to_json(const HumanHandModel& h) {
  return {{"intent_amplitude_m", h.intent_amplitude}, {"intent_frequency_hz", h.intent_frequency},
          {"intent_phase_rad", h.intent_phase},       {"grip_stiffness", h.grip_stiffness},
          {"grip_damping", h.grip_damping},           {"drift_rate", h.drift_rate}};
}

HumanHandModel hand_from_json(const json& j) {
  return {j.at("intent_amplitude_m").get<double>(), j.at("intent_frequency_hz").get<double>(),
          j.at("intent_phase_rad").get<double>(),   j.at("grip_stiffness").get<double>(),
          j.at("grip_damping").get<double>(),       j.at("drift_rate").get<double>()};
}

json semantic_json(const ExperimentConfig& c) {
  json oracles = json::object();
  for (const auto& [name, def] : c.oracles) oracles[name] = def;
  const auto& s = c.sim;
  return {
      {"schema_version", kConfigSchemaVersion},
      {"seed", c.seed},
      {"duration_s", c.duration_s},
      {"pitch_rad", c.body.pitch_rad},
      {"leg",
       {{"hip_offset", s.leg.hip_offset},
        {"thigh_len", s.leg.thigh_len},
        {"calf_len", s.leg.calf_len},
        {"foot_mass", s.leg.foot_mass},
        {"gravity", s.leg.gravity}}},
      {"nominal", {{"x", s.nominal.x}, {"y", s.nominal.y}, {"z", s.nominal.z}}},
      {"sim",
       {{"dt", s.dt},
        {"joint_damping", s.joint_damping},
        {"nominal_window_s", s.nominal_window_s},
        {"torque_floor", s.torque_floor},
        {"grasp_ratio", s.grasp_ratio},
        {"grasp_delay_s", s.grasp_delay_s},
        {"grasp_jitter_s", s.grasp_jitter_s},
        {"grasp_pull_m", s.grasp_pull_m},
        {"grasp_timeout_s", s.grasp_timeout_s},
        {"return_epsilon_m", s.return_epsilon_m},
        {"return_timeout_s", s.return_timeout_s},
        {"force_noise_n", s.force_noise_n},
        {"max_speed", s.max_speed}}},
      {"learning",
       {{"n_samples", c.learning.n_samples},
        {"omega_cap", c.learning.omega_cap},
        {"proposal_std", c.learning.proposal_std},
        {"burn_in", c.learning.burn_in},
        {"thin", c.learning.thin},
        {"beta", c.learning.beta}}},
      {"metrics",
       {{"prominence_m", c.metrics.prominence_m},
        {"dtw_downsample", c.metrics.dtw_downsample},
        {"plv_edge_fraction", c.metrics.plv_edge_fraction},
        {"frequency_zero_pad", c.metrics.frequency_zero_pad},
        {"torque_mode", c.metrics.torque_mode == TorqueMode::MeanAbs ? "mean_abs" : "abs_mean"}}},
      {"neutral_hand", hand_to_json(c.neutral_hand)},
      {"grip_range", {c.grip.min, c.grip.max}},
      {"oracles", oracles},
      {"default_oracle", c.default_oracle},
  };
}

// Rejects keys of `input` that the defaults do not have; free-form below "oracles".
void check_keys(const json& input, const json& reference, const std::string& path) {
  if (!input.is_object()) {
    throw ConfigInvalid("config" + path + " must be an object");
  }
  for (const auto& [key, value] : input.items()) {
    if (!reference.contains(key)) throw ConfigInvalid("unknown config key '" + path + "/" + key + "'");
    if (key == "oracles" && path.empty()) continue;
    if (reference[key].is_object()) check_keys(value, reference[key], path + "/" + key);
  }
}

}  // namespace

json config_to_json(const ExperimentConfig& config) {
  json j = semantic_json(config);
  j["threads"] = config.threads;
  return j;
}

ExperimentConfig config_from_json(const json& input) {
  const ExperimentConfig defaults;
  json reference = config_to_json(defaults);
  check_keys(input, reference, "");
  if (input.contains("oracles")) reference["oracles"] = json::object();
  reference.merge_patch(input);
  const json& j = reference;

  ExperimentConfig c;
  try {
    if (j.at("schema_version").get<int>() != kConfigSchemaVersion) {
      throw ConfigInvalid("unsupported config schema_version");
    }
    c.seed = j.at("seed").get<std::uint64_t>();
    c.duration_s = j.at("duration_s").get<double>();
    c.body.pitch_rad = j.at("pitch_rad").get<double>();
    const auto& leg = j.at("leg");
    c.sim.leg = {leg.at("hip_offset").get<double>(), leg.at("thigh_len").get<double>(),
                 leg.at("calf_len").get<double>(), leg.at("foot_mass").get<double>(),
                 leg.at("gravity").get<double>()};
    const auto& nom = j.at("nominal");
    c.sim.nominal = {nom.at("x").get<double>(), nom.at("y").get<double>(), nom.at("z").get<double>()};
    const auto& s = j.at("sim");
    c.sim.dt = s.at("dt").get<double>();
    c.sim.joint_damping = s.at("joint_damping").get<double>();
    c.sim.nominal_window_s = s.at("nominal_window_s").get<double>();
    c.sim.torque_floor = s.at("torque_floor").get<double>();
    c.sim.grasp_ratio = s.at("grasp_ratio").get<double>();
    c.sim.grasp_delay_s = s.at("grasp_delay_s").get<double>();
    c.sim.grasp_jitter_s = s.at("grasp_jitter_s").get<double>();
    c.sim.grasp_pull_m = s.at("grasp_pull_m").get<double>();
    c.sim.grasp_timeout_s = s.at("grasp_timeout_s").get<double>();
    c.sim.return_epsilon_m = s.at("return_epsilon_m").get<double>();
    c.sim.return_timeout_s = s.at("return_timeout_s").get<double>();
    c.sim.force_noise_n = s.at("force_noise_n").get<double>();
    c.sim.max_speed = s.at("max_speed").get<double>();
    const auto& l = j.at("learning");
    c.learning.n_samples = l.at("n_samples").get<int>();
    c.learning.omega_cap = l.at("omega_cap").get<double>();
    c.learning.proposal_std = l.at("proposal_std").get<double>();
    c.learning.burn_in = l.at("burn_in").get<int>();
    c.learning.thin = l.at("thin").get<int>();
    c.learning.beta = l.at("beta").get<double>();
    const auto& m = j.at("metrics");
    c.metrics.prominence_m = m.at("prominence_m").get<double>();
    c.metrics.dtw_downsample = m.at("dtw_downsample").get<int>();
    c.metrics.plv_edge_fraction = m.at("plv_edge_fraction").get<double>();
    c.metrics.frequency_zero_pad = m.at("frequency_zero_pad").get<int>();
    const auto mode = m.at("torque_mode").get<std::string>();
    if (mode == "mean_abs") c.metrics.torque_mode = TorqueMode::MeanAbs;
    else if (mode == "abs_mean") c.metrics.torque_mode = TorqueMode::AbsMean;
    else throw ConfigInvalid("metrics/torque_mode must be mean_abs or abs_mean");
    c.neutral_hand = hand_from_json(j.at("neutral_hand"));
    const auto& g = j.at("grip_range");
    if (!g.is_array() || g.size() != 2) throw ConfigInvalid("grip_range must be [min, max]");
    c.grip = {g[0].get<double>(), g[1].get<double>()};
    c.oracles.clear();
    for (const auto& [name, def] : j.at("oracles").items()) c.oracles[name] = def;
    c.default_oracle = j.at("default_oracle").get<std::string>();
    c.threads = j.at("threads").get<int>();
  } catch (const json::exception& e) {
    throw ConfigInvalid(std::string("bad config: ") + e.what());
  }
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigInvalid("cannot open config file " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigInvalid(std::string("config is not valid JSON: ") + e.what());
  }
  return config_from_json(j);
}

void validate(const ExperimentConfig& c) {
  if (!(c.duration_s > 0.0)) throw ConfigInvalid("duration_s must be > 0");
  if (!(c.body.pitch_rad >= 0.0 && c.body.pitch_rad < 1.5707963267948966)) {
    throw ConfigInvalid("pitch_rad must lie in [0, pi/2)");
  }
  if (!c.sim.valid()) throw ConfigInvalid("invalid leg or simulation settings");
  try {
    (void)inverse_kinematics(c.sim.nominal.vec(), c.sim.leg);
  } catch (const UnreachableTarget&) {
    throw ConfigInvalid("nominal foot position is not reachable");
  }
  if (!c.learning.valid()) throw ConfigInvalid("invalid learning settings");
  if (!c.metrics.valid()) throw ConfigInvalid("invalid metric settings");
  if (!c.neutral_hand.valid()) throw ConfigInvalid("invalid neutral_hand");
  if (!(c.grip.min >= 0.0 && c.grip.max >= c.grip.min)) throw ConfigInvalid("invalid grip_range");
  if (c.threads < 0) throw ConfigInvalid("threads must be >= 0");
  for (const auto& [name, def] : c.oracles) {
    try {
      validate_oracle_json(def);
    } catch (const Error& e) {
      throw ConfigInvalid("oracle '" + name + "': " + e.what());
    }
  }
  if (!c.default_oracle.empty() && !c.oracles.contains(c.default_oracle)) {
    throw ConfigInvalid("default_oracle '" + c.default_oracle + "' is not defined");
  }
}

std::string config_hash(const ExperimentConfig& config) {
  const std::string text = semantic_json(config).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace handshake
