#include "handshake/interaction.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>

#include <Eigen/LU>

#include "handshake/errors.hpp"

namespace handshake {

bool HumanHandModel::valid() const {
  for (double x : {intent_amplitude, intent_frequency, intent_phase, grip_stiffness, grip_damping,
                   drift_rate}) {
    if (!(x >= 0.0) || !std::isfinite(x)) return false;
  }
  return true;
}

std::string_view to_string(PhaseKind kind) {
  switch (kind) {
    case PhaseKind::Rest: return "rest";
    case PhaseKind::Sit: return "sit";
    case PhaseKind::Wait: return "wait";
    case PhaseKind::Shake: return "shake";
    case PhaseKind::Return: return "return";
  }
  return "?";
}

bool is_allowed_transition(PhaseKind from, PhaseKind to) {
  switch (from) {
    case PhaseKind::Rest: return to == PhaseKind::Sit;
    case PhaseKind::Sit: return to == PhaseKind::Wait;
    case PhaseKind::Wait: return to == PhaseKind::Shake;
    case PhaseKind::Shake: return to == PhaseKind::Return;
    case PhaseKind::Return: return to == PhaseKind::Wait;
  }
  return false;
}

bool SimConfig::valid() const {
  return leg.valid() && dt > 0.0 && joint_damping >= 0.0 && nominal_window_s >= dt &&
         torque_floor > 0.0 && grasp_ratio > 1.0 && grasp_delay_s >= 0.0 && grasp_jitter_s >= 0.0 &&
         grasp_timeout_s >= 0.0 && return_epsilon_m > 0.0 && return_timeout_s > 0.0 &&
         force_noise_n >= 0.0 && max_speed > 0.0 && nominal.vec().norm() < leg.max_reach();
}

bool HandshakeLog::consistent() const {
  const auto n = desired_path.size();
  return actual_path.size() == n && torques.size() == n && joint_vel.size() == n && dt > 0.0;
}

std::vector<double> world_vertical(const std::vector<Vec3>& path, double pitch_rad) {
  const Vec3 up = world_up_in_leg(pitch_rad);
  std::vector<double> out;
  out.reserve(path.size());
  for (const auto& p : path) out.push_back(up.dot(p));
  return out;
}

// -- CSV / JSON --------------------------------------------------------------

namespace {

void put_double(std::ostream& out, double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  out.write(buf, res.ptr - buf);
}

double parse_double(std::string_view field) {
  double x = 0.0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), x);
  if (res.ec != std::errc{} || res.ptr != field.data() + field.size()) {
    throw IoError("bad numeric field '" + std::string(field) + "'");
  }
  return x;
}

constexpr std::string_view kCsvHeader =
    "t,pdx,pdy,pdz,px,py,pz,tau1,tau2,tau3,qd1,qd2,qd3";

}  // namespace

void write_log_csv(const HandshakeLog& log, std::ostream& out) {
  out << kCsvHeader << '\n';
  for (std::size_t i = 0; i < log.size(); ++i) {
    put_double(out, static_cast<double>(i) * log.dt);
    for (const Vec3* v : {&log.desired_path[i], &log.actual_path[i], &log.torques[i],
                          &log.joint_vel[i]}) {
      for (int k = 0; k < 3; ++k) {
        out << ',';
        put_double(out, (*v)[k]);
      }
    }
    out << '\n';
  }
}

nlohmann::json log_envelope(const HandshakeLog& log) {
  return {
      {"schema_version", 1},
      {"dt", log.dt},
      {"pitch_rad", log.pitch_rad},
      {"seed", log.seed},
      {"samples", log.size()},
      {"params",
       {{"amplitude_cm", log.params.amplitude_cm()},
        {"amplitude_m", log.params.amplitude_m},
        {"frequency_hz", log.params.frequency_hz},
        {"stiffness", log.params.stiffness},
        {"duration_s", log.params.duration_s}}},
  };
}

HandshakeLog read_log_csv(std::istream& in, const nlohmann::json& envelope) {
  HandshakeLog log;
  try {
    log.dt = envelope.at("dt").get<double>();
    log.pitch_rad = envelope.at("pitch_rad").get<double>();
    log.seed = envelope.at("seed").get<std::uint64_t>();
    const auto& p = envelope.at("params");
    log.params.amplitude_m = p.at("amplitude_m").get<double>();
    log.params.frequency_hz = p.at("frequency_hz").get<double>();
    log.params.stiffness = p.at("stiffness").get<double>();
    log.params.duration_s = p.at("duration_s").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("bad log envelope: ") + e.what());
  }

  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw IoError("missing log CSV header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    double row[13];
    std::size_t start = 0;
    for (int k = 0; k < 13; ++k) {
      const auto end = line.find(',', start);
      if ((end == std::string::npos) != (k == 12)) throw IoError("wrong column count in log CSV");
      row[k] = parse_double(std::string_view(line).substr(start, end - start));
      start = end + 1;
    }
    log.desired_path.emplace_back(row[1], row[2], row[3]);
    log.actual_path.emplace_back(row[4], row[5], row[6]);
    log.torques.emplace_back(row[7], row[8], row[9]);
    log.joint_vel.emplace_back(row[10], row[11], row[12]);
  }
  if (envelope.contains("samples") && envelope["samples"].get<std::size_t>() != log.size()) {
    throw IoError("log CSV sample count does not match envelope");
  }
  return log;
}

// -- grasp detection ----------------------------------------------------------

bool detect_grasp(const Vec3& current_torque, const Vec3& nominal_torque, double floor,
                  double ratio) {
  int over = 0;
  for (int i = 0; i < 3; ++i) {
    const double nominal = std::abs(nominal_torque[i]);
    if (nominal < floor) {
      throw NominalTooSmall("nominal torque of joint " + std::to_string(i + 1) + " is " +
                            std::to_string(nominal) + " N m, below the floor");
    }
    if (std::abs(current_torque[i]) >= ratio * nominal) ++over;
  }
  return over >= 2;
}

void GraspEventQueue::push() {
  std::lock_guard lock(mutex_);
  ++count_;
}

bool GraspEventQueue::try_consume() {
  std::lock_guard lock(mutex_);
  if (count_ == 0) return false;
  count_ = 0;
  return true;
}

std::size_t GraspEventQueue::pending() const {
  std::lock_guard lock(mutex_);
  return count_;
}

// -- foot dynamics --------------------------------------------------------------

void LinearForceModel::add_spring(const Mat3& k, const Vec3& anchor, const Mat3& c) {
  stiffness += k;
  anchored += k * anchor;
  damping += c;
}

Vec3 LinearForceModel::force(const FootState& s) const {
  return anchored - stiffness * s.p - damping * s.v + constant;
}

FootState integrate_foot(const FootState& state, const LinearForceModel& forces, double mass,
                         double dt) {
  // m (v1 - v0) = dt [anchored - K (p0 + dt v1) - C v1 + constant]
  const Mat3 lhs = mass * Mat3::Identity() + dt * forces.damping + dt * dt * forces.stiffness;
  const Vec3 rhs =
      mass * state.v + dt * (forces.anchored - forces.stiffness * state.p + forces.constant);
  FootState next;
  next.v = lhs.partialPivLu().solve(rhs);
  next.p = state.p + dt * next.v;
  return next;
}

// -- simulation -----------------------------------------------------------------

InteractionSim::InteractionSim(const SimConfig& config, const HandshakeParams& params,
                               const HumanHandModel& hand, const BodyPose& body, std::uint64_t seed)
    : config_(config),
      params_(params),
      hand_(hand),
      body_(body),
      gains_(ControllerGains::from_stiffness(params.stiffness, config.joint_damping)),
      seed_(seed),
      rng_(seed) {
  if (!config_.valid()) throw InvalidArgument("invalid simulation config");
  if (!hand_.valid()) throw InvalidArgument("invalid hand model");
  validate(params_);
  foot_.p = rest_position();
  foot_.v = Vec3::Zero();
}

Vec3 InteractionSim::rest_position() const {
  // Equilibrium of the Cartesian spring against gravity at the nominal pose.
  const Vec3 weight =
      -config_.leg.foot_mass * config_.leg.gravity * world_up_in_leg(body_.pitch_rad);
  return config_.nominal.vec() + gains_.kp_cart.diagonal().cwiseInverse().cwiseProduct(weight);
}

JointState InteractionSim::joints() const {
  JointState js;
  js.q = inverse_kinematics(foot_.p, config_.leg, {.clamp = true});
  js.qdot = jacobian(js.q, config_.leg).partialPivLu().solve(foot_.v);
  return js;
}

void InteractionSim::set_params(const HandshakeParams& params) {
  if (phase_.kind != PhaseKind::Wait) return;
  validate(params);
  params_ = params;
  gains_ = ControllerGains::from_stiffness(params.stiffness, config_.joint_damping);
}

Vec3 InteractionSim::desired() const {
  if (phase_.kind != PhaseKind::Shake) return config_.nominal.vec();
  return foot_target(params_, config_.nominal, body_, static_cast<double>(phase_tick_) * config_.dt);
}

Vec3 InteractionSim::hand_target() const {
  const Vec3 up = world_up_in_leg(body_.pitch_rad);
  double offset = hand_.drift_rate * (time() - attach_time_);
  switch (phase_.kind) {
    case PhaseKind::Wait:
      offset -= config_.grasp_pull_m;
      break;
    case PhaseKind::Shake: {
      const double ts = static_cast<double>(phase_tick_) * config_.dt;
      offset += hand_.intent_amplitude *
                std::sin(2.0 * std::numbers::pi * hand_.intent_frequency * ts + hand_.intent_phase);
      break;
    }
    default:
      break;
  }
  return hand_anchor_ + offset * up;
}

void InteractionSim::step() {
  const auto kind = phase_.kind;
  if (kind == PhaseKind::Rest || kind == PhaseKind::Sit) {
    ++tick_;
    ++phase_tick_;
    advance_phase();
    return;
  }

  if (kind == PhaseKind::Wait && !attached_ && time() >= arrival_time_) {
    attached_ = true;
    attach_time_ = time();
    hand_anchor_ = foot_.p;
  }

  const Vec3 target = desired();
  const JointState js = joints();
  const Mat3 j = jacobian(js.q, config_.leg);
  const Vec3 robot_force = gains_.kp_cart * (target - foot_.p) - gains_.kd_cart * foot_.v;
  last_torque_ = j.transpose() * robot_force - gains_.kd_joint * js.qdot;

  if (kind == PhaseKind::Shake) {
    current_.desired_path.push_back(target);
    current_.actual_path.push_back(foot_.p);
    current_.torques.push_back(last_torque_);
    current_.joint_vel.push_back(js.qdot);
  } else if (kind == PhaseKind::Wait) {
    const auto window =
        static_cast<std::size_t>(std::llround(config_.nominal_window_s / config_.dt));
    if (wait_torques_.size() == window) {
      const Vec3 nominal = wait_torque_sum_ / static_cast<double>(window);
      try {
        grasp_flag_ = grasp_flag_ || detect_grasp(last_torque_, nominal, config_.torque_floor,
                                                  config_.grasp_ratio);
      } catch (const NominalTooSmall&) {
        // Threshold meaningless at this pose; only external events can start a shake.
      }
      wait_torque_sum_ -= wait_torques_.front();
      wait_torques_.pop_front();
    }
    const Vec3 magnitude = last_torque_.cwiseAbs();
    wait_torques_.push_back(magnitude);
    wait_torque_sum_ += magnitude;
  }

  LinearForceModel forces;
  forces.add_spring(gains_.kp_cart, target, gains_.kd_cart);
  forces.constant =
      -config_.leg.foot_mass * config_.leg.gravity * world_up_in_leg(body_.pitch_rad);
  if (attached_) {
    forces.add_spring(hand_.grip_stiffness * Mat3::Identity(), hand_target(),
                      hand_.grip_damping * Mat3::Identity());
    if (config_.force_noise_n > 0.0) {
      for (int k = 0; k < 3; ++k) forces.constant[k] += config_.force_noise_n * standard_normal(rng_);
    }
  }
  foot_ = integrate_foot(foot_, forces, config_.leg.foot_mass, config_.dt);

  if (!foot_.p.allFinite() || !foot_.v.allFinite() ||
      foot_.p.norm() > 2.0 * config_.leg.max_reach() || foot_.v.norm() > config_.max_speed) {
    throw NumericalDivergence("foot state diverged at t=" + std::to_string(time()) + " s");
  }

  ++tick_;
  ++phase_tick_;
  advance_phase();
}

ShakePhase InteractionSim::advance_phase() {
  auto enter = [this](PhaseKind next) {
    phase_ = {next, 0.0};
    phase_tick_ = 0;
  };
  auto start_wait = [&]() {
    enter(PhaseKind::Wait);
    attached_ = false;
    grasp_flag_ = false;
    wait_torques_.clear();
    wait_torque_sum_ = Vec3::Zero();
    arrival_time_ = time() + config_.nominal_window_s + config_.grasp_delay_s +
                    config_.grasp_jitter_s * uniform01(rng_);
  };

  switch (phase_.kind) {
    case PhaseKind::Rest:
      enter(PhaseKind::Sit);
      break;
    case PhaseKind::Sit:
      start_wait();
      break;
    case PhaseKind::Wait: {
      const bool event = events_.try_consume();
      if (grasp_flag_ || event) {
        ++grasps_detected_;
        ++shakes_started_;
        if (!attached_) {
          attached_ = true;
          attach_time_ = time();
          hand_anchor_ = foot_.p;
        }
        enter(PhaseKind::Shake);
        current_ = HandshakeLog{};
        current_.dt = config_.dt;
        current_.pitch_rad = body_.pitch_rad;
        current_.seed = seed_;
        current_.params = params_;
      }
      break;
    }
    case PhaseKind::Shake: {
      const auto samples =
          static_cast<std::size_t>(std::llround(params_.duration_s / config_.dt));
      phase_.elapsed = static_cast<double>(phase_tick_) * config_.dt;
      if (current_.size() >= samples) {
        finished_ = std::move(current_);
        current_ = HandshakeLog{};
        enter(PhaseKind::Return);
      }
      break;
    }
    case PhaseKind::Return: {
      const bool home = (foot_.p - rest_position()).norm() < config_.return_epsilon_m;
      const bool timed_out =
          static_cast<double>(phase_tick_) * config_.dt >= config_.return_timeout_s;
      if (home || timed_out) start_wait();
      break;
    }
  }
  return phase_;
}

std::optional<HandshakeLog> InteractionSim::take_log() {
  auto out = std::move(finished_);
  finished_.reset();
  return out;
}

HandshakeLog run_handshake(const HandshakeParams& params, const HumanHandModel& hand,
                           const BodyPose& body, std::uint64_t seed, const SimConfig& config) {
  InteractionSim sim(config, params, hand, body, seed);
  sim.advance_phase();  // Rest -> Sit
  sim.advance_phase();  // Sit -> Wait

  const auto budget = static_cast<std::int64_t>(
      (config.nominal_window_s + config.grasp_delay_s + config.grasp_jitter_s +
       config.grasp_timeout_s + params.duration_s + config.return_timeout_s + 1.0) /
      config.dt);
  std::optional<HandshakeLog> log;
  bool injected = false;
  for (std::int64_t i = 0; i < budget; ++i) {
    if (!injected && sim.phase().kind == PhaseKind::Wait && sim.hand_attached() &&
        sim.time() - sim.hand_attach_time() >= config.grasp_timeout_s) {
      sim.grasp_events().push();
      injected = true;
    }
    sim.step();
    if (!log) log = sim.take_log();
    if (log && sim.phase().kind == PhaseKind::Wait) break;
  }
  if (!log) throw NumericalDivergence("handshake did not complete within the step budget");
  return *std::move(log);
}

}  // namespace handshake
