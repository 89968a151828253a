#include "handshake/protocol.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

namespace handshake {

using nlohmann::json;

std::string_view to_string(Satisfaction s) {
  switch (s) {
    case Satisfaction::Happy: return "happy";
    case Satisfaction::Neutral: return "neutral";
    case Satisfaction::Displeased: return "displeased";
    case Satisfaction::NotApplicable: return "n/a";
  }
  return "n/a";
}

Satisfaction satisfaction_from_string(std::string_view s) {
  if (s == "happy") return Satisfaction::Happy;
  if (s == "neutral") return Satisfaction::Neutral;
  if (s == "displeased") return Satisfaction::Displeased;
  if (s == "n/a") return Satisfaction::NotApplicable;
  throw UnknownRating("unknown rating '" + std::string(s) + "'");
}

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::Training: return "training";
    case Stage::OptimizedReveal: return "optimized_reveal";
    case Stage::Validation: return "validation";
    case Stage::Done: return "done";
  }
  return "done";
}

std::string session_id_for_seed(std::uint64_t seed) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "hs-%016llx", static_cast<unsigned long long>(mix_seed(seed)));
  return buf;
}

bool SessionReport::complete() const {
  return training.size() == kTrainingTrials && validation.size() == kValidationTrials &&
         optimized_handshake >= 0;
}

// -- JSON -----------------------------------------------------------------------

json params_json(const HandshakeParams& p) {
  return {{"amplitude_m", p.amplitude_m},
          {"frequency_hz", p.frequency_hz},
          {"stiffness", p.stiffness},
          {"duration_s", p.duration_s}};
}

namespace {

json vec_json(const Vec3& v) { return json::array({v[0], v[1], v[2]}); }

Vec3 vec_from(const json& j) {
  if (!j.is_array() || j.size() != 3) throw IoError("expected a 3-array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

HandshakeParams params_from(const json& j) {
  return {j.at("amplitude_m").get<double>(), j.at("frequency_hz").get<double>(),
          j.at("stiffness").get<double>(), j.at("duration_s").get<double>()};
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

json metrics_json(const MetricReport& m) {
  return {{"amplitude_error_pct", optional_json(m.amplitude_error_pct)},
          {"frequency_error_pct", optional_json(m.frequency_error_pct)},
          {"actual_amplitude_m", m.actual_amplitude_m},
          {"dtw_m", m.dtw_m},
          {"plv", optional_json(m.plv)},
          {"mean_torque_nm", m.mean_torque_nm},
          {"mean_power_w", m.mean_power_w}};
}

MetricReport metrics_from(const json& j) {
  MetricReport m;
  m.amplitude_error_pct = optional_from(j.at("amplitude_error_pct"));
  m.frequency_error_pct = optional_from(j.at("frequency_error_pct"));
  m.actual_amplitude_m = j.at("actual_amplitude_m").get<double>();
  m.dtw_m = j.at("dtw_m").get<double>();
  m.plv = optional_from(j.at("plv"));
  m.mean_torque_nm = j.at("mean_torque_nm").get<double>();
  m.mean_power_w = j.at("mean_power_w").get<double>();
  return m;
}

json trace_row_json(const BeliefTraceRow& r) {
  return {{"trial", r.trial}, {"best", params_json(r.best)}, {"mean", vec_json(r.mean)},
          {"std", vec_json(r.stddev)}};
}

}  // namespace

json belief_trace_json(const std::vector<BeliefTraceRow>& trace) {
  json rows = json::array();
  for (const auto& r : trace) rows.push_back(trace_row_json(r));
  return rows;
}

json report_to_json(const SessionReport& r) {
  json candidates = json::array();
  for (const auto& c : r.candidates) candidates.push_back(params_json(c));
  json training = json::array();
  for (const auto& t : r.training) {
    training.push_back({{"trial", t.trial},
                        {"left", params_json(t.query.left)},
                        {"right", params_json(t.query.right)},
                        {"left_index", t.query.left_index},
                        {"right_index", t.query.right_index},
                        {"selected", to_string(t.selected)},
                        {"left_handshake", t.left_handshake},
                        {"right_handshake", t.right_handshake}});
  }
  json validation = json::array();
  for (const auto& v : r.validation) {
    validation.push_back({{"trial", v.trial},
                          {"variant_label", v.variant_label},
                          {"variant", params_json(v.variant)},
                          {"clipped", v.clipped},
                          {"optimized_side", to_string(v.optimized_side)},
                          {"selected", to_string(v.selected)},
                          {"optimized_won", v.optimized_won()},
                          {"left_handshake", v.left_handshake},
                          {"right_handshake", v.right_handshake}});
  }
  json handshakes = json::array();
  for (const auto& h : r.handshakes) {
    handshakes.push_back({{"index", h.index},
                          {"category", h.category},
                          {"role", h.role},
                          {"params", params_json(h.params)},
                          {"seed", h.seed},
                          {"metrics", metrics_json(h.metrics)}});
  }
  return {{"schema_version", r.schema_version},
          {"session_id", r.session_id},
          {"label", r.label},
          {"seed", r.seed},
          {"config_hash", r.config_hash},
          {"candidates", candidates},
          {"training", training},
          {"belief_trace", belief_trace_json(r.belief_trace)},
          {"optimized",
           {{"params", params_json(r.optimized)},
            {"candidate_index", r.optimized_index},
            {"handshake", r.optimized_handshake}}},
          {"satisfaction", to_string(r.satisfaction)},
          {"validation", validation},
          {"handshakes", handshakes}};
}

SessionReport report_from_json(const json& j) {
  SessionReport r;
  try {
    r.schema_version = j.at("schema_version").get<int>();
    if (r.schema_version != kReportSchemaVersion) {
      throw IoError("unsupported report schema_version " + std::to_string(r.schema_version));
    }
    r.session_id = j.at("session_id").get<std::string>();
    r.label = j.at("label").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.config_hash = j.at("config_hash").get<std::string>();
    for (const auto& c : j.at("candidates")) r.candidates.push_back(params_from(c));
    for (const auto& t : j.at("training")) {
      TrainingRecord rec;
      rec.trial = t.at("trial").get<int>();
      rec.query.left = params_from(t.at("left"));
      rec.query.right = params_from(t.at("right"));
      rec.query.left_index = t.at("left_index").get<int>();
      rec.query.right_index = t.at("right_index").get<int>();
      rec.selected = side_from_string(t.at("selected").get<std::string>());
      rec.left_handshake = t.at("left_handshake").get<int>();
      rec.right_handshake = t.at("right_handshake").get<int>();
      r.training.push_back(rec);
    }
    for (const auto& row : j.at("belief_trace")) {
      r.belief_trace.push_back({row.at("trial").get<int>(), params_from(row.at("best")),
                                vec_from(row.at("mean")), vec_from(row.at("std"))});
    }
    const auto& opt = j.at("optimized");
    r.optimized = params_from(opt.at("params"));
    r.optimized_index = opt.at("candidate_index").get<int>();
    r.optimized_handshake = opt.at("handshake").get<int>();
    r.satisfaction = satisfaction_from_string(j.at("satisfaction").get<std::string>());
    for (const auto& v : j.at("validation")) {
      ValidationRecord rec;
      rec.trial = v.at("trial").get<int>();
      rec.variant_label = v.at("variant_label").get<std::string>();
      rec.variant = params_from(v.at("variant"));
      rec.clipped = v.at("clipped").get<bool>();
      rec.optimized_side = side_from_string(v.at("optimized_side").get<std::string>());
      rec.selected = side_from_string(v.at("selected").get<std::string>());
      rec.left_handshake = v.at("left_handshake").get<int>();
      rec.right_handshake = v.at("right_handshake").get<int>();
      if (v.at("optimized_won").get<bool>() != rec.optimized_won()) {
        throw IoError("validation optimized_won disagrees with the recorded sides");
      }
      r.validation.push_back(rec);
    }
    for (const auto& h : j.at("handshakes")) {
      HandshakeRecord rec;
      rec.index = h.at("index").get<int>();
      rec.category = h.at("category").get<std::string>();
      rec.role = h.at("role").get<std::string>();
      rec.params = params_from(h.at("params"));
      rec.seed = h.at("seed").get<std::uint64_t>();
      rec.metrics = metrics_from(h.at("metrics"));
      r.handshakes.push_back(rec);
    }
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed report: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw IoError(std::string("malformed report: ") + e.what());
  } catch (const UnknownRating& e) {
    throw IoError(std::string("malformed report: ") + e.what());
  }

  if (r.training.size() > kTrainingTrials || r.validation.size() > kValidationTrials) {
    throw IoError("report has too many comparisons");
  }
  const auto n = static_cast<int>(r.handshakes.size());
  for (int i = 0; i < n; ++i) {
    if (r.handshakes[i].index != i) throw IoError("handshake indices must be 0..n-1 in order");
  }
  auto check_ref = [n](int idx) {
    if (idx < 0 || idx >= n) throw IoError("comparison refers to a missing handshake");
  };
  for (const auto& t : r.training) {
    check_ref(t.left_handshake);
    check_ref(t.right_handshake);
  }
  for (const auto& v : r.validation) {
    check_ref(v.left_handshake);
    check_ref(v.right_handshake);
  }
  if (r.optimized_handshake >= 0) check_ref(r.optimized_handshake);
  return r;
}

std::string canonical_json(const SessionReport& report) { return report_to_json(report).dump(2) + "\n"; }

bool operator==(const SessionReport& a, const SessionReport& b) {
  return report_to_json(a) == report_to_json(b);
}

// -- session --------------------------------------------------------------------

namespace {

constexpr std::uint64_t kCandidateStream = 1;
constexpr std::uint64_t kBeliefStream = 2;
constexpr std::uint64_t kQueryStream = 3;
constexpr std::uint64_t kValidationStream = 4;
constexpr std::uint64_t kOracleStream = 5;
constexpr std::uint64_t kTargetStream = 6;
constexpr std::uint64_t kHandshakeStreamBase = 1000;

std::vector<HandshakeParams> session_candidates(std::uint64_t seed, double duration_s) {
  auto c = generate_candidates(derive_seed(seed, kCandidateStream));
  for (auto& p : c) p.duration_s = duration_s;
  return c;
}

}  // namespace

ProtocolSession::ProtocolSession(const ExperimentConfig& config, std::uint64_t seed, std::string label,
                                 const HumanHandModel& hand, std::string session_id, bool keep_logs)
    : config_(config),
      hand_(hand),
      keep_logs_(keep_logs),
      learner_(session_candidates(seed, config.duration_s), config.learning,
               derive_seed(seed, kBeliefStream), derive_seed(seed, kQueryStream)),
      validation_rng_(derive_seed(seed, kValidationStream)) {
  validate(config_);
  if (!hand_.valid()) throw InvalidArgument("invalid hand model");
  report_.session_id = session_id.empty() ? session_id_for_seed(seed) : std::move(session_id);
  report_.label = std::move(label);
  report_.seed = seed;
  report_.config_hash = config_hash(config_);
  report_.candidates = learner_.candidates();
  report_.belief_trace = learner_.trace();
  open_training_query();
}

int ProtocolSession::trial() const {
  switch (stage_) {
    case Stage::Training: return static_cast<int>(report_.training.size()) + 1;
    case Stage::Validation: return static_cast<int>(report_.validation.size()) + 1;
    default: return 0;
  }
}

std::optional<HandshakeParams> ProtocolSession::optimized() const {
  if (stage_ == Stage::Training) return std::nullopt;
  return report_.optimized;
}

int ProtocolSession::simulate(const HandshakeParams& params, const std::string& category,
                              const std::string& role) {
  const int index = static_cast<int>(report_.handshakes.size());
  const std::uint64_t seed = derive_seed(report_.seed, kHandshakeStreamBase + index);
  HandshakeLog log = run_handshake(params, hand_, config_.body, seed, config_.sim);
  HandshakeRecord rec{index, category, role, params, seed, evaluate(log, config_.metrics)};
  report_.handshakes.push_back(std::move(rec));
  if (keep_logs_) logs_.push_back(std::move(log));
  return index;
}

void ProtocolSession::open_training_query() {
  Query q;
  try {
    q = learner_.next_query();
  } catch (const Exhausted& e) {
    throw OracleExhausted(e.what());
  }
  const int t = static_cast<int>(report_.training.size()) + 1;
  const std::string prefix = "train" + std::to_string(t);
  const int left = simulate(q.left, "learning", prefix + "-left");
  const int right = simulate(q.right, "learning", prefix + "-right");
  pending_ = Pending{++sequence_, q, left, right};
}

void ProtocolSession::enter_reveal() {
  stage_ = Stage::OptimizedReveal;
  pending_.reset();
  report_.optimized_index = static_cast<int>(learner_.best_index());
  report_.optimized = learner_.best();
  report_.optimized_handshake = simulate(report_.optimized, "optimized", "reveal");
  variants_ = ablation_variants(report_.optimized);
  variant_order_.resize(variants_.size());
  for (std::size_t i = 0; i < variant_order_.size(); ++i) variant_order_[i] = i;
  for (std::size_t i = variant_order_.size(); i > 1; --i) {
    std::swap(variant_order_[i - 1], variant_order_[uniform_index(validation_rng_, i)]);
  }
}

void ProtocolSession::open_validation_query() {
  const std::size_t t = report_.validation.size();
  const AblationVariant& v = variants_[variant_order_[t]];
  const bool optimized_left = uniform01(validation_rng_) < 0.5;
  const std::string prefix = "val" + std::to_string(t + 1);

  Query q;
  int left = 0;
  int right = 0;
  if (optimized_left) {
    q = {report_.optimized, v.params, report_.optimized_index, -1};
    left = simulate(q.left, "optimized", prefix + "-optimized");
    right = simulate(q.right, "testing", prefix + "-" + v.label);
  } else {
    q = {v.params, report_.optimized, -1, report_.optimized_index};
    left = simulate(q.left, "testing", prefix + "-" + v.label);
    right = simulate(q.right, "optimized", prefix + "-optimized");
  }
  pending_ = Pending{++sequence_, q, left, right};
}

void ProtocolSession::choose(Side selected) {
  if (!pending_) throw NoPendingQuery("no comparison is pending");
  const Pending p = *pending_;
  if (stage_ == Stage::Training) {
    learner_.record(Choice{p.query, selected});
    report_.training.push_back(
        {static_cast<int>(report_.training.size()) + 1, p.query, selected, p.left_handshake,
         p.right_handshake});
    report_.belief_trace = learner_.trace();
    if (report_.training.size() == kTrainingTrials) {
      enter_reveal();
    } else {
      open_training_query();
    }
    return;
  }
  // Validation
  const std::size_t t = report_.validation.size();
  const AblationVariant& v = variants_[variant_order_[t]];
  const Side optimized_side = p.query.left_index == report_.optimized_index && p.query.right_index == -1
                                  ? Side::Left
                                  : Side::Right;
  report_.validation.push_back({static_cast<int>(t) + 1, v.label, v.params, v.clipped, optimized_side,
                                selected, p.left_handshake, p.right_handshake});
  if (report_.validation.size() == kValidationTrials) {
    stage_ = Stage::Done;
    pending_.reset();
  } else {
    open_validation_query();
  }
}

void ProtocolSession::rate(Satisfaction rating) {
  if (stage_ != Stage::OptimizedReveal) {
    throw WrongPhase("satisfaction is only accepted after the optimized handshake");
  }
  report_.satisfaction = rating;
  stage_ = Stage::Validation;
  open_validation_query();
}

// -- user sources ---------------------------------------------------------------

UserSource oracle_source(const ExperimentConfig& config, const std::string& oracle_name,
                         std::uint64_t seed) {
  const auto it = config.oracles.find(oracle_name);
  if (it == config.oracles.end()) throw ConfigInvalid("unknown oracle '" + oracle_name + "'");
  auto user = std::make_shared<SyntheticUser>(
      preference_from_json(it->second, derive_seed(seed, kTargetStream)),
      derive_seed(seed, kOracleStream), config.grip);
  UserSource src;
  src.hand = user->hand_for(HandshakeParams{});
  src.choose = [user](const ProtocolSession& s) { return user->answer(s.pending()->query).selected; };
  src.rate = [](const ProtocolSession&) { return Satisfaction::NotApplicable; };
  return src;
}

UserSource scripted_source(const ExperimentConfig& config, const json& script) {
  std::vector<Side> choices;
  Satisfaction rating = Satisfaction::NotApplicable;
  try {
    for (const auto& c : script.at("choices")) choices.push_back(side_from_string(c.get<std::string>()));
    if (script.contains("satisfaction")) {
      rating = satisfaction_from_string(script.at("satisfaction").get<std::string>());
    }
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("bad replay script: ") + e.what());
  }
  if (choices.size() != kTrainingTrials + kValidationTrials) {
    throw InvalidArgument("replay script needs exactly " +
                          std::to_string(kTrainingTrials + kValidationTrials) + " choices");
  }
  auto next = std::make_shared<std::size_t>(0);
  UserSource src;
  src.hand = config.neutral_hand;
  src.choose = [choices, next](const ProtocolSession&) { return choices.at((*next)++); };
  src.rate = [rating](const ProtocolSession&) { return rating; };
  return src;
}

SessionResult run_session(const ExperimentConfig& config, std::uint64_t seed, const std::string& label,
                          const UserSource& user, bool keep_logs) {
  ProtocolSession s(config, seed, label, user.hand, {}, keep_logs);
  while (s.stage() != Stage::Done) {
    if (s.stage() == Stage::OptimizedReveal) {
      s.rate(user.rate(s));
    } else {
      s.choose(user.choose(s));
    }
  }
  return {s.report(), s.logs()};
}

// -- batch ----------------------------------------------------------------------

MeanStd mean_std(const std::vector<double>& v) {
  MeanStd out;
  out.n = v.size();
  if (v.empty()) return out;
  double sum = 0.0;
  for (double x : v) sum += x;
  out.mean = sum / static_cast<double>(v.size());
  if (v.size() >= 2) {
    double ss = 0.0;
    for (double x : v) ss += (x - out.mean) * (x - out.mean);
    out.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return out;
}

namespace {

const std::vector<std::string> kTableMetrics = {"amplitude_error_pct", "frequency_error_pct", "dtw_m",
                                                "plv", "mean_torque_nm", "mean_power_w"};

std::optional<double> metric_value(const MetricReport& m, const std::string& name) {
  if (name == "amplitude_error_pct") return m.amplitude_error_pct;
  if (name == "frequency_error_pct") return m.frequency_error_pct;
  if (name == "dtw_m") return m.dtw_m;
  if (name == "plv") return m.plv;
  if (name == "mean_torque_nm") return m.mean_torque_nm;
  if (name == "mean_power_w") return m.mean_power_w;
  return std::nullopt;
}

}  // namespace

BatchSummary summarize(std::vector<SessionReport> reports) {
  BatchSummary b;
  b.reports = std::move(reports);

  std::vector<double> a, f, k;
  for (const auto& r : b.reports) {
    a.push_back(r.optimized.amplitude_cm());
    f.push_back(r.optimized.frequency_hz);
    k.push_back(r.optimized.stiffness);
  }
  b.optimized_params["amplitude_cm"] = mean_std(a);
  b.optimized_params["frequency_hz"] = mean_std(f);
  b.optimized_params["stiffness"] = mean_std(k);

  std::map<std::string, std::map<std::string, std::map<std::string, std::vector<double>>>> values;
  std::vector<std::vector<double>> series(9);
  std::size_t wins = 0;
  std::size_t comparisons = 0;
  for (const auto& r : b.reports) {
    for (const auto& h : r.handshakes) {
      for (const auto& name : kTableMetrics) {
        if (const auto v = metric_value(h.metrics, name)) {
          values["T"][name][h.category].push_back(*v);
          if (!r.label.empty()) values[r.label][name][h.category].push_back(*v);
        }
      }
      const auto& m = h.metrics;
      if (m.amplitude_error_pct && m.frequency_error_pct && m.plv) {
        const double row[9] = {h.params.amplitude_cm(), h.params.frequency_hz, h.params.stiffness,
                               *m.amplitude_error_pct, *m.frequency_error_pct, m.dtw_m,
                               *m.plv, m.mean_torque_nm, m.mean_power_w};
        for (std::size_t i = 0; i < 9; ++i) series[i].push_back(row[i]);
      }
    }
    for (const auto& v : r.validation) {
      ++comparisons;
      if (v.optimized_won()) ++wins;
    }
  }
  for (const auto& [group, metrics] : values) {
    for (const auto& [metric, cats] : metrics) {
      for (const auto& [cat, vals] : cats) b.metric_table[group][metric][cat] = mean_std(vals);
    }
  }
  b.correlations = correlation_matrix({"amplitude", "frequency", "stiffness", "amplitude_error",
                                       "frequency_error", "dtw", "plv", "torque", "power"},
                                      series);
  b.validation_win_rate = comparisons ? static_cast<double>(wins) / comparisons : 0.0;
  return b;
}

BatchSummary run_batch(const ExperimentConfig& config, int n_sessions, std::uint64_t base_seed,
                       const std::string& oracle_name) {
  if (n_sessions < 1) throw InvalidArgument("batch needs at least one session");
  if (!config.oracles.contains(oracle_name)) throw ConfigInvalid("unknown oracle '" + oracle_name + "'");

  std::vector<SessionReport> reports(static_cast<std::size_t>(n_sessions));
  std::vector<std::exception_ptr> errors(reports.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < reports.size(); i = next++) {
      try {
        const std::uint64_t seed = base_seed + i;
        reports[i] = run_session(config, seed, oracle_name, oracle_source(config, oracle_name, seed)).report;
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  unsigned threads = config.threads > 0 ? static_cast<unsigned>(config.threads)
                                        : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(n_sessions));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return summarize(std::move(reports));
}

namespace {

json mean_std_json(const MeanStd& m) {
  return {{"mean", m.mean}, {"std", m.std ? json(*m.std) : json("n/a")}, {"n", m.n}};
}

}  // namespace

json batch_to_json(const BatchSummary& b) {
  json params = json::object();
  for (const auto& [name, m] : b.optimized_params) params[name] = mean_std_json(m);
  json table = json::object();
  for (const auto& [group, metrics] : b.metric_table) {
    for (const auto& [metric, cats] : metrics) {
      for (const auto& [cat, m] : cats) table[group][metric][cat] = mean_std_json(m);
    }
  }
  json corr = json::array();
  for (const auto& row : b.correlations.r) {
    json jr = json::array();
    for (const auto& v : row) jr.push_back(v ? json(*v) : json(nullptr));
    corr.push_back(jr);
  }
  json ids = json::array();
  for (const auto& r : b.reports) ids.push_back(r.session_id);
  return {{"schema_version", kReportSchemaVersion},
          {"sessions", ids},
          {"optimized_params", params},
          {"metrics", table},
          {"correlation", {{"names", b.correlations.names}, {"r", corr}}},
          {"validation_win_rate", b.validation_win_rate}};
}

// -- export ---------------------------------------------------------------------

namespace {

std::string num(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

std::string num(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

std::mutex& export_mutex() {
  static std::mutex m;
  return m;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

}  // namespace

std::string metrics_csv(const std::vector<SessionReport>& reports) {
  std::string out =
      "session_id,label,handshake,category,role,amplitude_cm,frequency_hz,stiffness,duration_s,"
      "amplitude_error_pct,frequency_error_pct,actual_amplitude_m,dtw_m,plv,mean_torque_nm,"
      "mean_power_w\n";
  for (const auto& r : reports) {
    for (const auto& h : r.handshakes) {
      const auto& m = h.metrics;
      std::string label = r.label;
      std::replace(label.begin(), label.end(), ',', ';');
      out += r.session_id + "," + label + "," + std::to_string(h.index) + "," + h.category + "," +
             h.role + "," + num(h.params.amplitude_cm()) + "," + num(h.params.frequency_hz) + "," +
             num(h.params.stiffness) + "," + num(h.params.duration_s) + "," +
             num(m.amplitude_error_pct) + "," + num(m.frequency_error_pct) + "," +
             num(m.actual_amplitude_m) + "," + num(m.dtw_m) + "," + num(m.plv) + "," +
             num(m.mean_torque_nm) + "," + num(m.mean_power_w) + "\n";
    }
  }
  return out;
}

std::string belief_trace_csv(const SessionReport& report) {
  std::string out = "trial,a,f,k,mean_w1,mean_w2,mean_w3,std_w1,std_w2,std_w3\n";
  for (const auto& row : report.belief_trace) {
    out += std::to_string(row.trial) + "," + num(row.best.amplitude_cm()) + "," +
           num(row.best.frequency_hz) + "," + num(row.best.stiffness);
    for (int i = 0; i < 3; ++i) out += "," + num(row.mean[i]);
    for (int i = 0; i < 3; ++i) out += "," + num(row.stddev[i]);
    out += "\n";
  }
  return out;
}

void export_report(const SessionReport& report, const std::filesystem::path& dir, ExportFormat format,
                   const std::vector<HandshakeLog>* logs) {
  std::lock_guard lock(export_mutex());
  ensure_dir(dir);
  if (format != ExportFormat::Csv) write_file(dir / "report.json", canonical_json(report));
  if (format != ExportFormat::Json) {
    write_file(dir / "metrics.csv", metrics_csv({report}));
    write_file(dir / "belief_trace.csv", belief_trace_csv(report));
  }
  if (logs) {
    ensure_dir(dir / "logs");
    for (std::size_t i = 0; i < logs->size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "handshake_%02zu", i);
      std::ostringstream csv;
      write_log_csv((*logs)[i], csv);
      write_file(dir / "logs" / (std::string(name) + ".csv"), csv.str());
      write_file(dir / "logs" / (std::string(name) + ".json"), log_envelope((*logs)[i]).dump(2) + "\n");
    }
  }
}

void export_batch(const BatchSummary& batch, const std::filesystem::path& dir) {
  std::lock_guard lock(export_mutex());
  ensure_dir(dir / "reports");
  write_file(dir / "summary.json", batch_to_json(batch).dump(2) + "\n");
  write_file(dir / "metrics.csv", metrics_csv(batch.reports));
  for (const auto& r : batch.reports) {
    write_file(dir / "reports" / (r.session_id + ".json"), canonical_json(r));
  }
}

SessionReport import_report(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot open " + file.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw IoError(std::string("report is not valid JSON: ") + e.what());
  }
  return report_from_json(j);
}

}  // namespace handshake
