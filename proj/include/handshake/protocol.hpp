#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "handshake/config.hpp"
#include "handshake/errors.hpp"
#include "handshake/metrics.hpp"
#include "handshake/oracle.hpp"
#include "handshake/preference.hpp"

namespace handshake {

inline constexpr int kTrainingTrials = 10;
inline constexpr int kValidationTrials = 6;
inline constexpr int kReportSchemaVersion = 1;

class WrongPhase : public Error {
 public:
  using Error::Error;
};
class NoPendingQuery : public Error {
 public:
  using Error::Error;
};
class UnknownRating : public Error {
 public:
  using Error::Error;
};
class OracleExhausted : public Error {
 public:
  using Error::Error;
};
class BridgeTimeout : public Error {
 public:
  using Error::Error;
};

enum class Satisfaction { Happy, Neutral, Displeased, NotApplicable };
std::string_view to_string(Satisfaction s);
/// Accepts happy / neutral / displeased / n/a; throws UnknownRating otherwise.
Satisfaction satisfaction_from_string(std::string_view s);

enum class Stage { Training, OptimizedReveal, Validation, Done };
std::string_view to_string(Stage s);

struct HandshakeRecord {
  int index = 0;
  std::string category;  // learning | optimized | testing
  std::string role;      // e.g. train3-left, reveal, val2-variant
  HandshakeParams params;
  std::uint64_t seed = 0;
  MetricReport metrics;

  bool operator==(const HandshakeRecord&) const = default;
};

struct TrainingRecord {
  int trial = 0;
  Query query;
  Side selected = Side::Left;
  int left_handshake = 0;
  int right_handshake = 0;

  bool operator==(const TrainingRecord&) const = default;
};

struct ValidationRecord {
  int trial = 0;
  std::string variant_label;
  HandshakeParams variant;
  bool clipped = false;
  Side optimized_side = Side::Left;
  Side selected = Side::Left;
  int left_handshake = 0;
  int right_handshake = 0;

  bool optimized_won() const { return selected == optimized_side; }
  bool operator==(const ValidationRecord&) const = default;
};

struct SessionReport {
  int schema_version = kReportSchemaVersion;
  std::string session_id;
  std::string label;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::vector<HandshakeParams> candidates;
  std::vector<TrainingRecord> training;
  std::vector<BeliefTraceRow> belief_trace;
  HandshakeParams optimized;
  int optimized_index = -1;
  int optimized_handshake = -1;
  Satisfaction satisfaction = Satisfaction::NotApplicable;
  std::vector<ValidationRecord> validation;
  std::vector<HandshakeRecord> handshakes;

  bool complete() const;
};

bool operator==(const SessionReport& a, const SessionReport& b);

nlohmann::json report_to_json(const SessionReport& report);
/// Validates the schema; throws IoError on any violation.
SessionReport report_from_json(const nlohmann::json& j);
/// Canonical text form (sorted keys, 2-space indent, trailing newline).
std::string canonical_json(const SessionReport& report);

nlohmann::json belief_trace_json(const std::vector<BeliefTraceRow>& trace);
nlohmann::json params_json(const HandshakeParams& p);

std::string session_id_for_seed(std::uint64_t seed);

/// Everything one participant's experiment runs through, one input at a
/// time: 10 training comparisons, the optimized handshake, a satisfaction
/// rating and 6 validation comparisons. Oracle, scripted and browser users
/// drive the same object, so identical inputs give identical reports.
class ProtocolSession {
 public:
  struct Pending {
    int sequence = 0;  // 1-based over all comparisons of the session
    Query query;
    int left_handshake = 0;
    int right_handshake = 0;
  };

  ProtocolSession(const ExperimentConfig& config, std::uint64_t seed, std::string label,
                  const HumanHandModel& hand, std::string session_id = {}, bool keep_logs = true);

  Stage stage() const { return stage_; }
  /// 1-based trial within the current stage (0 in reveal/done).
  int trial() const;
  const std::optional<Pending>& pending() const { return pending_; }

  /// Answers the pending comparison. Throws NoPendingQuery.
  void choose(Side selected);
  /// Only valid in OptimizedReveal; advances to Validation.
  void rate(Satisfaction rating);

  const PreferenceLearner& learner() const { return learner_; }
  const HumanHandModel& hand() const { return hand_; }
  const ExperimentConfig& config() const { return config_; }
  std::optional<HandshakeParams> optimized() const;

  const SessionReport& report() const { return report_; }
  const std::vector<HandshakeLog>& logs() const { return logs_; }

 private:
  int simulate(const HandshakeParams& params, const std::string& category, const std::string& role);
  void open_training_query();
  void open_validation_query();
  void enter_reveal();

  ExperimentConfig config_;
  HumanHandModel hand_;
  bool keep_logs_;
  PreferenceLearner learner_;
  Rng validation_rng_;
  Stage stage_ = Stage::Training;
  std::optional<Pending> pending_;
  int sequence_ = 0;
  std::vector<AblationVariant> variants_;
  std::vector<std::size_t> variant_order_;
  std::vector<HandshakeLog> logs_;
  SessionReport report_;
};

/// Source of answers for run_session.
struct UserSource {
  std::function<Side(const ProtocolSession&)> choose;
  std::function<Satisfaction(const ProtocolSession&)> rate;
  HumanHandModel hand;
};

UserSource oracle_source(const ExperimentConfig& config, const std::string& oracle_name,
                         std::uint64_t seed);
/// Replays fixed answers: {"choices": ["left", ...16], "satisfaction": "happy"}.
UserSource scripted_source(const ExperimentConfig& config, const nlohmann::json& script);

struct SessionResult {
  SessionReport report;
  std::vector<HandshakeLog> logs;
};

SessionResult run_session(const ExperimentConfig& config, std::uint64_t seed, const std::string& label,
                          const UserSource& user, bool keep_logs = false);

// -- batch ----------------------------------------------------------------------

struct MeanStd {
  double mean = 0.0;
  std::optional<double> std;  // sample std; empty when n < 2
  std::size_t n = 0;
};

MeanStd mean_std(const std::vector<double>& values);

struct BatchSummary {
  std::vector<SessionReport> reports;
  // Optimized parameters: amplitude_cm, frequency_hz, stiffness.
  std::map<std::string, MeanStd> optimized_params;
  // group -> metric -> category -> stats; group "T" is the total.
  std::map<std::string, std::map<std::string, std::map<std::string, MeanStd>>> metric_table;
  CorrelationMatrix correlations;
  double validation_win_rate = 0.0;
};

BatchSummary run_batch(const ExperimentConfig& config, int n_sessions, std::uint64_t base_seed,
                       const std::string& oracle_name);
BatchSummary summarize(std::vector<SessionReport> reports);

nlohmann::json batch_to_json(const BatchSummary& batch);

// -- export ---------------------------------------------------------------------

enum class ExportFormat { Json, Csv, All };

std::string metrics_csv(const std::vector<SessionReport>& reports);
std::string belief_trace_csv(const SessionReport& report);

/// Writes report.json and/or metrics.csv + belief_trace.csv (+ logs/ when given).
void export_report(const SessionReport& report, const std::filesystem::path& dir, ExportFormat format,
                   const std::vector<HandshakeLog>* logs = nullptr);
void export_batch(const BatchSummary& batch, const std::filesystem::path& dir);
SessionReport import_report(const std::filesystem::path& file);

}  // namespace handshake
