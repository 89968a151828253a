#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>

#include <json.hpp>

#include "handshake/protocol.hpp"

namespace handshake {

class UnknownSession : public Error {
 public:
  using Error::Error;
};
class InvalidSelection : public Error {
 public:
  using Error::Error;
};
class DuplicatePost : public Error {
 public:
  using Error::Error;
};
class TooManySessions : public Error {
 public:
  using Error::Error;
};
class SessionExists : public Error {
 public:
  using Error::Error;
};
class SessionNotDone : public Error {
 public:
  using Error::Error;
};

inline constexpr int kPayloadSchemaVersion = 1;
inline constexpr int kPreviewDecimation = 10;  // 1 kHz logs -> 100 Hz previews

struct ServiceOptions {
  ExperimentConfig config;
  std::size_t max_sessions = 64;
  std::optional<std::filesystem::path> state_dir;  // snapshots; none = memory only
};

/// Transport-independent core of the interactive service. Every method
/// takes and returns JSON payloads; errors are thrown as typed exceptions.
class SessionService {
 public:
  explicit SessionService(ServiceOptions options);

  /// Body: {"seed"?, "label"?, "config"?: partial config}. Returns the state payload.
  nlohmann::json create_session(const nlohmann::json& body);
  nlohmann::json get_state(const std::string& id) const;
  nlohmann::json get_query(const std::string& id) const;
  /// Body: {"query_id": n, "selected": "left" | "right"}.
  nlohmann::json post_choice(const std::string& id, const nlohmann::json& body);
  /// Body: {"rating": "happy" | "neutral" | "displeased"}.
  nlohmann::json post_satisfaction(const std::string& id, const nlohmann::json& body);
  nlohmann::json get_belief(const std::string& id) const;
  /// Canonical report text; throws SessionNotDone before the last validation answer.
  std::string get_report(const std::string& id) const;

  std::size_t session_count() const;
  /// Seconds since the last accepted input of a session.
  double idle_seconds(const std::string& id) const;
  Stage stage(const std::string& id) const;

  /// Reloads snapshots from state_dir by replaying their recorded inputs.
  /// Returns the number of sessions restored.
  std::size_t restore();

 private:
  struct Entry {
    mutable std::shared_mutex mutex;
    std::unique_ptr<ProtocolSession> session;
    nlohmann::json config_overrides;
    std::vector<std::string> choices;
    std::optional<std::string> rating;
    std::chrono::steady_clock::time_point last_activity;
  };

  std::shared_ptr<Entry> find(const std::string& id) const;
  nlohmann::json state_payload(const ProtocolSession& s) const;
  void persist(const Entry& e) const;

  ServiceOptions options_;
  mutable std::shared_mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  std::uint64_t next_seed_;
};

/// Downsampled world-vertical preview of a log, relative to the nominal foot height.
nlohmann::json preview_json(const HandshakeLog& log, const ExperimentConfig& config);

/// HTTP status for an exception thrown by SessionService, and its error name.
std::pair<int, std::string> http_status_for(const std::exception& e);

struct ServerSettings {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string cors_origin = "*";
};

/// Reads HANDSHAKE_BIND ("host:port") and HANDSHAKE_CORS_ORIGIN.
ServerSettings server_settings_from_env();

/// Blocking HTTP server over `service`. `ready` is called once listening,
/// `stop` is polled and ends the server when it returns true.
void serve_http(SessionService& service, const ServerSettings& settings,
                const std::function<void(int port)>& ready = {},
                const std::function<bool()>& stop = {});

}  // namespace handshake
