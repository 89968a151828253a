// Command-line front end: oracle/replay/interactive sessions, batches,
// report re-export and the HTTP service.

#include <atomic>
#include <chrono>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "handshake/protocol.hpp"
#include "handshake/service.hpp"

namespace hs = handshake;
using nlohmann::json;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitBridgeTimeout = 3;

hs::ExperimentConfig load(const std::string& path) {
  return path.empty() ? hs::ExperimentConfig{} : hs::load_config(path);
}

hs::ExportFormat parse_format(const std::string& f) {
  if (f == "json") return hs::ExportFormat::Json;
  if (f == "csv") return hs::ExportFormat::Csv;
  return hs::ExportFormat::All;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw hs::IoError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw hs::IoError(path + " is not valid JSON: " + e.what());
  }
}

struct RunArgs {
  std::string config;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string oracle;
  bool interactive = false;
  std::string replay;
  std::string out = "out";
  std::string label;
  bool logs = false;
  std::string format = "all";
  double timeout_s = 600.0;
};

hs::SessionReport run_interactive(const hs::ExperimentConfig& config, const RunArgs& a, std::uint64_t seed) {
  hs::ServiceOptions opts;
  opts.config = config;
  opts.max_sessions = 1;
  hs::SessionService service(opts);
  const json state = service.create_session({{"seed", seed}, {"label", a.label}});
  const std::string id = state.at("session_id").get<std::string>();

  hs::ServerSettings settings = hs::server_settings_from_env();
  std::atomic<bool> timed_out{false};
  hs::serve_http(
      service, settings,
      [&](int port) {
        std::cout << "session " << id << " waiting at http://" << settings.host << ":" << port << "/sessions/"
                  << id << std::endl;
      },
      [&] {
        if (service.stage(id) == hs::Stage::Done) return true;
        if (service.idle_seconds(id) > a.timeout_s) {
          timed_out = true;
          return true;
        }
        return false;
      });
  if (timed_out) {
    throw hs::BridgeTimeout("no input for " + std::to_string(a.timeout_s) + " s");
  }
  return hs::report_from_json(json::parse(service.get_report(id)));
}

int cmd_run(const RunArgs& a) {
  const auto config = load(a.config);
  const std::uint64_t seed = a.seed_set ? a.seed : config.seed;
  std::vector<hs::HandshakeLog> logs;
  hs::SessionReport report;
  if (a.interactive) {
    report = run_interactive(config, a, seed);
  } else {
    hs::UserSource user;
    if (!a.replay.empty()) {
      user = hs::scripted_source(config, read_json_file(a.replay));
    } else {
      const std::string oracle = a.oracle.empty() ? config.default_oracle : a.oracle;
      user = hs::oracle_source(config, oracle, seed);
    }
    auto result = hs::run_session(config, seed, a.label, user, a.logs);
    report = std::move(result.report);
    logs = std::move(result.logs);
  }
  hs::export_report(report, a.out, parse_format(a.format), a.logs && !logs.empty() ? &logs : nullptr);
  std::cout << report.session_id << ": optimized a=" << report.optimized.amplitude_cm()
            << " cm f=" << report.optimized.frequency_hz << " Hz k=" << report.optimized.stiffness
            << ", validation wins ";
  int wins = 0;
  for (const auto& v : report.validation) wins += v.optimized_won();
  std::cout << wins << "/" << report.validation.size() << " -> " << a.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quadruped handshake preference-learning harness"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run one three-phase session");
  run_cmd->add_option("--config", run.config, "Config JSON file");
  auto* seed_opt = run_cmd->add_option("--seed", run.seed, "Session seed (default: config seed)");
  auto* oracle_opt = run_cmd->add_option("--oracle", run.oracle, "Oracle name from the config");
  auto* inter_opt = run_cmd->add_flag("--interactive", run.interactive, "Serve the session to a browser user");
  auto* replay_opt = run_cmd->add_option("--replay", run.replay, "Replay script {choices, satisfaction}");
  oracle_opt->excludes(inter_opt)->excludes(replay_opt);
  inter_opt->excludes(replay_opt);
  run_cmd->add_option("--out", run.out, "Output directory");
  run_cmd->add_option("--label", run.label, "Free-text session label");
  run_cmd->add_flag("--logs", run.logs, "Also write every handshake log");
  run_cmd->add_option("--format", run.format, "json, csv or all")->check(CLI::IsMember({"json", "csv", "all"}));
  run_cmd->add_option("--timeout", run.timeout_s, "Interactive idle timeout in seconds");

  std::string batch_config;
  int batch_n = 25;
  std::uint64_t batch_seed = 1;
  std::string batch_oracle;
  std::string batch_out = "batch";
  int batch_threads = -1;
  auto* batch_cmd = app.add_subcommand("batch", "Run many oracle sessions and summarize them");
  batch_cmd->add_option("--config", batch_config, "Config JSON file");
  batch_cmd->add_option("--n", batch_n, "Number of sessions")->check(CLI::PositiveNumber);
  batch_cmd->add_option("--seed", batch_seed, "Seed of the first session (others follow)");
  batch_cmd->add_option("--oracle", batch_oracle, "Oracle name from the config");
  batch_cmd->add_option("--out", batch_out, "Output directory");
  batch_cmd->add_option("--threads", batch_threads, "Worker threads (0 = all cores)");

  std::string report_in;
  std::string report_format = "json";
  std::string report_out;
  auto* report_cmd = app.add_subcommand("report", "Validate a report.json and re-export it");
  report_cmd->add_option("input", report_in, "report.json")->required();
  report_cmd->add_option("--format", report_format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
  report_cmd->add_option("--out", report_out, "Write files here instead of stdout");

  std::string serve_config;
  std::string state_dir;
  std::size_t max_sessions = 64;
  auto* serve_cmd = app.add_subcommand("serve", "HTTP service for interactive sessions (HANDSHAKE_BIND=host:port)");
  serve_cmd->add_option("--config", serve_config, "Config JSON file");
  serve_cmd->add_option("--state-dir", state_dir, "Persist session snapshots here");
  serve_cmd->add_option("--max-sessions", max_sessions, "Session cap");

  auto* config_cmd = app.add_subcommand("config", "Print the effective config as JSON");
  std::string config_in;
  config_cmd->add_option("--config", config_in, "Config JSON file to validate and expand");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*run_cmd) {
      run.seed_set = seed_opt->count() > 0;
      return cmd_run(run);
    }
    if (*batch_cmd) {
      auto config = load(batch_config);
      if (batch_threads >= 0) config.threads = batch_threads;
      const std::string oracle = batch_oracle.empty() ? config.default_oracle : batch_oracle;
      const auto batch = hs::run_batch(config, batch_n, batch_seed, oracle);
      hs::export_batch(batch, batch_out);
      std::cout << hs::batch_to_json(batch).dump(2) << "\n";
      return 0;
    }
    if (*report_cmd) {
      const auto report = hs::import_report(report_in);
      if (!report_out.empty()) {
        hs::export_report(report, report_out, parse_format(report_format));
      } else if (report_format == "json") {
        std::cout << hs::canonical_json(report);
      } else {
        std::cout << hs::metrics_csv({report});
      }
      return 0;
    }
    if (*serve_cmd) {
      hs::ServiceOptions opts;
      opts.config = load(serve_config);
      opts.max_sessions = max_sessions;
      if (!state_dir.empty()) opts.state_dir = state_dir;
      hs::SessionService service(opts);
      const auto restored = service.restore();
      const auto settings = hs::server_settings_from_env();
      hs::serve_http(service, settings, [&](int port) {
        std::cout << "listening on " << settings.host << ":" << port << " (" << restored
                  << " sessions restored)" << std::endl;
      });
      return 0;
    }
    if (*config_cmd) {
      std::cout << hs::config_to_json(load(config_in)).dump(2) << "\n";
      return 0;
    }
  } catch (const hs::ConfigInvalid& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const hs::BridgeTimeout& e) {
    std::cerr << "interactive user timed out: " << e.what() << "\n";
    return kExitBridgeTimeout;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return 0;
}
