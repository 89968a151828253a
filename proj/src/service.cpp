#include "handshake/service.hpp"

#include <fstream>
#include <mutex>

namespace handshake {

using nlohmann::json;

namespace {

constexpr std::string_view kSnapshotSuffix = ".session.json";

ExperimentConfig session_config(const ExperimentConfig& base, const json& overrides) {
  if (overrides.is_null()) return base;
  if (!overrides.is_object()) throw ConfigInvalid("config overrides must be an object");
  json merged = config_to_json(base);
  merged.merge_patch(overrides);
  return config_from_json(merged);
}

json side_payload(const HandshakeParams& params, const HandshakeLog& log, const ExperimentConfig& config) {
  return {{"params", params_json(params)}, {"preview", preview_json(log, config)}};
}

}  // namespace

json preview_json(const HandshakeLog& log, const ExperimentConfig& config) {
  const double ref = world_up_in_leg(log.pitch_rad).dot(config.sim.nominal.vec());
  const auto desired = world_vertical(log.desired_path, log.pitch_rad);
  const auto actual = world_vertical(log.actual_path, log.pitch_rad);
  json t = json::array();
  json d = json::array();
  json a = json::array();
  for (std::size_t i = 0; i < log.size(); i += kPreviewDecimation) {
    t.push_back(static_cast<double>(i) * log.dt);
    d.push_back(desired[i] - ref);
    a.push_back(actual[i] - ref);
  }
  return {{"dt", log.dt * kPreviewDecimation}, {"t", t}, {"desired_z", d}, {"actual_z", a}};
}

SessionService::SessionService(ServiceOptions options)
    : options_(std::move(options)), next_seed_(options_.config.seed) {
  validate(options_.config);
  if (options_.state_dir) {
    std::error_code ec;
    std::filesystem::create_directories(*options_.state_dir, ec);
    if (ec) throw IoError("cannot create state directory: " + ec.message());
  }
}

std::shared_ptr<SessionService::Entry> SessionService::find(const std::string& id) const {
  std::shared_lock lock(sessions_mutex_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw UnknownSession("unknown session '" + id + "'");
  return it->second;
}

json SessionService::state_payload(const ProtocolSession& s) const {
  const auto& r = s.report();
  json j = {{"schema_version", kPayloadSchemaVersion},
            {"session_id", r.session_id},
            {"label", r.label},
            {"seed", r.seed},
            {"stage", to_string(s.stage())},
            {"trial", s.trial()},
            {"training_done", r.training.size()},
            {"validation_done", r.validation.size()},
            {"pending_query_id", s.pending() ? json(s.pending()->sequence) : json(nullptr)},
            {"satisfaction", to_string(r.satisfaction)}};
  if (s.stage() != Stage::Training) {
    j["optimized"] = {{"params", params_json(r.optimized)}};
    if (r.optimized_handshake >= 0 && r.optimized_handshake < static_cast<int>(s.logs().size())) {
      j["optimized"]["preview"] = preview_json(s.logs()[r.optimized_handshake], s.config());
    }
  }
  return j;
}

void SessionService::persist(const Entry& e) const {
  if (!options_.state_dir) return;
  const auto& r = e.session->report();
  json snap = {{"schema_version", kPayloadSchemaVersion},
               {"session_id", r.session_id},
               {"seed", r.seed},
               {"label", r.label},
               {"config", e.config_overrides},
               {"choices", e.choices},
               {"rating", e.rating ? json(*e.rating) : json(nullptr)}};
  const auto path = *options_.state_dir / (r.session_id + std::string(kSnapshotSuffix));
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write snapshot " + tmp);
    out << snap.dump(2) << "\n";
  }
  std::filesystem::rename(tmp, path);
}

json SessionService::create_session(const json& body) {
  if (!body.is_null() && !body.is_object()) throw InvalidArgument("request body must be an object");
  if (body.is_object()) {
    for (const auto& [key, value] : body.items()) {
      if (key != "seed" && key != "label" && key != "config") {
        throw InvalidArgument("unknown field '" + key + "'");
      }
    }
  }
  const json empty = json::object();
  const json& fields = body.is_object() ? body : empty;
  const json overrides = fields.value("config", json(nullptr));
  const ExperimentConfig config = session_config(options_.config, overrides);
  if (fields.contains("label") && !fields.at("label").is_string()) {
    throw InvalidArgument("label must be a string");
  }
  const std::string label = fields.value("label", std::string());

  std::unique_lock lock(sessions_mutex_);
  if (sessions_.size() >= options_.max_sessions) {
    throw TooManySessions("session limit of " + std::to_string(options_.max_sessions) + " reached");
  }
  std::uint64_t seed = 0;
  if (fields.contains("seed")) {
    const auto& js = fields.at("seed");
    if (!js.is_number_unsigned() && !(js.is_number_integer() && js.get<std::int64_t>() >= 0)) throw InvalidArgument("seed must be a non-negative integer");
    seed = fields.at("seed").get<std::uint64_t>();
    if (sessions_.contains(session_id_for_seed(seed))) {
      throw SessionExists("a session with seed " + std::to_string(seed) + " already exists");
    }
  } else {
    while (sessions_.contains(session_id_for_seed(next_seed_))) ++next_seed_;
    seed = next_seed_++;
  }

  auto entry = std::make_shared<Entry>();
  entry->session = std::make_unique<ProtocolSession>(config, seed, label, config.neutral_hand);
  entry->config_overrides = overrides;
  entry->last_activity = std::chrono::steady_clock::now();
  const std::string id = entry->session->report().session_id;
  sessions_[id] = entry;
  lock.unlock();

  std::unique_lock elock(entry->mutex);
  persist(*entry);
  return state_payload(*entry->session);
}

json SessionService::get_state(const std::string& id) const {
  const auto e = find(id);
  std::shared_lock lock(e->mutex);
  return state_payload(*e->session);
}

json SessionService::get_query(const std::string& id) const {
  const auto e = find(id);
  std::shared_lock lock(e->mutex);
  const ProtocolSession& s = *e->session;
  const auto& p = s.pending();
  if (!p) throw NoPendingQuery("no query is pending in stage " + std::string(to_string(s.stage())));
  return {{"schema_version", kPayloadSchemaVersion},
          {"session_id", s.report().session_id},
          {"query_id", p->sequence},
          {"stage", to_string(s.stage())},
          {"trial", s.trial()},
          {"left", side_payload(p->query.left, s.logs()[p->left_handshake], s.config())},
          {"right", side_payload(p->query.right, s.logs()[p->right_handshake], s.config())}};
}

json SessionService::post_choice(const std::string& id, const json& body) {
  const auto e = find(id);
  std::unique_lock lock(e->mutex);
  ProtocolSession& s = *e->session;
  if (!body.is_object() || !body.contains("query_id") || !body.at("query_id").is_number_integer()) {
    throw InvalidArgument("body needs an integer query_id");
  }
  const int query_id = body.at("query_id").get<int>();
  const auto& p = s.pending();
  if (!p || query_id < p->sequence) {
    if (query_id >= 1 && query_id <= static_cast<int>(e->choices.size())) {
      throw DuplicatePost("a choice for query " + std::to_string(query_id) + " is already recorded");
    }
    if (!p) throw NoPendingQuery("no query is pending");
  }
  if (query_id != p->sequence) {
    throw InvalidArgument("query_id " + std::to_string(query_id) + " is not the pending query");
  }
  Side side;
  try {
    side = side_from_string(body.value("selected", std::string()));
  } catch (const InvalidArgument&) {
    throw InvalidSelection("selected must be 'left' or 'right'");
  }
  s.choose(side);
  e->choices.emplace_back(to_string(side));
  e->last_activity = std::chrono::steady_clock::now();
  persist(*e);
  return state_payload(s);
}

json SessionService::post_satisfaction(const std::string& id, const json& body) {
  const auto e = find(id);
  std::unique_lock lock(e->mutex);
  ProtocolSession& s = *e->session;
  if (!body.is_object() || !body.contains("rating") || !body.at("rating").is_string()) {
    throw UnknownRating("body needs a rating string");
  }
  const auto text = body.at("rating").get<std::string>();
  const Satisfaction rating = satisfaction_from_string(text);
  if (rating == Satisfaction::NotApplicable) throw UnknownRating("rating must be happy, neutral or displeased");
  s.rate(rating);
  e->rating = text;
  e->last_activity = std::chrono::steady_clock::now();
  persist(*e);
  return state_payload(s);
}

json SessionService::get_belief(const std::string& id) const {
  const auto e = find(id);
  std::shared_lock lock(e->mutex);
  const ProtocolSession& s = *e->session;
  const Belief& b = s.learner().belief();
  json samples = json::array();
  for (const auto& w : b.samples) samples.push_back({w[0], w[1], w[2]});
  const Vec3 mean = b.mean();
  const Vec3 sd = b.stddev();
  return {{"schema_version", kPayloadSchemaVersion},
          {"session_id", s.report().session_id},
          {"trial", s.learner().choices().size()},
          {"trace", belief_trace_json(s.report().belief_trace)},
          {"mean", {mean[0], mean[1], mean[2]}},
          {"std", {sd[0], sd[1], sd[2]}},
          {"samples", samples}};
}

std::string SessionService::get_report(const std::string& id) const {
  const auto e = find(id);
  std::shared_lock lock(e->mutex);
  if (e->session->stage() != Stage::Done) throw SessionNotDone("the session is not finished");
  return canonical_json(e->session->report());
}

std::size_t SessionService::session_count() const {
  std::shared_lock lock(sessions_mutex_);
  return sessions_.size();
}

double SessionService::idle_seconds(const std::string& id) const {
  const auto e = find(id);
  std::shared_lock lock(e->mutex);
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - e->last_activity).count();
}

Stage SessionService::stage(const std::string& id) const {
  const auto e = find(id);
  std::shared_lock lock(e->mutex);
  return e->session->stage();
}

std::size_t SessionService::restore() {
  if (!options_.state_dir) return 0;
  std::size_t restored = 0;
  for (const auto& file : std::filesystem::directory_iterator(*options_.state_dir)) {
    const auto name = file.path().filename().string();
    if (name.size() <= kSnapshotSuffix.size() ||
        name.compare(name.size() - kSnapshotSuffix.size(), kSnapshotSuffix.size(), kSnapshotSuffix) != 0) {
      continue;
    }
    std::ifstream in(file.path(), std::ios::binary);
    json snap;
    try {
      snap = json::parse(in);
    } catch (const json::parse_error& e) {
      throw IoError("corrupt snapshot " + name + ": " + e.what());
    }
    auto entry = std::make_shared<Entry>();
    entry->config_overrides = snap.at("config");
    const ExperimentConfig config = session_config(options_.config, entry->config_overrides);
    const auto seed = snap.at("seed").get<std::uint64_t>();
    entry->session = std::make_unique<ProtocolSession>(config, seed, snap.at("label").get<std::string>(),
                                                       config.neutral_hand);
    const auto choices = snap.at("choices").get<std::vector<std::string>>();
    std::size_t next = 0;
    auto& s = *entry->session;
    while (s.stage() != Stage::Done) {
      if (s.stage() == Stage::OptimizedReveal) {
        if (snap.at("rating").is_null()) break;
        entry->rating = snap.at("rating").get<std::string>();
        s.rate(satisfaction_from_string(*entry->rating));
      } else {
        if (next >= choices.size()) break;
        s.choose(side_from_string(choices[next++]));
      }
    }
    entry->choices.assign(choices.begin(), choices.begin() + static_cast<std::ptrdiff_t>(next));
    entry->last_activity = std::chrono::steady_clock::now();
    std::unique_lock lock(sessions_mutex_);
    sessions_[s.report().session_id] = entry;
    if (seed >= next_seed_) next_seed_ = seed + 1;
    ++restored;
  }
  return restored;
}

std::pair<int, std::string> http_status_for(const std::exception& e) {
  if (dynamic_cast<const UnknownSession*>(&e)) return {404, "UnknownSession"};
  if (dynamic_cast<const NoPendingQuery*>(&e)) return {409, "NoPendingQuery"};
  if (dynamic_cast<const DuplicatePost*>(&e)) return {409, "DuplicatePost"};
  if (dynamic_cast<const WrongPhase*>(&e)) return {409, "WrongPhase"};
  if (dynamic_cast<const SessionExists*>(&e)) return {409, "SessionExists"};
  if (dynamic_cast<const SessionNotDone*>(&e)) return {409, "SessionNotDone"};
  if (dynamic_cast<const InvalidSelection*>(&e)) return {400, "InvalidSelection"};
  if (dynamic_cast<const UnknownRating*>(&e)) return {400, "UnknownRating"};
  if (dynamic_cast<const ConfigInvalid*>(&e)) return {400, "ConfigInvalid"};
  if (dynamic_cast<const InvalidArgument*>(&e)) return {400, "InvalidArgument"};
  if (dynamic_cast<const TooManySessions*>(&e)) return {429, "TooManySessions"};
  if (dynamic_cast<const json::exception*>(&e)) return {400, "BadRequest"};
  return {500, "InternalError"};
}

}  // namespace handshake
