#include "tshoot/session.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <random>
#include <regex>
#include <sstream>

#include "tshoot/network_io.hpp"

namespace tshoot {

const char* to_string(SessionStatus s) {
  switch (s) {
    case SessionStatus::active: return "active";
    case SessionStatus::resolved: return "resolved";
    case SessionStatus::exhausted: return "exhausted";
  }
  return "active";
}

const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::observed: return "observed";
    case EventKind::repaired: return "repaired";
    case EventKind::configured: return "configured";
    case EventKind::device_check: return "device_check";
  }
  return "observed";
}

Json event_json(const SessionEvent& e, bool with_snapshot) {
  Json j{{"kind", to_string(e.kind)}};
  switch (e.kind) {
    case EventKind::observed:
      j["node"] = e.node;
      j["state"] = e.state;
      break;
    case EventKind::repaired:
      j["node"] = e.node;
      break;
    case EventKind::configured:
      j["node"] = e.node;
      j["state"] = e.state;
      j["reset"] = e.reset;
      break;
    case EventKind::device_check:
      j["normal"] = e.normal;
      break;
  }
  if (with_snapshot) {
    j["sequence"] = e.sequence;
    j["timestamp"] = e.timestamp;
    j["recommendation"] = e.recommendation;
  }
  return j;
}

SessionEvent event_from_json(const Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::parse_error, "event must be an object");
  auto text = [&](const char* key) {
    if (!j.contains(key) || !j[key].is_string())
      throw Error(ErrorCode::parse_error, std::string("event needs a string '") + key + "'");
    return j[key].get<std::string>();
  };
  SessionEvent e;
  const std::string kind = text("kind");
  if (kind == "observed") {
    e.kind = EventKind::observed;
    e.node = text("node");
    e.state = text("state");
  } else if (kind == "repaired") {
    e.kind = EventKind::repaired;
    e.node = text("node");
  } else if (kind == "configured") {
    e.kind = EventKind::configured;
    e.node = text("node");
    e.state = text("state");
    if (j.contains("reset")) {
      if (!j["reset"].is_boolean()) throw Error(ErrorCode::parse_error, "'reset' must be boolean");
      e.reset = j["reset"].get<bool>();
    }
  } else if (kind == "device_check") {
    e.kind = EventKind::device_check;
    if (!j.contains("normal") || !j["normal"].is_boolean())
      throw Error(ErrorCode::parse_error, "device_check needs a boolean 'normal'");
    e.normal = j["normal"].get<bool>();
  } else {
    throw Error(ErrorCode::parse_error, "unknown event kind '" + kind + "'");
  }
  if (j.contains("sequence") && j["sequence"].is_number_unsigned())
    e.sequence = j["sequence"].get<std::uint64_t>();
  if (j.contains("timestamp") && j["timestamp"].is_string())
    e.timestamp = j["timestamp"].get<std::string>();
  if (j.contains("recommendation")) e.recommendation = j["recommendation"];
  return e;
}

InvalidModel::InvalidModel(std::vector<Violation> violations)
    : Error(ErrorCode::invalid_model,
            std::to_string(violations.size()) + " validation problem(s)" +
                (violations.empty() ? std::string()
                                    : ", first: [" + violations.front().node + "] " +
                                          violations.front().message)),
      violations_(std::move(violations)) {}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

std::string random_session_id() {
  std::random_device rd;
  std::ostringstream s;
  s << std::hex << std::setfill('0');
  for (int i = 0; i < 4; ++i) s << std::setw(8) << static_cast<std::uint32_t>(rd());
  return s.str();
}

std::shared_ptr<const Network> planning_network(const Network& raw) {
  auto problems = validate(raw);
  if (!problems.empty()) throw InvalidModel(std::move(problems));
  return std::make_shared<const Network>(prepare_network(raw));
}

Session::Session(std::string id, std::shared_ptr<const Network> net, SessionOptions options,
                 Clock clock)
    : id_(std::move(id)),
      net_(std::move(net)),
      options_(options),
      clock_(std::move(clock)),
      info_(initial_information(*net_)) {
  refresh();
}

std::optional<std::pair<VarId, StateIndex>> Session::open_experiment() const {
  if (!experiment_open_) return std::nullopt;
  const auto& e = info_.experiments.back();
  return std::pair{e.config, e.state};
}

void Session::refresh() {
  rec_.reset();
  if (status_ != SessionStatus::active) return;
  RecommendOptions opts;
  opts.use_config = options_.use_config;
  opts.use_single_copy = options_.single_copy;
  try {
    rec_ = recommend_next(*net_, info_, opts);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::model_exhausted) throw;
    status_ = SessionStatus::exhausted;
  }
}

namespace {

void put_observation(Evidence& ev, const Network& net, VarId v, StateIndex s,
                     const char* where) {
  auto [it, inserted] = ev.emplace(v, s);
  if (!inserted && it->second != s)
    throw Error(ErrorCode::contradiction,
                net.id(v) + " was already observed " + net.variable(v).space.states[it->second] +
                    where);
}

void check_consistent(const Network& net, const InformationState& info) {
  double p = 0.0;
  try {
    const World world(net, info);
    p = probability_of_evidence(world.network(), world.evidence());
  } catch (const Error& e) {
    if (e.code() != ErrorCode::impossible_evidence) throw;
  }
  if (!(p > kImpossibleEvidence))
    throw Error(ErrorCode::contradiction,
                "the model gives this outcome probability zero given the earlier evidence");
}

bool persisted(const Network& net, VarId v) {
  const auto kind = net.role(v).kind;
  return kind == RoleKind::component || kind == RoleKind::configuration;
}

}  // namespace

const SessionEvent& Session::apply(SessionEvent event) {
  const Network& net = *net_;
  const VarId pd = net.problem_defining();
  // An exhausted model can still be told the device works again.
  const bool resolving =
      !experiment_open_ &&
      ((event.kind == EventKind::device_check && event.normal) ||
       (event.kind == EventKind::observed && event.node == net.id(pd) &&
        event.state == net.variable(pd).space.states[*net.variable(pd).space.normal]));
  if (status_ != SessionStatus::active && !(status_ == SessionStatus::exhausted && resolving))
    throw Error(ErrorCode::not_active, std::string("session is ") + to_string(status_));
  InformationState next = info_;
  bool open = experiment_open_;
  SessionStatus status = status_;

  auto in_experiment = [&](VarId v, StateIndex s) {
    auto& exp = next.experiments.back();
    if (v == exp.config) {
      if (s != exp.state)
        throw Error(ErrorCode::contradiction,
                    net.id(v) + " is set to " + net.variable(v).space.states[exp.state] +
                        " for the open experiment");
      return;
    }
    if (persisted(net, v)) {
      put_observation(next.evidence, net, v, s, "");
      return;
    }
    put_observation(exp.observations, net, v, s, " in this setting");
  };

  switch (event.kind) {
    case EventKind::observed: {
      const VarId v = net.index(event.node);
      const StateIndex s = net.state_index(v, event.state);
      if (open) {
        in_experiment(v, s);
      } else if (v == pd && s == net.variable(pd).space.normal) {
        status = SessionStatus::resolved;
      } else {
        const bool refresh_pd = v == pd;
        if (refresh_pd) next.evidence[pd] = s;
        else put_observation(next.evidence, net, v, s, "");
      }
      break;
    }
    case EventKind::repaired: {
      const VarId c = net.index(event.node);
      if (open)
        throw Error(ErrorCode::conflict, "reset " + net.id(next.experiments.back().config) +
                                             " before repairing");
      if (net.role(c).kind != RoleKind::component)
        throw Error(ErrorCode::invalid_argument, "'" + event.node + "' is not a component");
      if (net.role(c).leak)
        throw Error(ErrorCode::invalid_argument,
                    "'" + event.node + "' stands for unmodeled causes; use the service call");
      record_repair(next, net, c);
      break;
    }
    case EventKind::configured: {
      const VarId c = net.index(event.node);
      if (net.role(c).kind != RoleKind::configuration)
        throw Error(ErrorCode::invalid_argument, "'" + event.node + "' is not a configuration");
      const StateIndex s = net.state_index(c, event.state);
      const auto current = current_setting(next, c);
      if (!event.reset) {
        if (open) throw Error(ErrorCode::conflict, "an experiment is already open");
        if (current == s)
          throw Error(ErrorCode::invalid_argument, "'" + event.node + "' is already in that state");
        if (!current)
          throw Error(ErrorCode::invalid_argument,
                      "'" + event.node + "' has no known setting to return to");
        next.experiments.push_back({c, s, {}});
        open = true;
      } else {
        if (!open || next.experiments.back().config != c)
          throw Error(ErrorCode::conflict, "no open experiment on '" + event.node + "'");
        if (current != s)
          throw Error(ErrorCode::contradiction,
                      "'" + event.node + "' must be reset to its original setting " +
                          net.variable(c).space.states[*current]);
        if (next.experiments.back().observations.empty()) next.experiments.pop_back();
        open = false;
      }
      break;
    }
    case EventKind::device_check: {
      const StateIndex s =
          event.normal ? *net.variable(pd).space.normal : abnormal_state(net, pd);
      if (open) in_experiment(pd, s);
      else if (event.normal) status = SessionStatus::resolved;
      else next.evidence[pd] = s;
      break;
    }
  }
  // A repair is an action, not an outcome, so it cannot contradict anything.
  if (status == SessionStatus::active && event.kind != EventKind::repaired)
    check_consistent(net, next);

  // Commit; the recommendation is recomputed below and cannot fail on
  // evidence the check above accepted.
  const InformationState saved_info = info_;
  const bool saved_open = experiment_open_;
  info_ = std::move(next);
  experiment_open_ = open;
  status_ = status;
  try {
    refresh();
  } catch (...) {
    info_ = saved_info;
    experiment_open_ = saved_open;
    status_ = SessionStatus::active;
    refresh();
    throw;
  }
  event.sequence = events_.size() + 1;
  event.timestamp = clock_();
  event.recommendation = recommendation_json();
  events_.push_back(std::move(event));
  return events_.back();
}

Json Session::recommendation_json() const {
  if (!rec_) return nullptr;
  return tshoot::recommendation_json(*net_, *rec_);
}

Json Session::summary() const {
  Json s{{"id", id_},
         {"network", net_->name()},
         {"status", to_string(status_)},
         {"sequence", sequence()},
         {"information", information_json(*net_, info_)},
         {"options", {{"use_config", options_.use_config}, {"single_copy", options_.single_copy}}}};
  if (auto e = open_experiment())
    s["open_experiment"] = {{"config", net_->id(e->first)},
                            {"state", net_->variable(e->first).space.states[e->second]}};
  else
    s["open_experiment"] = nullptr;
  s["recommendation"] = recommendation_json();
  return s;
}

std::shared_ptr<const Network> ModelLibrary::get(const std::string& id) {
  static const std::regex safe("[A-Za-z0-9_-]+");
  if (!std::regex_match(id, safe)) throw Error(ErrorCode::not_found, "no model '" + id + "'");
  std::lock_guard lock(mutex_);
  if (auto it = cache_.find(id); it != cache_.end()) return it->second;
  const auto path = dir_ / (id + ".net");
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::not_found, "no model '" + id + "'");
  auto net = planning_network(load_network(path));
  cache_[id] = net;
  return net;
}

std::shared_ptr<const Network> ModelLibrary::resolve(const NetworkRef& ref) {
  if (ref.document.is_null()) return get(ref.id);
  return planning_network(parse_network(ref.document.dump()));
}

std::vector<std::string> ModelLibrary::ids() const {
  std::vector<std::string> out;
  if (!std::filesystem::is_directory(dir_)) return out;
  for (const auto& entry : std::filesystem::directory_iterator(dir_))
    if (entry.path().extension() == ".net") out.push_back(entry.path().stem().string());
  std::sort(out.begin(), out.end());
  return out;
}

void write_log_header(std::ostream& out, const Session& s, const NetworkRef& ref,
                      const std::string& created) {
  Json h{{"type", "session"},
         {"format", kSessionFormat},
         {"id", s.id()},
         {"network", ref.document.is_null() ? Json(ref.id) : Json(nullptr)},
         {"document", ref.document},
         {"options",
          {{"use_config", s.options().use_config}, {"single_copy", s.options().single_copy}}},
         {"created", created},
         {"recommendation", s.recommendation_json()}};
  out << h.dump() << '\n';
}

void write_log_event(std::ostream& out, const SessionEvent& e) {
  Json j = event_json(e);
  j["type"] = "event";
  out << j.dump() << '\n';
}

namespace {

SessionOptions options_from_json(const Json& j) {
  SessionOptions o;
  if (j.is_null()) return o;
  if (!j.is_object()) throw Error(ErrorCode::parse_error, "'options' must be an object");
  if (j.contains("use_config")) o.use_config = j["use_config"].get<bool>();
  if (j.contains("single_copy")) o.single_copy = j["single_copy"].get<bool>();
  return o;
}

Json parse_line(const std::string& line, std::size_t number) {
  try {
    return Json::parse(line);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::parse_error,
                "log line " + std::to_string(number) + ": " + std::string(e.what()));
  }
}

}  // namespace

ReplayedLog replay_log(std::istream& in, ModelLibrary& models, Clock clock) {
  ReplayedLog out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    const Json j = parse_line(line, number);
    const std::string type = j.value("type", "");
    if (type == "session") {
      if (j.value("format", "") != kSessionFormat)
        throw Error(ErrorCode::parse_error, "unsupported session log format");
      if (!j["document"].is_null()) out.ref.document = j["document"];
      else out.ref.id = j.at("network").get<std::string>();
      out.session = std::make_unique<Session>(j.at("id").get<std::string>(),
                                              models.resolve(out.ref),
                                              options_from_json(j.value("options", Json())),
                                              clock);
      out.recorded = j.value("recommendation", Json());
    } else if (type == "event") {
      if (!out.session) throw Error(ErrorCode::parse_error, "event before session header");
      SessionEvent e = event_from_json(j);
      out.recorded = e.recommendation;
      out.session->apply(std::move(e));
    } else {
      throw Error(ErrorCode::parse_error, "log line " + std::to_string(number) + ": unknown type");
    }
  }
  if (!out.session) throw Error(ErrorCode::parse_error, "empty session log");
  return out;
}

SessionStore::SessionStore(ModelLibrary& models, std::optional<std::filesystem::path> log_dir,
                           Clock clock)
    : models_(models), log_dir_(std::move(log_dir)), clock_(std::move(clock)) {
  if (log_dir_) std::filesystem::create_directories(*log_dir_);
}

void SessionStore::append(const Entry& e, const std::function<void(std::ostream&)>& write) {
  if (!log_dir_) return;
  std::ofstream f(*log_dir_ / (e.session->id() + ".jsonl"), std::ios::app);
  if (!f) throw Error(ErrorCode::io_error, "cannot write session log");
  write(f);
  if (!f) throw Error(ErrorCode::io_error, "cannot write session log");
}

Json SessionStore::create(const Json& body) {
  if (!body.is_object()) throw Error(ErrorCode::parse_error, "body must be an object");
  auto entry = std::make_shared<Entry>();
  if (body.contains("document")) {
    if (!body["document"].is_object())
      throw Error(ErrorCode::parse_error, "'document' must be an object");
    entry->ref.document = body["document"];
  } else if (body.contains("network") && body["network"].is_string()) {
    entry->ref.id = body["network"].get<std::string>();
  } else {
    throw Error(ErrorCode::parse_error, "give a 'network' id or an inline 'document'");
  }
  const auto options = options_from_json(body.value("options", Json()));
  auto net = models_.resolve(entry->ref);
  std::lock_guard lock(mutex_);
  std::string id;
  do id = random_session_id();
  while (sessions_.contains(id));
  entry->session = std::make_unique<Session>(id, std::move(net), options, clock_);
  append(*entry, [&](std::ostream& o) { write_log_header(o, *entry->session, entry->ref, clock_()); });
  sessions_[id] = entry;
  return entry->session->summary();
}

std::shared_ptr<SessionStore::Entry> SessionStore::find(const std::string& id) {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw Error(ErrorCode::not_found, "no session '" + id + "'");
  return it->second;
}

Json SessionStore::summary(const std::string& id) {
  auto e = find(id);
  std::lock_guard lock(e->mutex);
  return e->session->summary();
}

Json SessionStore::recommendation(const std::string& id) {
  auto e = find(id);
  std::lock_guard lock(e->mutex);
  const Session& s = *e->session;
  if (s.status() != SessionStatus::active)
    throw Error(ErrorCode::not_active, std::string("session is ") + to_string(s.status()));
  Json r = s.recommendation_json();
  r["session"] = s.id();
  r["sequence"] = s.sequence();
  return r;
}

Json SessionStore::history(const std::string& id) {
  auto e = find(id);
  std::lock_guard lock(e->mutex);
  Json events = Json::array();
  for (const auto& ev : e->session->history()) events.push_back(event_json(ev));
  return {{"session", id}, {"events", std::move(events)}};
}

Json SessionStore::apply(const std::string& id, const Json& body) {
  if (!body.is_object() || !body.contains("event"))
    throw Error(ErrorCode::parse_error, "body needs an 'event'");
  if (!body.contains("expected_sequence") || !body["expected_sequence"].is_number_integer() ||
      body["expected_sequence"].get<std::int64_t>() < 0)
    throw Error(ErrorCode::parse_error, "body needs a non-negative 'expected_sequence'");
  SessionEvent ev = event_from_json(body["event"]);
  ev.recommendation = nullptr;
  auto e = find(id);
  std::lock_guard lock(e->mutex);
  Session& s = *e->session;
  const auto expected = body["expected_sequence"].get<std::uint64_t>();
  if (expected != s.sequence())
    throw Error(ErrorCode::conflict, "expected sequence " + std::to_string(expected) +
                                         " but the session is at " + std::to_string(s.sequence()));
  const SessionEvent& applied = s.apply(std::move(ev));
  append(*e, [&](std::ostream& o) { write_log_event(o, applied); });
  return s.summary();
}

Json SessionStore::networks() const {
  Json out = Json::array();
  for (const auto& id : models_.ids()) out.push_back(id);
  return out;
}

std::size_t SessionStore::load_logs() {
  if (!log_dir_) return 0;
  std::size_t n = 0;
  for (const auto& file : std::filesystem::directory_iterator(*log_dir_)) {
    if (file.path().extension() != ".jsonl") continue;
    std::ifstream in(file.path());
    auto replayed = replay_log(in, models_, clock_);
    auto entry = std::make_shared<Entry>();
    entry->ref = std::move(replayed.ref);
    entry->session = std::move(replayed.session);
    std::lock_guard lock(mutex_);
    sessions_[entry->session->id()] = entry;
    ++n;
  }
  return n;
}

}  // namespace tshoot
