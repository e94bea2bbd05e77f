#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "tshoot/json_io.hpp"
#include "tshoot/planner.hpp"

namespace tshoot {

inline constexpr std::string_view kSessionFormat = "tshoot-session/1";

enum class SessionStatus { active, resolved, exhausted };
const char* to_string(SessionStatus s);

enum class EventKind { observed, repaired, configured, device_check };
const char* to_string(EventKind k);

/// Something the operator did or saw. `configured` with reset=false sets a
/// configuration and opens an experiment: later observations and device
/// checks belong to that setting until a `configured` event with reset=true
/// puts it back.
struct SessionEvent {
  EventKind kind = EventKind::observed;
  std::string node;
  std::string state;
  bool reset = false;
  bool normal = false;
  // Filled in by the session.
  std::uint64_t sequence = 0;
  std::string timestamp;
  Json recommendation;  // snapshot after the event; null once inactive
};

// Request and log encoding. Throws parse_error on a malformed event.
Json event_json(const SessionEvent& e, bool with_snapshot = true);
SessionEvent event_from_json(const Json& j);

/// Model validation failure with the full violation list.
class InvalidModel : public Error {
 public:
  explicit InvalidModel(std::vector<Violation> violations);
  const std::vector<Violation>& violations() const { return violations_; }

 private:
  std::vector<Violation> violations_;
};

using Clock = std::function<std::string()>;
std::string utc_timestamp();
std::string random_session_id();

struct SessionOptions {
  bool use_config = true;
  bool single_copy = false;
};

class Session {
 public:
  // `net` must be in planning form (see prepare_network).
  Session(std::string id, std::shared_ptr<const Network> net, SessionOptions options = {},
          Clock clock = utc_timestamp);

  const std::string& id() const { return id_; }
  const Network& network() const { return *net_; }
  const SessionOptions& options() const { return options_; }
  SessionStatus status() const { return status_; }
  std::uint64_t sequence() const { return events_.size(); }
  const InformationState& information() const { return info_; }
  const std::optional<Recommendation>& recommendation() const { return rec_; }
  const std::vector<SessionEvent>& history() const { return events_; }
  std::optional<std::pair<VarId, StateIndex>> open_experiment() const;

  // Validates and applies the event, then recomputes the recommendation.
  // On error the session is unchanged.
  const SessionEvent& apply(SessionEvent event);

  Json recommendation_json() const;  // null when not active
  Json summary() const;

 private:
  void refresh();

  std::string id_;
  std::shared_ptr<const Network> net_;
  SessionOptions options_;
  Clock clock_;
  InformationState info_;
  bool experiment_open_ = false;
  SessionStatus status_ = SessionStatus::active;
  std::optional<Recommendation> rec_;
  std::vector<SessionEvent> events_;
};

/// Where a session's network came from: a bundled model id or an inline
/// document.
struct NetworkRef {
  std::string id;
  Json document;  // null for bundled models
};

// Loads bundled models by id from a directory, caching parsed networks.
class ModelLibrary {
 public:
  explicit ModelLibrary(std::filesystem::path dir) : dir_(std::move(dir)) {}
  // Throws not_found for unknown ids, InvalidModel for invalid documents.
  std::shared_ptr<const Network> get(const std::string& id);
  std::shared_ptr<const Network> resolve(const NetworkRef& ref);
  std::vector<std::string> ids() const;
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  std::mutex mutex_;
  std::map<std::string, std::shared_ptr<const Network>> cache_;
};

// Validates and expands a network, throwing InvalidModel with violations.
std::shared_ptr<const Network> planning_network(const Network& raw);

/// Header line plus one line per event.
void write_log_header(std::ostream& out, const Session& s, const NetworkRef& ref,
                      const std::string& created);
void write_log_event(std::ostream& out, const SessionEvent& e);

struct ReplayedLog {
  NetworkRef ref;
  std::unique_ptr<Session> session;
  Json recorded;  // last recorded recommendation snapshot
};

// Rebuilds a session from its log by re-applying every event.
ReplayedLog replay_log(std::istream& in, ModelLibrary& models, Clock clock = utc_timestamp);

/// Thread-safe session registry. Events within one session are serialized;
/// a request whose expected sequence is stale is rejected with conflict.
class SessionStore {
 public:
  SessionStore(ModelLibrary& models, std::optional<std::filesystem::path> log_dir = {},
               Clock clock = utc_timestamp);

  // body: {"network": id} or {"document": {...}}, optional "options".
  Json create(const Json& body);
  Json summary(const std::string& id);
  Json recommendation(const std::string& id);
  Json history(const std::string& id);
  // body: {"expected_sequence": n, "event": {...}}
  Json apply(const std::string& id, const Json& body);
  Json networks() const;
  // Replays every log in the log directory; returns how many were loaded.
  std::size_t load_logs();

 private:
  struct Entry {
    std::mutex mutex;
    NetworkRef ref;
    std::unique_ptr<Session> session;
  };
  std::shared_ptr<Entry> find(const std::string& id);
  void append(const Entry& e, const std::function<void(std::ostream&)>& write);

  ModelLibrary& models_;
  std::optional<std::filesystem::path> log_dir_;
  Clock clock_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
};

}  // namespace tshoot
