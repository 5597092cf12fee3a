#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>

#include "gecor/dialogue_model.hpp"
#include "json.hpp"

namespace httplib {
class Server;
}

namespace gecor {

using Clock = std::chrono::steady_clock;

struct Session {
  DialogueState state;
  nlohmann::json history = nlohmann::json::array();
  Clock::time_point created;
  Clock::time_point last_used;
  std::mutex mutex;  // serializes turns within the session
};

// Session id → state. Lookups take the store lock briefly; work on one
// session holds only that session's lock, so sessions proceed in parallel.
class SessionStore {
 public:
  explicit SessionStore(std::chrono::seconds idle_timeout = std::chrono::minutes(30));

  std::string create();
  // Runs `f` with the session locked; false when the id is unknown.
  bool with_session(const std::string& id, const std::function<void(Session&)>& f);
  bool erase(const std::string& id);
  std::size_t purge_expired(Clock::time_point now = Clock::now());
  std::size_t size() const;

 private:
  std::chrono::seconds idle_timeout_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::mt19937_64 rng_;
};

struct ServiceConfig {
  std::filesystem::path static_dir;  // served at / when it exists
  std::chrono::seconds idle_timeout = std::chrono::minutes(30);
};

// JSON API over run_turn:
//   POST   /session                → {"session_id"}
//   POST   /session/{id}/turn      {"utterance"} → turn object
//   GET    /session/{id}/history   → {"session_id", "turns": [...]}
//   DELETE /session/{id}
//   GET    /health
class DialogueService {
 public:
  DialogueService(const DialogueModel& model, KnowledgeBase kb, ServiceConfig config = {});

  void install(httplib::Server& server);
  SessionStore& sessions() { return store_; }

  // The turn object: resolved_utterance, bspan{informable, requestable},
  // kb_match_count, kb_top_match, response, turn_index.
  nlohmann::json turn_json(const TurnResult& r) const;

 private:
  const DialogueModel& model_;
  KnowledgeBase kb_;
  ServiceConfig config_;
  SessionStore store_;
  std::atomic<std::uint64_t> diagnostics_{0};
};

nlohmann::json record_json(const KBRecord& r);

}  // namespace gecor
