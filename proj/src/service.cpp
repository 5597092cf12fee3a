#include "gecor/service.hpp"

#include <atomic>
#include <cstdio>
#include <iostream>
#include <random>

#include "httplib.h"

namespace gecor {

using json = nlohmann::json;

SessionStore::SessionStore(std::chrono::seconds idle_timeout)
    : idle_timeout_(idle_timeout), rng_(std::random_device{}()) {}

std::string SessionStore::create() {
  std::lock_guard lock(mutex_);
  std::string id;
  do {
    char buf[33];
    std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(rng_()),
                  static_cast<unsigned long long>(rng_()));
    id = buf;
  } while (sessions_.count(id));
  auto s = std::make_shared<Session>();
  s->state.session_id = id;
  s->created = s->last_used = Clock::now();
  sessions_.emplace(id, std::move(s));
  return id;
}

bool SessionStore::with_session(const std::string& id, const std::function<void(Session&)>& f) {
  std::shared_ptr<Session> s;
  {
    std::lock_guard lock(mutex_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) return false;
    s = it->second;
  }
  std::lock_guard lock(s->mutex);
  s->last_used = Clock::now();
  f(*s);
  s->last_used = Clock::now();
  return true;
}

bool SessionStore::erase(const std::string& id) {
  std::lock_guard lock(mutex_);
  return sessions_.erase(id) != 0;
}

std::size_t SessionStore::purge_expired(Clock::time_point now) {
  std::lock_guard lock(mutex_);
  std::size_t removed = 0;
  for (auto it = sessions_.begin(); it != sessions_.end();) {
    bool idle = false;
    if (std::unique_lock s(it->second->mutex, std::try_to_lock); s.owns_lock())
      idle = now - it->second->last_used > idle_timeout_;
    if (idle) {
      it = sessions_.erase(it);
      ++removed;
    } else {
      ++it;
    }
  }
  return removed;
}

std::size_t SessionStore::size() const {
  std::lock_guard lock(mutex_);
  return sessions_.size();
}

json record_json(const KBRecord& r) {
  return {{"name", r.name},   {"food", r.food},       {"pricerange", r.pricerange},
          {"area", r.area},   {"phone", r.phone},     {"address", r.address},
          {"postcode", r.postcode}};
}

DialogueService::DialogueService(const DialogueModel& model, KnowledgeBase kb, ServiceConfig config)
    : model_(model), kb_(std::move(kb)), config_(std::move(config)), store_(config_.idle_timeout) {}

json DialogueService::turn_json(const TurnResult& r) const {
  json j;
  j["resolved_utterance"] = detokenize(r.resolved);
  j["bspan"] = {{"informable", r.bspan.informable}, {"requestable", r.bspan.requestable}};
  j["kb_match_count"] = r.kb.records.size();
  j["kb_top_match"] = r.kb.records.empty() ? json(nullptr) : record_json(kb_[r.kb.records.front()]);
  j["response"] = detokenize(r.response);
  j["turn_index"] = r.turn_index;
  return j;
}

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, {{"error", message}});
}

}  // namespace

void DialogueService::install(httplib::Server& server) {
  if (!config_.static_dir.empty() && std::filesystem::is_directory(config_.static_dir))
    server.set_mount_point("/", config_.static_dir.string());

  server.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
    store_.purge_expired();
    send_json(res, 200, {{"status", "ok"}, {"sessions", store_.size()}});
  });

  server.Post("/session", [this](const httplib::Request&, httplib::Response& res) {
    store_.purge_expired();
    send_json(res, 201, {{"session_id", store_.create()}});
  });

  server.Post(R"(/session/([^/]+)/turn)", [this](const httplib::Request& req,
                                                  httplib::Response& res) {
    store_.purge_expired();
    const std::string id = req.matches[1];
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::parse_error&) {
      return send_error(res, 400, "body is not valid JSON");
    }
    if (!body.is_object() || !body.contains("utterance") || !body["utterance"].is_string())
      return send_error(res, 400, "body must be an object with a string 'utterance'");
    const std::string text = body["utterance"].get<std::string>();
    const Tokens utterance = tokenize(text);
    if (utterance.empty()) return send_error(res, 400, "'utterance' is empty");

    bool failed = false;
    std::string failure;
    json turn;
    const bool found = store_.with_session(id, [&](Session& s) {
      try {
        DialogueState next;
        TurnResult r = model_.run_turn(s.state, utterance, kb_, &next);
        turn = turn_json(r);
        json entry = turn;
        entry["utterance"] = text;
        s.history.push_back(std::move(entry));
        s.state = std::move(next);
      } catch (const std::exception& e) {
        failed = true;
        failure = e.what();
      }
    });
    if (!found) return send_error(res, 404, "unknown session '" + id + "'");
    if (failed) {
      const std::string diag = "diag-" + std::to_string(++diagnostics_);
      std::cerr << diag << ": turn failed in session " << id << ": " << failure << '\n';
      return send_json(res, 500, {{"error", "turn processing failed"}, {"diagnostic_id", diag}});
    }
    send_json(res, 200, turn);
  });

  server.Get(R"(/session/([^/]+)/history)", [this](const httplib::Request& req,
                                                    httplib::Response& res) {
    store_.purge_expired();
    const std::string id = req.matches[1];
    json history;
    if (!store_.with_session(id, [&](Session& s) { history = s.history; }))
      return send_error(res, 404, "unknown session '" + id + "'");
    send_json(res, 200, {{"session_id", id}, {"turns", history}});
  });

  server.Delete(R"(/session/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    if (!store_.erase(id)) return send_error(res, 404, "unknown session '" + id + "'");
    send_json(res, 200, {{"deleted", id}});
  });
}

}  // namespace gecor
