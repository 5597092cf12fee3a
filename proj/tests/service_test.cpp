#include <gtest/gtest.h>

#include <thread>

#include "gecor/service.hpp"
#include "gecor/synthetic.hpp"
#include "httplib.h"

using namespace gecor;
using json = nlohmann::json;

namespace {

class ServiceTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    kb_ = new KnowledgeBase(synthetic_kb(2));
    auto dialogues = synthetic_dialogues(6, 2, *kb_);
    model_ = new DialogueModel(build_vocab(vocabulary_sequences(dialogues)), 3, ModelDims{12, 12});
  }
  static void TearDownTestSuite() {
    delete model_;
    delete kb_;
  }

  void SetUp() override {
    service_ = std::make_unique<DialogueService>(*model_, *kb_);
    service_->install(server_);
    port_ = server_.bind_to_any_port("127.0.0.1");
    ASSERT_GT(port_, 0);
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
  }

  void TearDown() override {
    server_.stop();
    thread_.join();
  }

  std::string create_session() {
    auto res = client_->Post("/session");
    EXPECT_TRUE(res);
    EXPECT_EQ(res->status, 201);
    return json::parse(res->body).at("session_id").get<std::string>();
  }

  httplib::Result turn(const std::string& id, const std::string& utterance) {
    return client_->Post("/session/" + id + "/turn", json{{"utterance", utterance}}.dump(),
                         "application/json");
  }

  // What the service should answer for `utterances`, computed directly.
  static std::vector<json> direct_replay(const DialogueService& svc,
                                         const std::vector<std::string>& utterances) {
    DialogueState state;
    std::vector<json> out;
    for (const auto& u : utterances) {
      DialogueState next;
      out.push_back(svc.turn_json(model_->run_turn(state, tokenize(u), *kb_, &next)));
      state = std::move(next);
    }
    return out;
  }

  static KnowledgeBase* kb_;
  static DialogueModel* model_;
  httplib::Server server_;
  std::unique_ptr<DialogueService> service_;
  std::unique_ptr<httplib::Client> client_;
  std::thread thread_;
  int port_ = 0;
};

KnowledgeBase* ServiceTest::kb_ = nullptr;
DialogueModel* ServiceTest::model_ = nullptr;

}  // namespace

TEST_F(ServiceTest, HealthReportsOk) {
  auto res = client_->Get("/health");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(json::parse(res->body)["status"], "ok");
}

TEST_F(ServiceTest, CreateSessionReturnsDistinctIds) {
  const std::string a = create_session(), b = create_session();
  EXPECT_FALSE(a.empty());
  EXPECT_NE(a, b);
  EXPECT_EQ(service_->sessions().size(), 2u);
}

TEST_F(ServiceTest, TurnResponseHasTheDocumentedSchema) {
  const std::string id = create_session();
  auto res = turn(id, "I would like an Italian restaurant.");
  ASSERT_TRUE(res);
  ASSERT_EQ(res->status, 200);
  EXPECT_NE(res->get_header_value("Content-Type").find("application/json"), std::string::npos);
  auto j = json::parse(res->body);
  EXPECT_TRUE(j["resolved_utterance"].is_string());
  EXPECT_TRUE(j["bspan"]["informable"].is_array());
  EXPECT_TRUE(j["bspan"]["requestable"].is_array());
  EXPECT_TRUE(j["kb_match_count"].is_number_unsigned());
  EXPECT_TRUE(j["kb_top_match"].is_null() || j["kb_top_match"].is_object());
  EXPECT_TRUE(j["response"].is_string());
  EXPECT_EQ(j["turn_index"], 0);
  EXPECT_EQ(j, direct_replay(*service_, {"I would like an Italian restaurant."})[0]);
}

TEST_F(ServiceTest, TurnIndexAdvances) {
  const std::string id = create_session();
  for (int k = 0; k < 3; ++k) {
    auto res = turn(id, "yes , please .");
    ASSERT_EQ(res->status, 200);
    EXPECT_EQ(json::parse(res->body)["turn_index"], k);
  }
}

TEST_F(ServiceTest, MalformedBodiesAreBadRequests) {
  const std::string id = create_session();
  auto post = [&](const std::string& body) {
    return client_->Post("/session/" + id + "/turn", body, "application/json")->status;
  };
  EXPECT_EQ(post("not json"), 400);
  EXPECT_EQ(post("[]"), 400);
  EXPECT_EQ(post(R"({"text": "hi"})"), 400);
  EXPECT_EQ(post(R"({"utterance": 3})"), 400);
  EXPECT_EQ(post(R"({"utterance": "   "})"), 400);
  auto res = client_->Post("/session/" + id + "/turn", "{", "application/json");
  EXPECT_TRUE(json::parse(res->body).contains("error"));
  // A rejected turn leaves the session untouched.
  auto h = json::parse(client_->Get("/session/" + id + "/history")->body);
  EXPECT_TRUE(h["turns"].empty());
}

TEST_F(ServiceTest, UnknownSessionIsNotFound) {
  EXPECT_EQ(turn("deadbeef", "hello")->status, 404);
  EXPECT_EQ(client_->Get("/session/deadbeef/history")->status, 404);
  EXPECT_EQ(client_->Delete("/session/deadbeef")->status, 404);
}

TEST_F(ServiceTest, HistoryRecordsEveryTurnInOrder) {
  const std::string id = create_session();
  const std::vector<std::string> says = {"i want chinese food .", "i want cheap ones .", "yes , please ."};
  for (const auto& s : says) ASSERT_EQ(turn(id, s)->status, 200);
  auto res = client_->Get("/session/" + id + "/history");
  ASSERT_EQ(res->status, 200);
  auto h = json::parse(res->body);
  EXPECT_EQ(h["session_id"], id);
  ASSERT_EQ(h["turns"].size(), 3u);
  auto expected = direct_replay(*service_, says);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(h["turns"][k]["utterance"], says[k]);
    EXPECT_EQ(h["turns"][k]["turn_index"], k);
    EXPECT_EQ(h["turns"][k]["response"], expected[k]["response"]);
  }
}

TEST_F(ServiceTest, DeleteEndsTheSession) {
  const std::string id = create_session();
  ASSERT_EQ(turn(id, "hello .")->status, 200);
  EXPECT_EQ(client_->Delete("/session/" + id)->status, 200);
  EXPECT_EQ(turn(id, "hello .")->status, 404);
  EXPECT_EQ(service_->sessions().size(), 0u);
}

TEST_F(ServiceTest, InterleavedSessionsDoNotShareState) {
  const std::vector<std::string> a = {"i want italian food .", "i want cheap ones .", "yes , please ."};
  const std::vector<std::string> b = {"i want chinese food in the north .", "any price .", "what is the address ?"};
  const std::string ia = create_session(), ib = create_session();
  std::vector<json> got_a, got_b;
  for (std::size_t k = 0; k < a.size(); ++k) {
    got_a.push_back(json::parse(turn(ia, a[k])->body));
    got_b.push_back(json::parse(turn(ib, b[k])->body));
  }
  EXPECT_EQ(got_a, direct_replay(*service_, a));
  EXPECT_EQ(got_b, direct_replay(*service_, b));
}

TEST_F(ServiceTest, ConcurrentSessionsMatchSequentialReplay) {
  const std::vector<std::string> says = {"i want italian food .", "i want cheap ones .", "yes , please ."};
  const auto expected = direct_replay(*service_, says);
  constexpr int kClients = 4;
  std::vector<std::vector<json>> got(kClients);
  std::vector<std::thread> threads;
  for (int c = 0; c < kClients; ++c)
    threads.emplace_back([&, c] {
      httplib::Client cl("127.0.0.1", port_);
      auto created = cl.Post("/session");
      const std::string id = json::parse(created->body)["session_id"];
      for (const auto& s : says)
        got[c].push_back(json::parse(
            cl.Post("/session/" + id + "/turn", json{{"utterance", s}}.dump(), "application/json")->body));
    });
  for (auto& t : threads) t.join();
  for (const auto& g : got) EXPECT_EQ(g, expected);
}

TEST(SessionStore, PurgesIdleSessions) {
  SessionStore store(std::chrono::seconds(60));
  const std::string id = store.create();
  EXPECT_EQ(store.purge_expired(Clock::now() + std::chrono::seconds(30)), 0u);
  EXPECT_EQ(store.purge_expired(Clock::now() + std::chrono::seconds(120)), 1u);
  EXPECT_FALSE(store.with_session(id, [](Session&) {}));
}
