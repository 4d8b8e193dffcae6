#include <gtest/gtest.h>

#include <httplib.h>

#include <atomic>
#include <fstream>
#include <cstdlib>
#include <thread>

#include "curate/client.hpp"
#include "curate/error.hpp"
#include "fixtures.hpp"

using namespace curate;
using fixtures::TempDir;

namespace {

// Answers chat calls with "<tag>-<call>-<j>" and counts calls.
class CountingTransport : public Transport {
 public:
  std::atomic<int> calls{0};
  std::atomic<int> fail_next{0};  // transient failures before succeeding
  bool fatal = false;
  std::chrono::milliseconds delay{0};
  std::vector<int> requested_n;
  std::mutex mu;

  Json post(const RoleEndpoint& ep, const std::string& path, const OrderedJson& body) override {
    const int call = ++calls;
    if (delay.count() > 0) std::this_thread::sleep_for(delay);
    if (fatal) throw TransportError("bad request", false);
    if (fail_next > 0) {
      --fail_next;
      throw TransportError("busy", true);
    }
    if (path == "/embeddings") {
      return Json{{"data", Json::array({Json{{"embedding", {1.0, 2.0, 3.0}}}})}};
    }
    const int n = body.at("n").get<int>();
    {
      std::lock_guard lock(mu);
      requested_n.push_back(n);
    }
    Json choices = Json::array();
    for (int j = 0; j < n; ++j) {
      choices.push_back({{"message", {{"content", ep.model + "-" + std::to_string(call) + "-" + std::to_string(j)}}}});
    }
    return Json{{"choices", choices}};
  }
};

ChatRequest request(int n = 1, std::string text = "hello") {
  ChatRequest r;
  r.role_name = "solver";
  r.messages = {{"user", std::move(text)}};
  r.sampling = {0.7, 0.8, 20, 128};
  r.n_samples = n;
  return r;
}

std::map<std::string, RoleEndpoint> roles() {
  return {{"solver", RoleEndpoint{"http://unused", "m", "", 0}},
          {"embedder", RoleEndpoint{"http://unused", "e", "", 0}}};
}

ClientOptions fast(const std::filesystem::path& dir = {}) {
  ClientOptions o;
  o.cache_dir = dir;
  o.backoff_base = std::chrono::milliseconds(1);
  return o;
}

}  // namespace

TEST(CacheKey, IgnoresSampleCountButNotContent) {
  EXPECT_EQ(cache_key(request(1), 0), cache_key(request(5), 0));
  EXPECT_NE(cache_key(request(1), 0), cache_key(request(1), 1));
  EXPECT_NE(cache_key(request(1, "a"), 0), cache_key(request(1, "b"), 0));
  auto other = request();
  other.sampling.temperature = 0.6;
  EXPECT_NE(cache_key(request(), 0), cache_key(other, 0));
  other = request();
  other.role_name = "teacher";
  EXPECT_NE(cache_key(request(), 0), cache_key(other, 0));
  EXPECT_EQ(cache_key(request(), 0).size(), 64u);
  EXPECT_EQ(sampler_params_digest(request(1)), sampler_params_digest(request(4, "other text")));
}

TEST(Client, WarmCacheMakesNoCalls) {
  TempDir dir;
  auto t = std::make_shared<CountingTransport>();
  {
    ModelClient c(fast(dir.path()), roles(), t);
    const auto first = c.complete(request(5));
    ASSERT_EQ(first.size(), 5u);
    EXPECT_EQ(t->calls, 1);
    EXPECT_EQ(c.complete(request(5)), first);
    EXPECT_EQ(t->calls, 1);
    EXPECT_EQ(c.stats().cache_hits, 5u);
  }
  // A new client on the same directory, and replay mode, see the same data.
  ModelClient again(fast(dir.path()), roles(), t);
  const auto second = again.complete(request(5));
  EXPECT_EQ(t->calls, 1);
  auto replay = ModelClient::replay(dir.path());
  EXPECT_EQ(replay->complete(request(5)), second);
}

TEST(Client, RaisingKFetchesOnlyMissingSamples) {
  auto t = std::make_shared<CountingTransport>();
  ModelClient c(fast(), roles(), t);
  const auto three = c.complete(request(3));
  const auto five = c.complete(request(5));
  EXPECT_EQ(t->calls, 2);
  EXPECT_EQ(t->requested_n, (std::vector<int>{3, 2}));
  for (int i = 0; i < 3; ++i) EXPECT_EQ(five[i], three[i]);
  EXPECT_EQ(c.stats().samples_fetched, 5u);
}

TEST(Client, ReplayMissIsAnError) {
  TempDir dir;
  auto replay = ModelClient::replay(dir.path());
  EXPECT_THROW(replay->complete(request()), ReplayMiss);
  EXPECT_THROW(replay->embed(EmbedRequest{"embedder", "x", 3}), ReplayMiss);
  EXPECT_THROW(ModelClient::replay(dir / "missing"), IoError);
}

TEST(Client, ReplayServesHandBuiltStore) {
  TempDir dir;
  ResponseCache store(dir.path());
  store.put_chat(request(2), 0, "first");
  store.put_chat(request(2), 1, "second");
  store.put_embedding(EmbedRequest{"embedder", "x", 2}, {0.5, -1.0});
  auto replay = ModelClient::replay(dir.path());
  EXPECT_EQ(replay->complete(request(2)), (std::vector<std::string>{"first", "second"}));
  EXPECT_EQ(replay->embed(EmbedRequest{"embedder", "x", 2}), (std::vector<double>{0.5, -1.0}));
  EXPECT_THROW(replay->embed(EmbedRequest{"embedder", "x", 3}), ParseError);
  const Json entry = Json::parse(std::ifstream(dir / (cache_key(request(2), 1) + ".json")));
  EXPECT_EQ(entry["response"], "second");
  EXPECT_EQ(entry["request"]["sample_index"], 1);
  EXPECT_TRUE(entry.contains("created_at"));
}

TEST(Client, RetriesTransientErrors) {
  auto t = std::make_shared<CountingTransport>();
  t->fail_next = 2;
  ModelClient c(fast(), roles(), t);
  EXPECT_EQ(c.complete(request()).size(), 1u);
  EXPECT_EQ(t->calls, 3);

  auto t2 = std::make_shared<CountingTransport>();
  t2->fail_next = 100;
  ClientOptions o = fast();
  o.max_retries = 2;
  ModelClient c2(o, roles(), t2);
  EXPECT_THROW(c2.complete(request()), TransportError);
  EXPECT_EQ(t2->calls, 3);

  auto t3 = std::make_shared<CountingTransport>();
  t3->fatal = true;
  ModelClient c3(fast(), roles(), t3);
  EXPECT_THROW(c3.complete(request()), TransportError);
  EXPECT_EQ(t3->calls, 1);
}

TEST(Client, ConcurrentIdenticalRequestsShareOneCall) {
  auto t = std::make_shared<CountingTransport>();
  t->delay = std::chrono::milliseconds(100);
  ModelClient c(fast(), roles(), t);
  std::vector<std::thread> threads;
  std::vector<std::vector<std::string>> results(8);
  for (int i = 0; i < 8; ++i) {
    threads.emplace_back([&, i] { results[i] = c.complete(request(2)); });
  }
  for (auto& th : threads) th.join();
  EXPECT_EQ(t->calls, 1);
  for (const auto& r : results) EXPECT_EQ(r, results[0]);
}

TEST(Client, ConcurrentFailureReachesEveryWaiter) {
  auto t = std::make_shared<CountingTransport>();
  t->delay = std::chrono::milliseconds(50);
  t->fatal = true;
  ModelClient c(fast(), roles(), t);
  std::atomic<int> failures{0};
  std::vector<std::thread> threads;
  for (int i = 0; i < 4; ++i) {
    threads.emplace_back([&] {
      try {
        c.complete(request());
      } catch (const TransportError&) {
        ++failures;
      }
    });
  }
  for (auto& th : threads) th.join();
  EXPECT_EQ(failures, 4);
}

TEST(Client, EmbeddingsAreCachedAndDimensionChecked) {
  auto t = std::make_shared<CountingTransport>();
  ModelClient c(fast(), roles(), t);
  EXPECT_EQ(c.embed(EmbedRequest{"embedder", "abc", 3}), (std::vector<double>{1, 2, 3}));
  EXPECT_EQ(c.embed(EmbedRequest{"embedder", "abc", 3}).size(), 3u);
  EXPECT_EQ(t->calls, 1);
  EXPECT_THROW(c.embed(EmbedRequest{"embedder", "other", 4}), ParseError);
}

TEST(Client, UnknownRoleAndBadRequests) {
  auto t = std::make_shared<CountingTransport>();
  ModelClient c(fast(), roles(), t);
  auto r = request();
  r.role_name = "nobody";
  EXPECT_THROW(c.complete(r), PreconditionError);
  EXPECT_THROW(c.complete(request(0)), PreconditionError);
  auto hot = request();
  hot.sampling.temperature = -1;
  EXPECT_THROW(c.complete(hot), PreconditionError);
}

TEST(RateLimiter, SpacesRequests) {
  RateLimiter rl(50.0);
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < 60; ++i) rl.acquire();
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  // 50 tokens of burst, then 10 more at 50/s.
  EXPECT_GE(s, 0.15);
  EXPECT_LT(s, 2.0);
}

TEST(HttpTransport, TalksToOpenAiCompatibleServer) {
  httplib::Server server;
  std::string seen_auth;
  Json seen_body;
  std::atomic<int> hits{0};
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    seen_auth = req.get_header_value("Authorization");
    seen_body = Json::parse(req.body);
    Json choices = Json::array();
    for (int j = 0; j < seen_body["n"].get<int>(); ++j) {
      choices.push_back({{"message", {{"role", "assistant"}, {"content", "reply " + std::to_string(j)}}}});
    }
    res.set_content(Json{{"choices", choices}}.dump(), "application/json");
  });
  server.Post("/v1/embeddings", [&](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"data":[{"embedding":[0.25,0.75]}]})", "application/json");
  });
  server.Post("/busy/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 503;
  });
  server.Post("/bad/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    res.status = 400;
    res.set_content("nope", "text/plain");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  ::setenv("CURATE_TEST_KEY", "sekret", 1);
  const std::string base = "http://127.0.0.1:" + std::to_string(port);
  std::map<std::string, RoleEndpoint> eps = {
      {"solver", RoleEndpoint{base + "/v1/", "tiny", "CURATE_TEST_KEY", 0}},
      {"embedder", RoleEndpoint{base + "/v1", "emb", "", 0}},
      {"busy", RoleEndpoint{base + "/busy", "x", "", 0}},
      {"bad", RoleEndpoint{base + "/bad", "x", "", 0}}};
  ClientOptions o = fast();
  o.max_retries = 1;
  ModelClient c(o, eps, std::make_shared<HttpTransport>(std::chrono::seconds(5)));

  EXPECT_EQ(c.complete(request(2)), (std::vector<std::string>{"reply 0", "reply 1"}));
  EXPECT_EQ(seen_auth, "Bearer sekret");
  EXPECT_EQ(seen_body["model"], "tiny");
  EXPECT_EQ(seen_body["top_k"], 20);
  EXPECT_EQ(seen_body["n"], 2);
  EXPECT_EQ(c.embed(EmbedRequest{"embedder", "t", 2}), (std::vector<double>{0.25, 0.75}));

  auto busy = request();
  busy.role_name = "busy";
  EXPECT_THROW(c.complete(busy), TransportError);
  EXPECT_EQ(hits, 2);
  auto bad = request();
  bad.role_name = "bad";
  try {
    c.complete(bad);
    ADD_FAILURE() << "expected TransportError";
  } catch (const TransportError& e) {
    EXPECT_FALSE(e.transient());
  }
  server.stop();
  th.join();
}
