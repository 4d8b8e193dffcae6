#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "curate/record.hpp"

namespace curate {

struct ChatMessage {
  std::string speaker;  // "system" | "user" | "assistant"
  std::string text;
};

struct SamplingParams {
  double temperature = 0.0;
  double top_p = 1.0;
  int top_k = -1;  // <= 0 means "not sent"
  int max_tokens = 4096;
};

struct ChatRequest {
  std::string role_name;
  std::vector<ChatMessage> messages;
  SamplingParams sampling;
  int n_samples = 1;
};

struct EmbedRequest {
  std::string role_name;
  std::string text;
  std::size_t dim = 0;
};

/// Per-sample content address of a chat request. n_samples is deliberately
/// excluded so that raising it keeps the earlier samples valid.
std::string cache_key(const ChatRequest& req, std::size_t sample_index);
std::string cache_key(const EmbedRequest& req);

/// Short digest of (role_name, sampling params), stored on responses.
std::string sampler_params_digest(const ChatRequest& req);

/// Where a role is served. `base_url` is an OpenAI-compatible root such as
/// `http://localhost:8000/v1`; `/chat/completions` or `/embeddings` is
/// appended.
struct RoleEndpoint {
  std::string base_url;
  std::string model;
  std::string api_key_env;        // name of the env var holding the key
  double requests_per_second = 0; // 0 = unlimited
};

/// Sends one JSON POST and returns the decoded response body. Implementations
/// throw TransportError (transient for timeouts, 429 and 5xx).
class Transport {
 public:
  virtual ~Transport() = default;
  virtual Json post(const RoleEndpoint& endpoint, const std::string& path,
                    const OrderedJson& body) = 0;
};

/// HTTP transport for OpenAI-compatible servers.
class HttpTransport : public Transport {
 public:
  explicit HttpTransport(std::chrono::seconds timeout = std::chrono::seconds(600));
  Json post(const RoleEndpoint& endpoint, const std::string& path,
            const OrderedJson& body) override;

 private:
  std::chrono::seconds timeout_;
};

/// Content-addressed on-disk cache; one `<key>.json` file per entry holding
/// `{"key", "request", "response", "created_at"}`.
class ResponseCache {
 public:
  ResponseCache() = default;  // memory only
  explicit ResponseCache(std::filesystem::path dir);

  std::optional<Json> get(const std::string& key) const;
  void put(const std::string& key, const OrderedJson& request, const Json& response);

  /// Convenience writers for building replay stores.
  void put_chat(const ChatRequest& req, std::size_t sample_index, const std::string& text);
  void put_embedding(const EmbedRequest& req, const std::vector<double>& vector);

  const std::filesystem::path& dir() const noexcept { return dir_; }

 private:
  std::filesystem::path dir_;
  mutable std::mutex mu_;
  mutable std::unordered_map<std::string, Json> memory_;
};

/// Token bucket; acquire() blocks until a token is available.
class RateLimiter {
 public:
  explicit RateLimiter(double per_second);
  void acquire();

 private:
  double rate_;
  double capacity_;
  double tokens_;
  std::chrono::steady_clock::time_point last_;
  std::mutex mu_;
};

struct ClientOptions {
  std::filesystem::path cache_dir;  // empty = in-memory cache only
  bool replay = false;              // serve from cache_dir only, never the network
  int max_retries = 4;
  std::chrono::milliseconds backoff_base{250};
};

struct ClientStats {
  std::size_t network_calls = 0;
  std::size_t cache_hits = 0;
  std::size_t samples_fetched = 0;
};

/// Single entry point for every model role.
///
/// Live mode checks the cache per sample, fetches all missing samples of a
/// request in one call, and writes each back. Identical keys requested
/// concurrently cost one network call. Replay mode never touches the
/// network; a miss raises ReplayMiss.
class ModelClient {
 public:
  ModelClient(ClientOptions options, std::map<std::string, RoleEndpoint> roles,
              std::shared_ptr<Transport> transport);

  static std::shared_ptr<ModelClient> replay(const std::filesystem::path& dir);

  std::vector<std::string> complete(const ChatRequest& req);
  std::vector<double> embed(const EmbedRequest& req);

  ClientStats stats() const;
  bool replay_mode() const noexcept { return options_.replay; }
  bool has_role(const std::string& role) const { return roles_.contains(role); }

 private:
  using Shared = std::shared_future<Json>;

  const RoleEndpoint& endpoint(const std::string& role) const;
  RateLimiter* limiter(const std::string& role);
  Json call_with_retries(const std::string& role, const std::string& path,
                         const OrderedJson& body);

  ClientOptions options_;
  std::map<std::string, RoleEndpoint> roles_;
  std::shared_ptr<Transport> transport_;
  ResponseCache cache_;

  std::mutex inflight_mu_;
  std::unordered_map<std::string, Shared> inflight_;

  std::mutex limiter_mu_;
  std::map<std::string, std::unique_ptr<RateLimiter>> limiters_;

  std::atomic<std::size_t> network_calls_{0};
  std::atomic<std::size_t> cache_hits_{0};
  std::atomic<std::size_t> samples_fetched_{0};
};

}  // namespace curate
