#include "curate/client.hpp"

#include <cmath>
#include <ctime>
#include <thread>

#include "curate/corpus.hpp"
#include "curate/digest.hpp"
#include "curate/error.hpp"

namespace curate {
namespace {

OrderedJson messages_json(const std::vector<ChatMessage>& messages) {
  OrderedJson arr = OrderedJson::array();
  for (const auto& m : messages) {
    OrderedJson o = OrderedJson::object();
    o["role"] = m.speaker;
    o["content"] = m.text;
    arr.push_back(std::move(o));
  }
  return arr;
}

OrderedJson sampling_json(const SamplingParams& s) {
  OrderedJson j = OrderedJson::object();
  j["temperature"] = s.temperature;
  j["top_p"] = s.top_p;
  j["top_k"] = s.top_k;
  j["max_tokens"] = s.max_tokens;
  return j;
}

OrderedJson keyed_request(const ChatRequest& req, std::size_t sample_index) {
  OrderedJson j = OrderedJson::object();
  j["role_name"] = req.role_name;
  j["messages"] = messages_json(req.messages);
  j["sampling"] = sampling_json(req.sampling);
  j["sample_index"] = sample_index;
  return j;
}

OrderedJson keyed_request(const EmbedRequest& req) {
  OrderedJson j = OrderedJson::object();
  j["role_name"] = req.role_name;
  j["embed"] = req.text;
  return j;
}

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<double> as_vector(const Json& j, std::size_t dim) {
  if (!j.is_array()) throw ParseError("embedding is not an array");
  std::vector<double> v;
  v.reserve(j.size());
  for (const auto& x : j) {
    if (!x.is_number()) throw ParseError("embedding holds a non-number");
    v.push_back(x.get<double>());
  }
  if (v.size() != dim) {
    throw ParseError("embedding dimension mismatch: got " + std::to_string(v.size()) +
                     ", expected " + std::to_string(dim));
  }
  return v;
}

}  // namespace

std::string cache_key(const ChatRequest& req, std::size_t sample_index) {
  return sha256_hex(keyed_request(req, sample_index).dump());
}

std::string cache_key(const EmbedRequest& req) { return sha256_hex(keyed_request(req).dump()); }

std::string sampler_params_digest(const ChatRequest& req) {
  OrderedJson j = OrderedJson::object();
  j["role_name"] = req.role_name;
  j["sampling"] = sampling_json(req.sampling);
  return sha256_hex(j.dump()).substr(0, 16);
}

// --- cache -----------------------------------------------------------------

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  if (!dir_.empty()) std::filesystem::create_directories(dir_);
}

std::optional<Json> ResponseCache::get(const std::string& key) const {
  {
    std::lock_guard lock(mu_);
    if (auto it = memory_.find(key); it != memory_.end()) return it->second;
  }
  if (dir_.empty()) return std::nullopt;
  const auto path = dir_ / (key + ".json");
  if (!std::filesystem::exists(path)) return std::nullopt;
  Json entry;
  try {
    entry = Json::parse(read_file(path));
  } catch (const Json::exception& e) {
    throw ParseError("corrupt cache entry " + path.string() + ": " + e.what());
  }
  if (!entry.contains("response")) throw ParseError("cache entry without response: " + path.string());
  std::lock_guard lock(mu_);
  return memory_.emplace(key, entry["response"]).first->second;
}

void ResponseCache::put(const std::string& key, const OrderedJson& request, const Json& response) {
  if (!dir_.empty()) {
    OrderedJson entry = OrderedJson::object();
    entry["key"] = key;
    entry["request"] = request;
    entry["response"] = OrderedJson::parse(response.dump());
    entry["created_at"] = utc_now();
    atomic_write(dir_ / (key + ".json"), entry.dump(2) + "\n");
  }
  std::lock_guard lock(mu_);
  memory_[key] = response;
}

void ResponseCache::put_chat(const ChatRequest& req, std::size_t sample_index,
                             const std::string& text) {
  put(cache_key(req, sample_index), keyed_request(req, sample_index), Json(text));
}

void ResponseCache::put_embedding(const EmbedRequest& req, const std::vector<double>& vector) {
  put(cache_key(req), keyed_request(req), Json(vector));
}

// --- rate limiting ---------------------------------------------------------

RateLimiter::RateLimiter(double per_second)
    : rate_(per_second),
      capacity_(std::max(1.0, per_second)),
      tokens_(capacity_),
      last_(std::chrono::steady_clock::now()) {}

void RateLimiter::acquire() {
  if (rate_ <= 0) return;
  std::unique_lock lock(mu_);
  for (;;) {
    const auto now = std::chrono::steady_clock::now();
    const double elapsed = std::chrono::duration<double>(now - last_).count();
    tokens_ = std::min(capacity_, tokens_ + elapsed * rate_);
    last_ = now;
    if (tokens_ >= 1.0) {
      tokens_ -= 1.0;
      return;
    }
    const double wait_s = (1.0 - tokens_) / rate_;
    lock.unlock();
    std::this_thread::sleep_for(std::chrono::duration<double>(wait_s));
    lock.lock();
  }
}

// --- client ----------------------------------------------------------------

ModelClient::ModelClient(ClientOptions options, std::map<std::string, RoleEndpoint> roles,
                         std::shared_ptr<Transport> transport)
    : options_(std::move(options)),
      roles_(std::move(roles)),
      transport_(std::move(transport)),
      cache_(options_.cache_dir) {
  if (options_.replay && options_.cache_dir.empty()) {
    throw PreconditionError("replay mode needs a store directory");
  }
  if (!options_.replay && !transport_) throw PreconditionError("live mode needs a transport");
}

std::shared_ptr<ModelClient> ModelClient::replay(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw IoError("replay store " + dir.string() + " is not a directory");
  }
  ClientOptions opts;
  opts.cache_dir = dir;
  opts.replay = true;
  return std::make_shared<ModelClient>(opts, std::map<std::string, RoleEndpoint>{}, nullptr);
}

const RoleEndpoint& ModelClient::endpoint(const std::string& role) const {
  auto it = roles_.find(role);
  if (it == roles_.end()) throw PreconditionError("no endpoint configured for role '" + role + "'");
  return it->second;
}

RateLimiter* ModelClient::limiter(const std::string& role) {
  const double rps = endpoint(role).requests_per_second;
  if (rps <= 0) return nullptr;
  std::lock_guard lock(limiter_mu_);
  auto& slot = limiters_[role];
  if (!slot) slot = std::make_unique<RateLimiter>(rps);
  return slot.get();
}

Json ModelClient::call_with_retries(const std::string& role, const std::string& path,
                                    const OrderedJson& body) {
  const RoleEndpoint& ep = endpoint(role);
  RateLimiter* rl = limiter(role);
  for (int attempt = 0;; ++attempt) {
    if (rl != nullptr) rl->acquire();
    try {
      ++network_calls_;
      return transport_->post(ep, path, body);
    } catch (const TransportError& e) {
      if (!e.transient()) throw;
      if (attempt >= options_.max_retries) {
        throw TransportError("endpoint for role '" + role + "' unreachable after " +
                                 std::to_string(attempt + 1) + " attempts: " + e.what(),
                             false);
      }
      std::this_thread::sleep_for(options_.backoff_base * (1LL << attempt));
    }
  }
}

std::vector<std::string> ModelClient::complete(const ChatRequest& req) {
  if (req.n_samples < 1) throw PreconditionError("n_samples must be >= 1");
  if (req.sampling.temperature < 0) throw PreconditionError("temperature must be >= 0");

  const auto n = static_cast<std::size_t>(req.n_samples);
  std::vector<std::string> out(n);
  std::vector<std::string> keys(n);
  std::vector<std::pair<std::size_t, Shared>> waiting;
  std::vector<std::pair<std::size_t, std::promise<Json>>> owned;

  {
    std::lock_guard lock(inflight_mu_);
    for (std::size_t i = 0; i < n; ++i) {
      keys[i] = cache_key(req, i);
      if (auto hit = cache_.get(keys[i])) {
        if (!hit->is_string()) throw ParseError("cached chat response is not a string");
        out[i] = hit->get<std::string>();
        ++cache_hits_;
        continue;
      }
      if (options_.replay) throw ReplayMiss(keys[i]);
      if (auto it = inflight_.find(keys[i]); it != inflight_.end()) {
        waiting.emplace_back(i, it->second);
        continue;
      }
      std::promise<Json> p;
      inflight_.emplace(keys[i], p.get_future().share());
      owned.emplace_back(i, std::move(p));
    }
  }

  if (!owned.empty()) {
    auto release = [&] {
      std::lock_guard lock(inflight_mu_);
      for (const auto& [i, p] : owned) inflight_.erase(keys[i]);
    };
    try {
      const RoleEndpoint& ep = endpoint(req.role_name);
      OrderedJson body = OrderedJson::object();
      body["model"] = ep.model;
      body["messages"] = messages_json(req.messages);
      body["temperature"] = req.sampling.temperature;
      body["top_p"] = req.sampling.top_p;
      if (req.sampling.top_k > 0) body["top_k"] = req.sampling.top_k;
      body["max_tokens"] = req.sampling.max_tokens;
      body["n"] = owned.size();

      const Json resp = call_with_retries(req.role_name, "/chat/completions", body);
      const auto choices = resp.find("choices");
      if (choices == resp.end() || !choices->is_array() || choices->size() != owned.size()) {
        throw ParseError("malformed chat response for role '" + req.role_name +
                         "': expected " + std::to_string(owned.size()) + " choices");
      }
      for (std::size_t j = 0; j < owned.size(); ++j) {
        const Json& c = (*choices)[j];
        if (!c.contains("message") || !c["message"].contains("content") ||
            !c["message"]["content"].is_string()) {
          throw ParseError("malformed chat response: choice without message.content");
        }
        auto& [i, promise] = owned[j];
        out[i] = c["message"]["content"].get<std::string>();
        cache_.put(keys[i], keyed_request(req, i), Json(out[i]));
        ++samples_fetched_;
        promise.set_value(Json(out[i]));
      }
    } catch (...) {
      for (auto& [i, p] : owned) {
        try {
          p.set_exception(std::current_exception());
        } catch (const std::future_error&) {
        }
      }
      release();
      throw;
    }
    release();
  }

  for (auto& [i, fut] : waiting) out[i] = fut.get().get<std::string>();
  return out;
}

std::vector<double> ModelClient::embed(const EmbedRequest& req) {
  if (req.dim == 0) throw PreconditionError("embedding dim must be > 0");
  const std::string key = cache_key(req);

  Shared waiting;
  std::promise<Json> owned;
  bool is_owner = false;
  {
    std::lock_guard lock(inflight_mu_);
    if (auto hit = cache_.get(key)) {
      ++cache_hits_;
      return as_vector(*hit, req.dim);
    }
    if (options_.replay) throw ReplayMiss(key);
    if (auto it = inflight_.find(key); it != inflight_.end()) {
      waiting = it->second;
    } else {
      inflight_.emplace(key, owned.get_future().share());
      is_owner = true;
    }
  }
  if (!is_owner) return as_vector(waiting.get(), req.dim);

  auto release = [&] {
    std::lock_guard lock(inflight_mu_);
    inflight_.erase(key);
  };
  try {
    OrderedJson body = OrderedJson::object();
    body["model"] = endpoint(req.role_name).model;
    body["input"] = req.text;
    const Json resp = call_with_retries(req.role_name, "/embeddings", body);
    if (!resp.contains("data") || !resp["data"].is_array() || resp["data"].empty() ||
        !resp["data"][0].contains("embedding")) {
      throw ParseError("malformed embedding response for role '" + req.role_name + "'");
    }
    const Json& vec = resp["data"][0]["embedding"];
    auto v = as_vector(vec, req.dim);
    cache_.put(key, keyed_request(req), vec);
    ++samples_fetched_;
    owned.set_value(vec);
    release();
    return v;
  } catch (...) {
    try {
      owned.set_exception(std::current_exception());
    } catch (const std::future_error&) {
    }
    release();
    throw;
  }
}

ClientStats ModelClient::stats() const {
  return ClientStats{network_calls_.load(), cache_hits_.load(), samples_fetched_.load()};
}

}  // namespace curate
