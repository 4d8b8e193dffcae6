#include <cstdlib>

#include <httplib.h>

#include "curate/client.hpp"
#include "curate/error.hpp"

namespace curate {
namespace {

struct ParsedUrl {
  std::string scheme_host_port;
  std::string path_prefix;
};

ParsedUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ParseError("endpoint URL without scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  ParsedUrl out;
  out.scheme_host_port = url.substr(0, path_start);
  out.path_prefix = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!out.path_prefix.empty() && out.path_prefix.back() == '/') out.path_prefix.pop_back();
  return out;
}

}  // namespace

HttpTransport::HttpTransport(std::chrono::seconds timeout) : timeout_(timeout) {}

Json HttpTransport::post(const RoleEndpoint& endpoint, const std::string& path,
                         const OrderedJson& body) {
  const ParsedUrl url = split_url(endpoint.base_url);
  httplib::Client cli(url.scheme_host_port);
  cli.set_connection_timeout(30);
  cli.set_read_timeout(timeout_.count());
  cli.set_write_timeout(60);

  httplib::Headers headers;
  if (!endpoint.api_key_env.empty()) {
    if (const char* key = std::getenv(endpoint.api_key_env.c_str()); key != nullptr && *key) {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
  }

  auto res = cli.Post(url.path_prefix + path, headers, body.dump(), "application/json");
  if (!res) {
    throw TransportError("POST " + endpoint.base_url + path + " failed: " +
                             httplib::to_string(res.error()),
                         true);
  }
  if (res->status == 429 || res->status >= 500) {
    throw TransportError("POST " + endpoint.base_url + path + " returned HTTP " +
                             std::to_string(res->status),
                         true);
  }
  if (res->status < 200 || res->status >= 300) {
    throw TransportError("POST " + endpoint.base_url + path + " returned HTTP " +
                             std::to_string(res->status) + ": " + res->body.substr(0, 200),
                         false);
  }
  try {
    return Json::parse(res->body);
  } catch (const Json::exception& e) {
    throw ParseError("endpoint returned invalid JSON: " + std::string(e.what()));
  }
}

}  // namespace curate
