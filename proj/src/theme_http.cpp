#include <cstdlib>

#include <httplib.h>

#include "prefaudit/theme_client.hpp"

namespace prefaudit::themes {

std::string HttpTransport::complete(const EndpointConfig& endpoint, const std::string& prompt) {
  const UrlParts url = chat_completions_url(endpoint.base_url);
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
  if (url.origin.rfind("https://", 0) == 0) {
    throw std::runtime_error("built without TLS support; cannot reach " + url.origin);
  }
#endif
  httplib::Client client(url.origin);
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);

  httplib::Headers headers;
  if (!endpoint.auth_env_var.empty()) {
    const char* token = std::getenv(endpoint.auth_env_var.c_str());
    if (!token || !*token) {
      throw std::runtime_error("environment variable " + endpoint.auth_env_var + " is not set");
    }
    headers.emplace("Authorization", std::string("Bearer ") + token);
  }
  const auto res = client.Post(url.path, headers,
                               chat_request_body(endpoint.model_name, prompt).dump(),
                               "application/json");
  if (!res) throw std::runtime_error("request failed: " + httplib::to_string(res.error()));
  if (res->status != 200) throw std::runtime_error("HTTP status " + std::to_string(res->status));
  return chat_response_content(res->body);
}

}  // namespace prefaudit::themes
