#pragma once

// Multi-endpoint theme labelling of prompts. Each endpoint labels a prompt
// independently; only labels every endpoint agrees on are kept.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "prefaudit/ingest.hpp"

namespace prefaudit::themes {

struct EndpointConfig {
  std::string endpoint_id;
  std::string base_url;
  /// Name of the environment variable holding the bearer token.
  std::string auth_env_var;
  std::string model_name;
};

/// JSON array of {endpoint_id, base_url, auth_env_var, model_name}, sorted by
/// endpoint_id. Throws ConfigError on duplicates or missing fields.
std::vector<EndpointConfig> load_endpoints(const std::filesystem::path& path);
std::vector<EndpointConfig> endpoints_from_json(const nlohmann::json& j);

struct LabelRequest {
  std::string prompt_text;
  std::vector<std::string> label_list;
  std::string endpoint_id;
};

struct LabelResponse {
  std::string endpoint_id;
  std::set<std::string> labels;
  std::string raw_payload;
};

/// Fills the labelling template. The prompt is JSON-string escaped inside its
/// quotes; labels are listed one per line. Throws ConfigError on empty input
/// or duplicate labels.
std::string render_prompt(const std::string& prompt_text, std::span<const std::string> label_list);

struct MalformedPayload : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Accepts exactly {"labels": [strings from label_list]}. Markdown code fences
/// around the object are tolerated; anything else throws MalformedPayload.
std::set<std::string> parse_label_payload(const std::string& payload,
                                          std::span<const std::string> label_list);

/// Sends a rendered prompt to one endpoint and returns the model's text reply.
/// Implementations must be safe to call from several threads.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual std::string complete(const EndpointConfig& endpoint, const std::string& prompt) = 0;
};

struct RetryPolicy {
  std::size_t max_retries = 2;
  std::chrono::milliseconds base_delay{250};
  /// Backoff hook; sleeps by default. Tests inject a no-op.
  std::function<void(std::chrono::milliseconds)> sleep;
};

struct EndpointResult {
  std::string endpoint_id;
  std::set<std::string> labels;
  std::size_t attempts = 0;
  bool ok = false;
  std::string error;
};

struct LabelOutcome {
  std::set<std::string> labels;
  /// In endpoint_id order.
  std::vector<EndpointResult> endpoints;
  std::vector<std::string> warnings;
};

struct AllEndpointsFailed : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Intersection of the endpoints' label sets. An endpoint still failing after
/// the retries contributes the empty set. Throws ConfigError with fewer than
/// three endpoints and AllEndpointsFailed when none succeeds.
LabelOutcome label_prompt(const std::string& prompt_text, std::span<const std::string> label_list,
                          std::span<const EndpointConfig> endpoints, Transport& transport,
                          const RetryPolicy& retry = {});

/// prompt text -> unanimous labels.
class LabelCache {
 public:
  LabelCache() = default;
  /// A missing file is an empty cache.
  static LabelCache load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  const std::set<std::string>* find(const std::string& prompt) const;
  void put(const std::string& prompt, std::set<std::string> labels);
  std::size_t size() const { return entries_.size(); }

 private:
  std::map<std::string, std::set<std::string>> entries_;
};

enum class PromptStatus { labeled, cached, failed };
const char* to_string(PromptStatus s);

struct PromptReport {
  std::string item_id;
  PromptStatus status = PromptStatus::labeled;
  std::vector<std::string> warnings;
  std::string error;
};

struct CorpusResult {
  /// item_id -> metadata carrying only theme_labels, for the labelled items.
  std::map<std::string, ItemMetadata> patch;
  std::vector<PromptReport> prompts;
  std::size_t n_failed = 0;
};

/// Labels each distinct item's prompt, skipping prompts already in `cache`
/// and adding fresh results to it. At most `concurrency_limit` requests are
/// in flight.
CorpusResult label_corpus(const Dataset& dataset, std::span<const std::string> label_list,
                          std::span<const EndpointConfig> endpoints, Transport& transport,
                          std::size_t concurrency_limit, LabelCache& cache,
                          const RetryPolicy& retry = {});

nlohmann::json to_json(const CorpusResult& r);

/// OpenAI-compatible chat-completions transport over HTTP(S).
class HttpTransport : public Transport {
 public:
  explicit HttpTransport(std::chrono::seconds timeout = std::chrono::seconds(60))
      : timeout_(timeout) {}
  std::string complete(const EndpointConfig& endpoint, const std::string& prompt) override;

 private:
  std::chrono::seconds timeout_;
};

/// Request body for a single-turn chat completion at temperature 0.
nlohmann::json chat_request_body(const std::string& model, const std::string& prompt);
/// choices[0].message.content of a chat-completions response body.
std::string chat_response_content(const std::string& body);

struct UrlParts {
  std::string origin;  // scheme://host[:port]
  std::string path;    // request path, never empty
};
/// Splits a base URL and appends "/chat/completions" to its path.
UrlParts chat_completions_url(const std::string& base_url);

}  // namespace prefaudit::themes
