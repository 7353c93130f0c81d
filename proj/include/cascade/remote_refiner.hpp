#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>

#include "cascade/refiner.hpp"
#include "json.hpp"

namespace cascade {

struct EndpointConfig {
  std::string url;  // e.g. http://127.0.0.1:8080/v1/chat/completions
  std::string model;
  int max_tokens = 64;
  int timeout_ms = 30000;
  int max_retries = 3;
  double backoff_base_ms = 200.0;
  double backoff_max_ms = 10000.0;
  bool inline_images = false;  // local files become base64 data URLs
  std::string api_key;         // sent as a bearer token when non-empty
};

/// Environment variable consulted for the endpoint's API key.
inline constexpr const char* kApiKeyEnv = "CASCADE_API_KEY";

/// Chat-completion request body for one bundle.
nlohmann::json build_chat_request(const PromptBundle& bundle, const EndpointConfig& config);

/// choices[0].message.content; throws RefinerError(kMalformedResponse).
std::string extract_chat_content(const std::string& body);

/// Image reference as sent on the wire: URLs pass through; with inline_images
/// an existing local file is embedded as a data URL.
std::string image_url_for(const std::string& ref, bool inline_images);

/// HTTP chat-completion backend with bounded retries. Transport errors,
/// timeouts, 429 and 5xx are retried with exponential backoff and equal
/// jitter; other statuses and unparseable bodies fail immediately.
class RemoteRefiner final : public Refiner {
 public:
  using Sleeper = std::function<void(double ms)>;

  explicit RemoteRefiner(EndpointConfig config, std::shared_ptr<ReplayRecorder> recorder = nullptr);

  RefinerResponse refine(const RefineRequest& request) override;
  [[nodiscard]] std::string_view name() const override { return "remote"; }

  /// Replaces the real sleep between attempts (tests).
  void set_sleeper(Sleeper sleeper) { sleeper_ = std::move(sleeper); }

  [[nodiscard]] const EndpointConfig& config() const noexcept { return config_; }

 private:
  EndpointConfig config_;
  std::string origin_;
  std::string path_;
  std::shared_ptr<ReplayRecorder> recorder_;
  Sleeper sleeper_;
};

}  // namespace cascade
