#include "cascade/remote_refiner.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <thread>

#include "httplib.h"

namespace cascade {
namespace {

using Clock = std::chrono::steady_clock;

std::string base64(const std::string& bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(bytes.data()), static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::string mime_for(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".png") return "image/png";
  if (ext == ".gif") return "image/gif";
  if (ext == ".webp") return "image/webp";
  return "image/jpeg";
}

bool retryable_status(int status) { return status == 429 || status >= 500; }

}  // namespace

std::string image_url_for(const std::string& ref, bool inline_images) {
  if (ref.starts_with("http://") || ref.starts_with("https://") || ref.starts_with("data:")) return ref;
  if (inline_images) {
    std::error_code ec;
    if (std::filesystem::is_regular_file(ref, ec)) {
      std::ifstream in(ref, std::ios::binary);
      std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
      return "data:" + mime_for(ref) + ";base64," + base64(bytes);
    }
  }
  return ref;
}

nlohmann::json build_chat_request(const PromptBundle& bundle, const EndpointConfig& config) {
  nlohmann::json messages = nlohmann::json::array();
  for (const auto& m : bundle.messages) {
    nlohmann::json content = nlohmann::json::array();
    for (const auto& p : m.parts) {
      if (p.kind == ContentPart::Kind::kText) {
        content.push_back({{"type", "text"}, {"text", p.value}});
      } else {
        content.push_back(
            {{"type", "image_url"}, {"image_url", {{"url", image_url_for(p.value, config.inline_images)}}}});
      }
    }
    messages.push_back({{"role", m.role}, {"content", std::move(content)}});
  }
  return {{"model", config.model}, {"messages", std::move(messages)}, {"max_tokens", config.max_tokens}};
}

std::string extract_chat_content(const std::string& body) {
  try {
    const auto doc = nlohmann::json::parse(body);
    const auto& content = doc.at("choices").at(0).at("message").at("content");
    if (content.is_string()) return content.get<std::string>();
    // Some servers return content as a list of parts.
    std::string text;
    for (const auto& part : content)
      if (part.value("type", "") == "text") text += part.at("text").get<std::string>();
    return text;
  } catch (const nlohmann::json::exception& e) {
    throw RefinerError(RefinerError::Kind::kMalformedResponse, std::string("malformed response body: ") + e.what());
  }
}

RemoteRefiner::RemoteRefiner(EndpointConfig config, std::shared_ptr<ReplayRecorder> recorder)
    : config_(std::move(config)), recorder_(std::move(recorder)) {
  const auto scheme_end = config_.url.find("://");
  if (scheme_end == std::string::npos) throw ValidationError("endpoint url must include a scheme: " + config_.url);
  const auto path_start = config_.url.find('/', scheme_end + 3);
  origin_ = config_.url.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : config_.url.substr(path_start);
  if (config_.max_retries < 0) throw ValidationError("max_retries must be non-negative");
  if (config_.timeout_ms <= 0) throw ValidationError("timeout_ms must be positive");
  sleeper_ = [](double ms) { std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(ms)); };
}

RefinerResponse RemoteRefiner::refine(const RefineRequest& request) {
  const auto body = build_chat_request(request.bundle, config_).dump();
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

  httplib::Client client(origin_);
  const auto timeout = std::chrono::milliseconds(config_.timeout_ms);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);

  std::mt19937_64 jitter(request.seed ^ 0x6a6974746572ULL);
  double elapsed_ms = 0.0;
  double backoff_ms = 0.0;
  RefinerError last(RefinerError::Kind::kTransport, "no attempt made");

  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      const double cap = std::min(config_.backoff_max_ms, config_.backoff_base_ms * std::pow(2.0, attempt - 1));
      const double delay = cap / 2 + std::uniform_real_distribution<double>(0.0, cap / 2)(jitter);
      sleeper_(delay);
      backoff_ms += delay;
    }
    const auto start = Clock::now();
    auto res = client.Post(path_, headers, body, "application/json");
    const double took = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
    elapsed_ms += took;

    if (!res) {
      const auto err = res.error();
      const bool timed_out = err == httplib::Error::ConnectionTimeout ||
                             (err == httplib::Error::Read && took >= static_cast<double>(config_.timeout_ms));
      last = RefinerError(timed_out ? RefinerError::Kind::kTimeout : RefinerError::Kind::kTransport,
                          "request to " + config_.url + " failed: " + httplib::to_string(err));
      continue;
    }
    if (res->status < 200 || res->status >= 300) {
      last = RefinerError(RefinerError::Kind::kHttpStatus,
                          "endpoint returned HTTP " + std::to_string(res->status));
      if (retryable_status(res->status)) continue;
      throw last;
    }

    RefinerResponse out;
    out.text = extract_chat_content(res->body);
    out.latency_ms = elapsed_ms + backoff_ms;
    out.backend_meta = {{"attempts", std::to_string(attempt + 1)}, {"status", std::to_string(res->status)}};
    if (recorder_) {
      recorder_->record({std::string(request.item_id), std::string(request.digest), out.text, out.latency_ms});
    }
    return out;
  }
  throw RefinerError(last.kind(), std::string(last.what()) + " (after " + std::to_string(config_.max_retries) +
                                      " retries)");
}

}  // namespace cascade
