// Copyright 2026 The fmcgm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>

#include "fmcgm/error.hpp"
#include "fmcgm/util/image.hpp"
#include "json.hpp"

namespace fmcgm {

struct ModelRequest {
  std::string model_name;
  std::string system_text;
  std::string user_text;
  std::optional<EncodedImage> image;
  double temperature = 0.0;
  int max_tokens = 1;
  /// Not sent on the wire. Names the call site ("<image_id>/extract") so
  /// fixture replay and logs can find it.
  std::string tag;
  /// Caller-level retry index; part of the cache key so a retried request
  /// does not replay the cached answer it is retrying.
  int attempt = 0;
};

struct TokenUsage {
  int prompt_tokens = 0;
  int completion_tokens = 0;
};

struct ModelResponse {
  std::string raw_text;
  std::optional<TokenUsage> token_usage;
  std::chrono::milliseconds latency{0};
  bool from_cache = false;
};

struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds base_delay{1000};
  double factor = 2.0;
  std::chrono::milliseconds timeout{120000};
  /// Injected for tests; defaults to std::this_thread::sleep_for.
  std::function<void(std::chrono::milliseconds)> sleep;

  /// Delay before retry number `retry` (1-based): base * factor^(retry-1).
  [[nodiscard]] std::chrono::milliseconds delay_before(int retry) const;
};

/// What a transport saw for one attempt. `status` follows HTTP semantics;
/// for 200 the transport has already pulled the assistant text out.
struct TransportReply {
  int status = 0;
  std::string raw_text;
  std::optional<TokenUsage> token_usage;
  std::string error_body;
};

class ChatTransport {
 public:
  virtual ~ChatTransport() = default;
  /// Throws TransportError on connection failure and Timeout on deadline.
  virtual TransportReply send(const ModelRequest& req, std::chrono::milliseconds timeout) = 0;
  /// True when the transport talks to the network.
  [[nodiscard]] virtual bool remote() const noexcept = 0;
};

struct Endpoint {
  std::string base_url;
  std::string api_key;

  /// FMCGM_VLM_BASE_URL / FMCGM_VLM_API_KEY override the given values.
  static Endpoint from_env(Endpoint defaults = {});
};

/// OpenAI-compatible POST {base}/chat/completions; images go as base64 data URLs.
class HttpChatTransport final : public ChatTransport {
 public:
  explicit HttpChatTransport(Endpoint endpoint);
  TransportReply send(const ModelRequest& req, std::chrono::milliseconds timeout) override;
  [[nodiscard]] bool remote() const noexcept override { return true; }

  /// Request body as sent on the wire.
  static nlohmann::json build_body(const ModelRequest& req);
  /// Assistant text (and usage) from a chat-completions response body.
  static TransportReply parse_body(const std::string& body);

 private:
  Endpoint endpoint_;
};

/// Replays canned model outputs from a directory.
///
/// For request tag `T` and attempt `n` the first existing file wins:
/// `T.<n+1>.json`, `T.<n+1>.txt`, `T.json`, `T.txt`. A missing fixture is a
/// 404 reply. File contents are returned verbatim as the model's text.
class FixtureTransport final : public ChatTransport {
 public:
  explicit FixtureTransport(std::filesystem::path dir);
  TransportReply send(const ModelRequest& req, std::chrono::milliseconds timeout) override;
  [[nodiscard]] bool remote() const noexcept override { return false; }

 private:
  std::filesystem::path dir_;
};

/// Content-addressed response store: one `<sha256>.json` file per request.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);

  /// sha256 over (model, system, user, image digest, temperature, max_tokens[, attempt]).
  static std::string key(const ModelRequest& req);

  [[nodiscard]] std::optional<std::string> load(const std::string& key) const;
  void store(const std::string& key, const ModelRequest& req, const std::string& raw_text) const;
  [[nodiscard]] const std::filesystem::path& dir() const noexcept { return dir_; }

 private:
  std::filesystem::path dir_;
};

struct ClientStats {
  int transport_calls = 0;
  int cache_hits = 0;
  int retries = 0;
};

/// Shareable across threads. Applies the cache, the in-flight limit and the
/// retry policy around a transport.
class VlmClient {
 public:
  VlmClient(std::shared_ptr<ChatTransport> transport, RetryPolicy policy = {},
            std::optional<std::filesystem::path> cache_dir = std::nullopt,
            int max_in_flight = 4);

  /// Retries transport errors, 429 and 5xx with exponential backoff.
  /// Errors: AuthError (401/403), TransportError (other 4xx, bad body),
  /// Timeout, RetriesExhausted.
  ModelResponse complete(const ModelRequest& req);

  [[nodiscard]] ClientStats stats() const;
  [[nodiscard]] const ChatTransport& transport() const noexcept { return *transport_; }

 private:
  std::shared_ptr<ChatTransport> transport_;
  RetryPolicy policy_;
  std::optional<ResponseCache> cache_;
  std::counting_semaphore<1024> in_flight_;
  mutable std::mutex stats_mu_;
  ClientStats stats_;
};

}  // namespace fmcgm
