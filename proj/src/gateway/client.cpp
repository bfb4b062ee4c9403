// Copyright 2026 The fmcgm Authors
// SPDX-License-Identifier: Apache-2.0

#include "fmcgm/gateway/client.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <thread>

#include "httplib.h"

#include "fmcgm/error.hpp"
#include "fmcgm/util/codec.hpp"
#include "fmcgm/util/url.hpp"

namespace fmcgm {

using nlohmann::json;
using std::chrono::milliseconds;

milliseconds RetryPolicy::delay_before(int retry) const {
  double ms = static_cast<double>(base_delay.count()) * std::pow(factor, retry - 1);
  return milliseconds(static_cast<long long>(std::llround(ms)));
}

Endpoint Endpoint::from_env(Endpoint defaults) {
  if (const char* url = std::getenv("FMCGM_VLM_BASE_URL"); url && *url) defaults.base_url = url;
  if (const char* key = std::getenv("FMCGM_VLM_API_KEY"); key && *key) defaults.api_key = key;
  return defaults;
}

// ---- HTTP transport ---------------------------------------------------------

HttpChatTransport::HttpChatTransport(Endpoint endpoint) : endpoint_(std::move(endpoint)) {
  (void)util::split_url(endpoint_.base_url);
}

json HttpChatTransport::build_body(const ModelRequest& req) {
  json messages = json::array();
  if (!req.system_text.empty()) {
    messages.push_back({{"role", "system"}, {"content", req.system_text}});
  }
  json content = json::array();
  content.push_back({{"type", "text"}, {"text", req.user_text}});
  if (req.image) {
    std::string url = "data:" + req.image->media_type + ";base64," +
                      util::base64_encode(req.image->bytes);
    content.push_back({{"type", "image_url"}, {"image_url", {{"url", std::move(url)}}}});
  }
  messages.push_back({{"role", "user"}, {"content", std::move(content)}});
  return {{"model", req.model_name},
          {"messages", std::move(messages)},
          {"temperature", req.temperature},
          {"max_tokens", req.max_tokens},
          {"stream", false}};
}

TransportReply HttpChatTransport::parse_body(const std::string& body) {
  auto j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw Error(ErrorCode::TransportError, "chat-completions response is not JSON");
  }
  TransportReply reply{200, {}, std::nullopt, {}};
  try {
    const json& content = j.at("choices").at(0).at("message").at("content");
    if (content.is_string()) {
      reply.raw_text = content.get<std::string>();
    } else if (content.is_array()) {
      for (const auto& part : content) {
        if (part.value("type", "") == "text") reply.raw_text += part.value("text", "");
      }
    } else {
      throw Error(ErrorCode::TransportError, "message.content has an unexpected kind");
    }
    if (auto u = j.find("usage"); u != j.end() && u->is_object()) {
      reply.token_usage = TokenUsage{u->value("prompt_tokens", 0), u->value("completion_tokens", 0)};
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::TransportError, std::string("malformed chat-completions response: ") +
                                               e.what());
  }
  return reply;
}

TransportReply HttpChatTransport::send(const ModelRequest& req, milliseconds timeout) {
  const auto url = util::split_url(endpoint_.base_url);
  httplib::Client cli(url.scheme_host_port);
  auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
  auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
  cli.set_connection_timeout(secs.count(), usecs.count());
  cli.set_read_timeout(secs.count(), usecs.count());
  cli.set_write_timeout(secs.count(), usecs.count());
  httplib::Headers headers;
  if (!endpoint_.api_key.empty()) headers.emplace("Authorization", "Bearer " + endpoint_.api_key);

  const auto started = std::chrono::steady_clock::now();
  auto res = cli.Post(url.path_prefix + "/chat/completions", headers, build_body(req).dump(),
                      "application/json");
  if (!res) {
    const bool deadline = std::chrono::steady_clock::now() - started >= timeout;
    if (res.error() == httplib::Error::ConnectionTimeout || deadline) {
      throw Error(ErrorCode::Timeout, "request to " + endpoint_.base_url + " timed out");
    }
    throw Error(ErrorCode::TransportError, "request to " + endpoint_.base_url +
                                               " failed: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) return TransportReply{res->status, {}, std::nullopt, res->body};
  return parse_body(res->body);
}

// ---- fixtures ---------------------------------------------------------------

FixtureTransport::FixtureTransport(std::filesystem::path dir) : dir_(std::move(dir)) {}

TransportReply FixtureTransport::send(const ModelRequest& req, milliseconds /*timeout*/) {
  const std::string n = std::to_string(req.attempt + 1);
  for (const auto& name : {req.tag + "." + n + ".json", req.tag + "." + n + ".txt",
                           req.tag + ".json", req.tag + ".txt"}) {
    auto path = dir_ / name;
    if (std::filesystem::is_regular_file(path)) {
      return TransportReply{200, util::read_text_file(path), std::nullopt, {}};
    }
  }
  return TransportReply{404, {}, std::nullopt, "no fixture for tag '" + req.tag + "'"};
}

// ---- cache ------------------------------------------------------------------

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
}

std::string ResponseCache::key(const ModelRequest& req) {
  char temp[64];
  std::snprintf(temp, sizeof temp, "%.17g", req.temperature);
  std::string canon;
  auto field = [&](const std::string& s) {
    canon += std::to_string(s.size());
    canon += ':';
    canon += s;
  };
  field(req.model_name);
  field(req.system_text);
  field(req.user_text);
  field(req.image ? util::sha256_hex(req.image->bytes) : std::string{});
  field(temp);
  field(std::to_string(req.max_tokens));
  if (req.attempt > 0) field("retry" + std::to_string(req.attempt));
  return util::sha256_hex(canon);
}

std::optional<std::string> ResponseCache::load(const std::string& key) const {
  auto path = dir_ / (key + ".json");
  if (!std::filesystem::is_regular_file(path)) return std::nullopt;
  auto j = json::parse(util::read_text_file(path), nullptr, false);
  if (j.is_discarded() || !j.contains("raw_text") || !j["raw_text"].is_string()) return std::nullopt;
  return j["raw_text"].get<std::string>();
}

void ResponseCache::store(const std::string& key, const ModelRequest& req,
                          const std::string& raw_text) const {
  json j = {{"model_name", req.model_name},
            {"tag", req.tag},
            {"attempt", req.attempt},
            {"temperature", req.temperature},
            {"max_tokens", req.max_tokens},
            {"raw_text", raw_text}};
  util::write_file_atomic(dir_ / (key + ".json"), j.dump(2));
}

// ---- client -----------------------------------------------------------------

VlmClient::VlmClient(std::shared_ptr<ChatTransport> transport, RetryPolicy policy,
                     std::optional<std::filesystem::path> cache_dir, int max_in_flight)
    : transport_(std::move(transport)),
      policy_(std::move(policy)),
      in_flight_(std::max(1, max_in_flight)) {
  if (!transport_) throw Error(ErrorCode::ConfigError, "VlmClient needs a transport");
  if (policy_.max_attempts < 1) throw Error(ErrorCode::ConfigError, "max_attempts must be >= 1");
  if (!policy_.sleep) policy_.sleep = [](milliseconds d) { std::this_thread::sleep_for(d); };
  if (cache_dir) cache_.emplace(*cache_dir);
}

ClientStats VlmClient::stats() const {
  std::lock_guard lock(stats_mu_);
  return stats_;
}

ModelResponse VlmClient::complete(const ModelRequest& req) {
  if (req.max_tokens < 1) throw Error(ErrorCode::InvalidArgument, "max_tokens must be >= 1");
  if (!(req.temperature >= 0.0 && req.temperature <= 2.0)) {
    throw Error(ErrorCode::InvalidArgument, "temperature must be in [0, 2]");
  }

  const auto started = std::chrono::steady_clock::now();
  std::string key;
  if (cache_) {
    key = ResponseCache::key(req);
    if (auto hit = cache_->load(key)) {
      std::lock_guard lock(stats_mu_);
      ++stats_.cache_hits;
      return ModelResponse{*hit, std::nullopt, milliseconds(0), true};
    }
  }

  in_flight_.acquire();
  struct Release {
    std::counting_semaphore<1024>& s;
    ~Release() { s.release(); }
  } release{in_flight_};

  std::string last_failure;
  for (int attempt = 1; attempt <= policy_.max_attempts; ++attempt) {
    if (attempt > 1) {
      policy_.sleep(policy_.delay_before(attempt - 1));
      std::lock_guard lock(stats_mu_);
      ++stats_.retries;
    }
    {
      std::lock_guard lock(stats_mu_);
      ++stats_.transport_calls;
    }
    TransportReply reply;
    try {
      reply = transport_->send(req, policy_.timeout);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::TransportError) throw;
      last_failure = e.what();
      continue;
    }
    if (reply.status == 200) {
      if (cache_) cache_->store(key, req, reply.raw_text);
      auto latency = std::chrono::duration_cast<milliseconds>(std::chrono::steady_clock::now() -
                                                              started);
      return ModelResponse{std::move(reply.raw_text), reply.token_usage, latency, false};
    }
    if (reply.status == 401 || reply.status == 403) {
      throw Error(ErrorCode::AuthError, "endpoint rejected credentials (HTTP " +
                                            std::to_string(reply.status) + ")");
    }
    if (reply.status == 429 || reply.status >= 500) {
      last_failure = "HTTP " + std::to_string(reply.status);
      continue;
    }
    throw Error(ErrorCode::TransportError,
                "HTTP " + std::to_string(reply.status) + ": " + reply.error_body);
  }
  throw Error(ErrorCode::RetriesExhausted, std::to_string(policy_.max_attempts) +
                                               " attempts failed; last: " + last_failure);
}

}  // namespace fmcgm
