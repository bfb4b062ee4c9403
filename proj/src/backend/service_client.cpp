// Copyright 2026 The fmcgm Authors
// SPDX-License-Identifier: Apache-2.0

#include "fmcgm/backend/service_client.hpp"

#include <cmath>

#include "httplib.h"

#include "fmcgm/error.hpp"
#include "fmcgm/util/codec.hpp"
#include "fmcgm/util/url.hpp"

namespace fmcgm {

using nlohmann::json;

namespace {

httplib::Client make_client(const util::SplitUrl& url, std::chrono::milliseconds timeout) {
  httplib::Client cli(url.scheme_host_port);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
  cli.set_connection_timeout(secs.count(), usecs.count());
  cli.set_read_timeout(secs.count(), usecs.count());
  cli.set_write_timeout(secs.count(), usecs.count());
  return cli;
}

json handle(const httplib::Result& res, const std::string& path) {
  if (!res) {
    throw Error(ErrorCode::ServiceUnavailable, path + " unreachable",
                httplib::to_string(res.error()));
  }
  if (res->status == 503) throw Error(ErrorCode::ServiceUnavailable, path + " returned 503", res->body);
  if (res->status != 200) {
    throw Error(ErrorCode::BackendError, path + " returned " + std::to_string(res->status), res->body);
  }
  try {
    return json::parse(res->body);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::BackendError, path + " returned invalid JSON", e.what());
  }
}

}  // namespace

ServiceClient::ServiceClient(std::string base_url, std::chrono::milliseconds timeout)
    : base_url_(std::move(base_url)), timeout_(timeout) {
  (void)util::split_url(base_url_);
}

json ServiceClient::get(const std::string& path) const {
  const auto url = util::split_url(base_url_);
  auto cli = make_client(url, timeout_);
  return handle(cli.Get(url.path_prefix + path), path);
}

json ServiceClient::post(const std::string& path, const json& body) const {
  const auto url = util::split_url(base_url_);
  auto cli = make_client(url, timeout_);
  return handle(cli.Post(url.path_prefix + path, body.dump(), "application/json"), path);
}

bool ServiceClient::healthy() const {
  try {
    (void)get("/v1/health");
    return true;
  } catch (const Error&) {
    return false;
  }
}

double ServiceClient::lpips(const Image& a, const Image& b) const {
  if (a.width != b.width || a.height != b.height) {
    throw Error(ErrorCode::InvalidArgument, "LPIPS needs images of equal dimensions");
  }
  const json body = {{"image_a_png_b64", util::base64_encode(encode_png(a))},
                     {"image_b_png_b64", util::base64_encode(encode_png(b))}};
  const json reply = post("/v1/lpips", body);
  if (!reply.contains("lpips") || !reply.at("lpips").is_number()) {
    throw Error(ErrorCode::BackendError, "/v1/lpips reply lacks a numeric 'lpips'");
  }
  const double d = reply.at("lpips").get<double>();
  if (!std::isfinite(d) || d < 0.0) throw Error(ErrorCode::BackendError, "/v1/lpips returned a negative distance");
  return d;
}

}  // namespace fmcgm
