// Copyright 2026 The fmcgm Authors
// SPDX-License-Identifier: Apache-2.0

#include <atomic>
#include <cmath>
#include <random>

#include "doctest.h"
#include "fmcgm/backend/remote_backend.hpp"
#include "fmcgm/backend/service_client.hpp"
#include "fmcgm/backend/toy_backend.hpp"
#include "fmcgm/backend/wire.hpp"
#include "fmcgm/csg/edit.hpp"
#include "fmcgm/util/codec.hpp"
#include "test_support.hpp"

using namespace fmcgm;
using fmcgm::testing::random_latent;
using fmcgm::testing::StubServer;
using fmcgm::testing::two_concept_world;
using nlohmann::json;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an fmcgm::Error");
  return ErrorCode::IoError;
}

float to_f32(double v) { return static_cast<float>(v); }

/// Serves a toy backend over the diffusion-service wire protocol.
struct ToyService {
  explicit ToyService(ToyWorld world) : toy(std::move(world)) {}

  void install(httplib::Server& s) {
    s.Get("/v1/health", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(R"({"status":"ok"})", "application/json");
    });
    s.Get("/v1/capabilities", [this](const httplib::Request&, httplib::Response& res) {
      res.set_content(wire::encode_capabilities(toy.capabilities()).dump(), "application/json");
    });
    s.Post("/v1/predict_noise", [this](const httplib::Request& req, httplib::Response& res) {
      ++predict_calls;
      if (fail_predict) {
        res.status = 503;
        return;
      }
      const json j = json::parse(req.body);
      last_session = j.at("session").get<std::string>();
      const Latent x = wire::decode_latent(j.at("latent"));
      const auto prompts = j.at("prompts").get<std::vector<std::string>>();
      auto out = toy.batch_predict(x, j.at("timestep").get<int>(), prompts);
      if (drop_output) out.pop_back();
      if (wrong_shape) out[0].eps = Latent::zeros({1, 2, 2});
      res.set_content(wire::predict_response(out).dump(), "application/json");
    });
    s.Post("/v1/encode", [this](const httplib::Request& req, httplib::Response& res) {
      const json j = json::parse(req.body);
      const Image img = decode_image(util::base64_decode(j.at("image_png_b64").get<std::string>()));
      res.set_content(json{{"latent", wire::encode_latent(toy.encode(img))}}.dump(),
                      "application/json");
    });
    s.Post("/v1/decode", [this](const httplib::Request& req, httplib::Response& res) {
      const json j = json::parse(req.body);
      const Image img = toy.decode(wire::decode_latent(j.at("latent")));
      res.set_content(json{{"image_png_b64", util::base64_encode(encode_png(img))}}.dump(),
                      "application/json");
    });
    s.Post("/v1/lpips", [](const httplib::Request& req, httplib::Response& res) {
      const json j = json::parse(req.body);
      const Image a = decode_image(util::base64_decode(j.at("image_a_png_b64").get<std::string>()));
      const Image b = decode_image(util::base64_decode(j.at("image_b_png_b64").get<std::string>()));
      double diff = 0;
      for (std::size_t i = 0; i < a.pixels.size(); ++i) {
        diff += std::abs(static_cast<double>(a.pixels[i]) - static_cast<double>(b.pixels[i]));
      }
      res.set_content(json{{"lpips", diff / (255.0 * static_cast<double>(a.pixels.size()))}}.dump(),
                      "application/json");
    });
  }

  ToyBackend toy;
  std::atomic<int> predict_calls{0};
  std::atomic<bool> fail_predict{false};
  std::atomic<bool> drop_output{false};
  std::atomic<bool> wrong_shape{false};
  std::string last_session;
};

}  // namespace

TEST_CASE("float32 packing is lossless for float32 values") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 3.0);
  std::vector<double> v(1000);
  for (auto& x : v) x = to_f32(n(rng));
  v.push_back(0.0);
  v.push_back(-0.0);
  v.push_back(static_cast<double>(std::numeric_limits<float>::max()));
  const auto back = wire::unpack_f32(wire::pack_f32(v), v.size());
  REQUIRE(back.size() == v.size());
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(back[i] == v[i]);
  // Little-endian 1.0f.
  CHECK(util::base64_decode(wire::pack_f32(std::vector<double>{1.0})) ==
        util::Bytes{0x00, 0x00, 0x80, 0x3f});
  CHECK(code_of([&] { (void)wire::unpack_f32(wire::pack_f32(v), v.size() + 1); }) ==
        ErrorCode::ShapeMismatch);
}

TEST_CASE("latent and attention wire round trips") {
  std::mt19937_64 rng(12);
  Latent x = random_latent(rng, {3, 4, 5});
  for (auto& v : x.flat()) v = to_f32(v);
  const json j = wire::encode_latent(x);
  CHECK(j["shape"] == json::array({3, 4, 5}));
  CHECK(wire::decode_latent(j) == x);
  const LatentShape other{3, 5, 4};
  CHECK(code_of([&] { (void)wire::decode_latent(j, &other); }) == ErrorCode::ShapeMismatch);
  CHECK(code_of([] { (void)wire::decode_latent(json{{"shape", {1, 1}}, {"data_b64", ""}}); }) ==
        ErrorCode::BackendError);

  AttentionMap attn{{2, 3}, {TokenMap{0, 1, Grid::Constant(2, 3, 0.5)}, TokenMap{1, 3, Grid::Zero(2, 3)}}};
  const AttentionMap back = wire::decode_attention(wire::encode_attention(attn));
  CHECK(back.resolution == attn.resolution);
  REQUIRE(back.token_maps.size() == 2);
  CHECK(back.token_maps[1].end == 3);
  CHECK((back.token_maps[0].grid == attn.token_maps[0].grid).all());

  AttentionMap negative = attn;
  negative.token_maps[0].grid(0, 0) = -1.0;
  CHECK(code_of([&] { (void)wire::decode_attention(wire::encode_attention(negative)); }) ==
        ErrorCode::BackendError);
}

TEST_CASE("capabilities wire forms") {
  ToyBackend toy(two_concept_world());
  const auto caps = wire::decode_capabilities(wire::encode_capabilities(toy.capabilities()));
  CHECK(caps.latent_shape == toy.capabilities().latent_shape);
  CHECK(caps.attention_resolution == toy.capabilities().attention_resolution);
  CHECK(caps.schedule.steps() == 1000);
  CHECK(std::abs(caps.schedule.alpha_bar(1000) - toy.capabilities().schedule.alpha_bar(1000)) < 1e-15);

  const json by_kind = {{"model", "sd"},
                        {"latent_shape", {4, 8, 8}},
                        {"attention_resolution", {4, 4}},
                        {"schedule", {{"kind", "scaled_linear"}, {"steps", 1000}}}};
  const auto k = wire::decode_capabilities(by_kind);
  CHECK(k.schedule.alpha_bar(1) == doctest::Approx(1.0 - 0.00085));

  json by_bars = by_kind;
  by_bars["schedule"] = {{"alphas_cumprod", {0.9, 0.45}}};
  CHECK(wire::decode_capabilities(by_bars).schedule.alphas()[1] == doctest::Approx(0.5));

  json bad = by_kind;
  bad.erase("latent_shape");
  CHECK(code_of([&] { (void)wire::decode_capabilities(bad); }) == ErrorCode::BackendError);
}

TEST_CASE("remote backend against a stub diffusion service") {
  ToyService svc(two_concept_world());
  StubServer server([&](httplib::Server& s) { svc.install(s); });
  RemoteBackend remote({server.url(), "sess-1"});
  CHECK(remote.capabilities().latent_shape == svc.toy.capabilities().latent_shape);
  CHECK(remote.service().healthy());

  std::mt19937_64 rng(6);
  const Latent x = random_latent(rng, svc.toy.world().latent_shape);
  const std::vector<std::string> prompts{"", "red hat", "blue scarf"};
  const auto got = remote.batch_predict(x, 321, prompts);
  const auto want = svc.toy.batch_predict(x.cast<float>().cast<double>(), 321, prompts);
  REQUIRE(got.size() == 3);
  CHECK(svc.last_session == "sess-1");
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t k = 0; k < got[i].eps.flat().size(); ++k) {
      CHECK(got[i].eps.flat()[k] == static_cast<double>(to_f32(want[i].eps.flat()[k])));
    }
    REQUIRE(got[i].attention.has_value() == want[i].attention.has_value());
    if (want[i].attention) {
      CHECK(got[i].attention->token_maps.size() == want[i].attention->token_maps.size());
    }
  }

  const int before = svc.predict_calls;
  CHECK(remote.batch_predict(x, 321, std::vector<std::string>{}).empty());
  CHECK(svc.predict_calls == before);

  SUBCASE("inversion round trip through the service") {
    EditConfig cfg;
    cfg.skip_ratio = 0.0;
    cfg.inversion_steps = 100;
    const Latent x0 = random_latent(rng, svc.toy.world().latent_shape, 0.5);
    const auto inv = invert(x0, "red hat", cfg, remote);
    const Latent rec = denoise(inv, source_epsilon(remote, "red hat", cfg));
    CHECK(mse(rec, x0) <= 1e-4);
  }

  SUBCASE("encode and decode") {
    Image img{32, 32, 1, std::vector<std::uint8_t>(32 * 32, 0)};
    const Latent z = remote.encode(img);
    CHECK(z.flat()[0] == doctest::Approx(-1.0));
    const Image back = remote.decode(z);
    CHECK(back.width == 128);
    CHECK(back.pixels[0] == 0);
  }

  SUBCASE("service errors") {
    svc.fail_predict = true;
    CHECK(code_of([&] { (void)remote.predict(x, 5, "red hat"); }) == ErrorCode::ServiceUnavailable);
    svc.fail_predict = false;
    svc.drop_output = true;
    CHECK(code_of([&] { (void)remote.batch_predict(x, 5, prompts); }) == ErrorCode::BackendError);
    svc.drop_output = false;
    svc.wrong_shape = true;
    CHECK(code_of([&] { (void)remote.batch_predict(x, 5, prompts); }) == ErrorCode::ShapeMismatch);
    svc.wrong_shape = false;
    CHECK(code_of([&] { (void)remote.predict(Latent::zeros({1, 3, 3}), 5, "a"); }) ==
          ErrorCode::ShapeMismatch);
  }

  SUBCASE("lpips") {
    const ServiceClient& client = remote.service();
    Image black{4, 4, 3, std::vector<std::uint8_t>(48, 0)};
    Image white{4, 4, 3, std::vector<std::uint8_t>(48, 255)};
    CHECK(client.lpips(black, black) == 0.0);
    CHECK(client.lpips(black, white) == doctest::Approx(1.0));
    Image small{2, 2, 3, std::vector<std::uint8_t>(12, 0)};
    CHECK(code_of([&] { (void)client.lpips(black, small); }) == ErrorCode::InvalidArgument);
  }
}

TEST_CASE("unreachable or failing services") {
  CHECK(code_of([] { RemoteBackend r({"http://127.0.0.1:1"}); }) == ErrorCode::ServiceUnavailable);
  CHECK_FALSE(ServiceClient("http://127.0.0.1:1").healthy());
  CHECK(code_of([] { RemoteBackend r({"no-scheme"}); }) == ErrorCode::ConfigError);

  StubServer broken([](httplib::Server& s) {
    s.Get("/v1/capabilities", [](const httplib::Request&, httplib::Response& res) {
      res.set_content("not json", "text/plain");
    });
    s.Post("/v1/lpips", [](const httplib::Request&, httplib::Response& res) {
      res.status = 400;
      res.set_content(R"({"error":"bad"})", "application/json");
    });
  });
  CHECK(code_of([&] { RemoteBackend r({broken.url()}); }) == ErrorCode::BackendError);
  Image a{2, 2, 1, std::vector<std::uint8_t>(4, 0)};
  CHECK(code_of([&] { (void)ServiceClient(broken.url()).lpips(a, a); }) == ErrorCode::BackendError);
}
