// Copyright 2026 The fmcgm Authors
// SPDX-License-Identifier: Apache-2.0

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <vector>

#include "doctest.h"
#include "fmcgm/gateway/client.hpp"
#include "fmcgm/gateway/json_extract.hpp"
#include "fmcgm/gateway/schemas.hpp"
#include "fmcgm/prompts/templates.hpp"
#include "fmcgm/util/codec.hpp"
#include "fmcgm/util/text.hpp"
#include "test_support.hpp"

using namespace fmcgm;
using fmcgm::testing::StubServer;
using fmcgm::testing::TempDir;
using nlohmann::json;
using std::chrono::milliseconds;

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

std::string detail_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.detail();
  }
  return "<no throw>";
}

std::string chat_reply(const std::string& content) {
  return json{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}},
              {"usage", {{"prompt_tokens", 12}, {"completion_tokens", 3}}}}
      .dump();
}

ModelRequest simple_request() {
  ModelRequest r;
  r.model_name = "m";
  r.system_text = "sys";
  r.user_text = "describe";
  r.max_tokens = 16;
  r.tag = "t";
  return r;
}

/// Transport that replays a fixed list of statuses.
class ScriptedTransport final : public ChatTransport {
 public:
  explicit ScriptedTransport(std::vector<int> statuses) : statuses_(std::move(statuses)) {}
  TransportReply send(const ModelRequest&, milliseconds) override {
    const int s = statuses_.at(std::min(calls, static_cast<int>(statuses_.size()) - 1));
    ++calls;
    return {s, s == 200 ? "ok" : "", std::nullopt, "err"};
  }
  [[nodiscard]] bool remote() const noexcept override { return false; }
  int calls = 0;

 private:
  std::vector<int> statuses_;
};

}  // namespace

TEST_CASE("json extraction from model output") {
  CHECK(extract_json(R"({"a": 1})")["a"] == 1);
  CHECK(extract_json("Here you go:\n```json\n{\"a\": {\"b\": \"}\"}}\n```\nthanks")["a"]["b"] == "}");
  CHECK(extract_json("noise { not json } then {\"ok\": true}")["ok"] == true);
  CHECK(code_of([] { (void)extract_json("no braces here"); }) == ErrorCode::NoJsonFound);
  CHECK(code_of([] { (void)extract_json("{\"a\": 1"); }) == ErrorCode::MalformedJson);
  CHECK(code_of([] { (void)extract_json("{a: 1}"); }) == ErrorCode::MalformedJson);
}

TEST_CASE("extractor schema") {
  const json good = {
      {"concepts",
       {{{"id", "c1"}, {"name", "weather"}, {"current_value", "rain"}},
        {{"id", "c2"}, {"name", "road"}, {"current_value", "wet"}, {"description", "surface"}}}},
      {"relationships", {{{"id", "r1"}, {"cause_id", "c1"}, {"effect_id", "c2"}}}},
      {"scene_summary", "a street"}};
  const auto rec = validate_extractor(good);
  CHECK(rec.concepts.size() == 2);
  CHECK(rec.concepts[1].description == "surface");
  CHECK(rec.edges[0].effect_id == "c2");
  CHECK(std::holds_alternative<ExtractorRecord>(validate_schema(good, SchemaKind::Extractor)));

  json missing = good;
  missing["concepts"][1].erase("current_value");
  CHECK(code_of([&] { validate_extractor(missing); }) == ErrorCode::MissingField);
  CHECK(detail_of([&] { validate_extractor(missing); }) == "concepts[1].current_value");

  json wrong = good;
  wrong["relationships"] = "none";
  CHECK(code_of([&] { validate_extractor(wrong); }) == ErrorCode::WrongKind);

  json empty = good;
  empty["concepts"][0]["name"] = "  ";
  CHECK(code_of([&] { validate_extractor(empty); }) == ErrorCode::EmptyValue);
  CHECK(code_of([] { validate_extractor(json::array()); }) == ErrorCode::WrongKind);
}

TEST_CASE("manipulator and evaluator schemas") {
  json iv = {{"id", "intervention_1"},
             {"target_concept_id", "c1"},
             {"target_concept_name", "weather"},
             {"original_value", "rain"},
             {"new_value", "sunny"},
             {"propagated_changes",
              {{{"concept_id", "c2"}, {"concept_name", "road"}, {"original_value", "wet"},
                {"new_value", "dry"}}}},
             {"final_concept_states", {{"c1", "sunny"}, {"c2", " dry "}}},
             {"generation_prompt", "a sunny street"}};
  const auto rec = validate_manipulator(json{{"interventions", {iv}}});
  REQUIRE(rec.interventions.size() == 1);
  CHECK(rec.interventions[0].final_concept_states.at("c2") == "dry");
  CHECK(rec.interventions[0].propagated_changes[0].new_value == "dry");

  iv["final_concept_states"]["c2"] = 3;
  CHECK(detail_of([&] { validate_manipulator(json{{"interventions", {iv}}}); }) ==
        "interventions[0].final_concept_states.c2");

  json ev = {{"intervention_id", "intervention_1"},
             {"concept_checks",
              {{{"concept_name", "weather"}, {"expected_value", "sunny"}, {"present", "Yes"}}}},
             {"verdict", "SUCCESS"},
             {"reasoning", "fine"}};
  const auto v = validate_evaluator(ev);
  CHECK(v.verdict == Verdict::Success);
  CHECK(v.concept_checks[0].present);
  ev["concept_checks"][0]["present"] = "maybe";
  CHECK(code_of([&] { validate_evaluator(ev); }) == ErrorCode::WrongKind);
  ev["concept_checks"][0]["present"] = "no";
  ev["verdict"] = "great";
  CHECK(detail_of([&] { validate_evaluator(ev); }) == "verdict");
}

TEST_CASE("prompt templates") {
  const std::string ext(builtin_template(PromptKind::Extractor));
  CHECK(ext.find("<context>") != std::string::npos);
  CHECK(ext.find("</context>") != std::string::npos);
  CHECK(ext.find("{prompt}") != std::string::npos);
  CHECK(ext.find("PART 1") != std::string::npos);
  CHECK(ext.find("PART 2") != std::string::npos);

  const auto r = render_prompt(ext, {{"prompt", "a red car on a wet road"}});
  CHECK(r.user_text.find("<context>\na red car on a wet road\n</context>") != std::string::npos);
  CHECK(r.system_text.find("{prompt}") == std::string::npos);
  CHECK(r.full() == util::render_template(ext, {{"prompt", "a red car on a wet road"}}));

  for (auto kind : {PromptKind::Describe, PromptKind::Manipulator, PromptKind::Evaluator}) {
    CHECK_FALSE(builtin_template(kind).empty());
  }
  CHECK(std::string(builtin_template(PromptKind::Manipulator)).find("{concepts_json}") !=
        std::string::npos);
  CHECK(std::string(builtin_template(PromptKind::Evaluator)).find("{checklist_text}") !=
        std::string::npos);

  TempDir dir;
  util::write_file_atomic(dir / "describe.txt", std::string_view("custom {x}\n"));
  CHECK(load_template(PromptKind::Describe, dir.path()) == "custom {x}");
  CHECK(load_template(PromptKind::Evaluator, dir.path()) == builtin_template(PromptKind::Evaluator));

  const auto plain = render_prompt("only {x} line", {{"x", "one"}});
  CHECK(plain.system_text.empty());
  CHECK(plain.user_text == "only one line");
  CHECK(util::render_template("{a} {unknown}", {{"a", "1"}}) == "1 {unknown}");
}

TEST_CASE("chat-completions request and reply bodies") {
  ModelRequest req = simple_request();
  req.image = EncodedImage{{1, 2, 3}, "image/png"};
  req.temperature = 0.2;
  const json body = HttpChatTransport::build_body(req);
  CHECK(body["model"] == "m");
  CHECK(body["messages"][0]["role"] == "system");
  CHECK(body["messages"][1]["content"][0]["text"] == "describe");
  CHECK(body["messages"][1]["content"][1]["image_url"]["url"] == "data:image/png;base64,AQID");
  CHECK(body["max_tokens"] == 16);

  const auto reply = HttpChatTransport::parse_body(chat_reply("hello"));
  CHECK(reply.raw_text == "hello");
  REQUIRE(reply.token_usage);
  CHECK(reply.token_usage->prompt_tokens == 12);
  const auto parts = HttpChatTransport::parse_body(
      R"({"choices":[{"message":{"content":[{"type":"text","text":"a"},{"type":"text","text":"b"}]}}]})");
  CHECK(parts.raw_text == "ab");
  CHECK(code_of([] { (void)HttpChatTransport::parse_body("<html>"); }) == ErrorCode::TransportError);
  CHECK(code_of([] { (void)HttpChatTransport::parse_body(R"({"choices":[]})"); }) ==
        ErrorCode::TransportError);
}

TEST_CASE("http transport retries with exponential backoff") {
  std::atomic<int> hits{0};
  std::string seen_auth;
  StubServer server([&](httplib::Server& s) {
    s.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
      seen_auth = req.get_header_value("Authorization");
      if (++hits <= 2) {
        res.status = 500;
        return;
      }
      res.set_content(chat_reply("third time"), "application/json");
    });
  });
  std::vector<milliseconds> delays;
  RetryPolicy policy;
  policy.sleep = [&](milliseconds d) { delays.push_back(d); };
  VlmClient client(std::make_shared<HttpChatTransport>(Endpoint{server.url() + "/v1", "sk-test"}),
                   policy);
  const auto resp = client.complete(simple_request());
  CHECK(resp.raw_text == "third time");
  CHECK(hits == 3);
  CHECK(seen_auth == "Bearer sk-test");
  REQUIRE(delays.size() == 2);
  CHECK(delays[0] == milliseconds(1000));
  CHECK(delays[1] == milliseconds(2000));
  CHECK(client.stats().retries == 2);
}

TEST_CASE("retry classification") {
  auto run = [](std::vector<int> statuses, int max_attempts = 5) {
    auto t = std::make_shared<ScriptedTransport>(std::move(statuses));
    RetryPolicy p;
    p.max_attempts = max_attempts;
    p.sleep = [](milliseconds) {};
    VlmClient c(t, p);
    ErrorCode code = ErrorCode::IoError;
    bool ok = false;
    try {
      ok = c.complete(simple_request()).raw_text == "ok";
    } catch (const Error& e) {
      code = e.code();
    }
    return std::tuple{ok, code, t->calls};
  };
  CHECK(run({429, 503, 200}) == std::tuple{true, ErrorCode::IoError, 3});
  CHECK(run({401}) == std::tuple{false, ErrorCode::AuthError, 1});
  CHECK(run({403}) == std::tuple{false, ErrorCode::AuthError, 1});
  CHECK(run({404}) == std::tuple{false, ErrorCode::TransportError, 1});
  CHECK(run({500}, 3) == std::tuple{false, ErrorCode::RetriesExhausted, 3});

  RetryPolicy p;
  CHECK(p.delay_before(1) == milliseconds(1000));
  CHECK(p.delay_before(4) == milliseconds(8000));

  auto t = std::make_shared<ScriptedTransport>(std::vector<int>{200});
  VlmClient c(t);
  ModelRequest bad = simple_request();
  bad.temperature = 3.0;
  CHECK(code_of([&] { c.complete(bad); }) == ErrorCode::InvalidArgument);
  bad = simple_request();
  bad.max_tokens = 0;
  CHECK(code_of([&] { c.complete(bad); }) == ErrorCode::InvalidArgument);
  CHECK(t->calls == 0);
}

TEST_CASE("connection failures are retried then exhausted") {
  // Port 1 is privileged and unused here, so connecting is refused at once.
  const int port = 1;
  RetryPolicy p;
  p.max_attempts = 2;
  p.sleep = [](milliseconds) {};
  p.timeout = milliseconds(2000);
  VlmClient c(std::make_shared<HttpChatTransport>(
                  Endpoint{"http://127.0.0.1:" + std::to_string(port) + "/v1", ""}),
              p);
  CHECK(code_of([&] { c.complete(simple_request()); }) == ErrorCode::RetriesExhausted);
}

TEST_CASE("response cache") {
  TempDir dir;
  auto t = std::make_shared<ScriptedTransport>(std::vector<int>{200});
  VlmClient c(t, {}, dir.path());
  const auto first = c.complete(simple_request());
  CHECK_FALSE(first.from_cache);
  const auto second = c.complete(simple_request());
  CHECK(second.from_cache);
  CHECK(second.raw_text == "ok");
  CHECK(t->calls == 1);
  CHECK(c.stats().cache_hits == 1);

  // A fresh client over the same directory makes no transport calls.
  auto t2 = std::make_shared<ScriptedTransport>(std::vector<int>{500});
  VlmClient c2(t2, {}, dir.path());
  CHECK(c2.complete(simple_request()).raw_text == "ok");
  CHECK(t2->calls == 0);

  ModelRequest a = simple_request();
  ModelRequest b = a;
  b.tag = "other tag";
  CHECK(ResponseCache::key(a) == ResponseCache::key(b));
  b.attempt = 1;
  CHECK(ResponseCache::key(a) != ResponseCache::key(b));
  b = a;
  b.temperature = 0.1;
  CHECK(ResponseCache::key(a) != ResponseCache::key(b));
  b = a;
  b.image = EncodedImage{{9}, "image/png"};
  CHECK(ResponseCache::key(a) != ResponseCache::key(b));
  CHECK(ResponseCache::key(a).size() == 64);
}

TEST_CASE("fixture transport lookup order") {
  TempDir dir;
  std::filesystem::create_directories(dir / "x");
  util::write_file_atomic(dir / "x/extract.json", std::string_view("generic"));
  util::write_file_atomic(dir / "x/extract.2.json", std::string_view("second"));
  util::write_file_atomic(dir / "x/describe.txt", std::string_view("caption"));
  FixtureTransport ft(dir.path());
  ModelRequest r = simple_request();
  r.tag = "x/extract";
  CHECK(ft.send(r, milliseconds(1)).raw_text == "generic");
  r.attempt = 1;
  CHECK(ft.send(r, milliseconds(1)).raw_text == "second");
  r.attempt = 2;
  CHECK(ft.send(r, milliseconds(1)).raw_text == "generic");
  r.tag = "x/describe";
  CHECK(ft.send(r, milliseconds(1)).raw_text == "caption");
  r.tag = "x/missing";
  CHECK(ft.send(r, milliseconds(1)).status == 404);
  CHECK_FALSE(ft.remote());

  VlmClient c(std::make_shared<FixtureTransport>(dir.path()));
  CHECK(code_of([&] { c.complete(r); }) == ErrorCode::TransportError);
}

TEST_CASE("endpoint environment override") {
  ::setenv("FMCGM_VLM_BASE_URL", "http://example.invalid/v1", 1);
  ::unsetenv("FMCGM_VLM_API_KEY");
  const auto e = Endpoint::from_env({"http://default", "k"});
  CHECK(e.base_url == "http://example.invalid/v1");
  CHECK(e.api_key == "k");
  ::unsetenv("FMCGM_VLM_BASE_URL");
  CHECK(Endpoint::from_env({"http://default", ""}).base_url == "http://default");
}
