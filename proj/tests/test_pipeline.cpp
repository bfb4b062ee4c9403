// Copyright 2026 The fmcgm Authors
// SPDX-License-Identifier: Apache-2.0

#include <sys/wait.h>

#include <atomic>
#include <cstdlib>

#include "doctest.h"
#include "fmcgm/backend/toy_backend.hpp"
#include "fmcgm/pipeline/config.hpp"
#include "fmcgm/pipeline/pipeline.hpp"
#include "fmcgm/util/codec.hpp"
#include "test_support.hpp"

using namespace fmcgm;
using fmcgm::testing::fixture_dir;
using fmcgm::testing::oracle_descendants;
using fmcgm::testing::TempDir;
using nlohmann::json;
namespace fs = std::filesystem;

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

RunConfig fixture_config(const fs::path& out) {
  RunConfig cfg = load_config(fixture_dir() / "fixture_run.json");
  cfg.out_dir = out;
  return cfg;
}

/// Fixture transport that counts how often it is asked.
class CountingTransport final : public ChatTransport {
 public:
  explicit CountingTransport(fs::path dir) : inner_(std::move(dir)) {}
  TransportReply send(const ModelRequest& req, std::chrono::milliseconds t) override {
    ++calls;
    return inner_.send(req, t);
  }
  [[nodiscard]] bool remote() const noexcept override { return false; }
  std::atomic<int> calls{0};

 private:
  FixtureTransport inner_;
};

/// Toy backend that refuses any batch mentioning `poison`.
class PoisonedBackend final : public DenoiserBackend {
 public:
  PoisonedBackend(ToyWorld w, std::string poison) : toy_(std::move(w)), poison_(std::move(poison)) {}
  [[nodiscard]] const BackendCapabilities& capabilities() const override { return toy_.capabilities(); }
  [[nodiscard]] std::vector<PredictOutput> batch_predict(const Latent& x, int t,
                                                         std::span<const std::string> prompts) const override {
    for (const auto& p : prompts) {
      if (p == poison_) throw Error(ErrorCode::BackendError, "poisoned prompt");
    }
    return toy_.batch_predict(x, t, prompts);
  }
  [[nodiscard]] Latent encode(const Image& image) const override { return toy_.encode(image); }
  [[nodiscard]] Image decode(const Latent& latent) const override { return toy_.decode(latent); }

 private:
  ToyBackend toy_;
  std::string poison_;
};

int run_cli(const std::string& args) {
  const std::string cmd = std::string(FMCGM_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("config parsing") {
  const json j = {{"backend", "toy"},
                  {"vlm", {{"model", "m1"}, {"evaluator_model", "m2"}, {"cache_dir", "cache"}}},
                  {"datasets", {{{"name", "a"}, {"path", "data/a"}}}},
                  {"edit", {{"threshold", 0.6}, {"concept_scales", {{"c2", 4.0}}}}},
                  {"sample_count", 3},
                  {"distance", "pixel_mse_fallback"},
                  {"out", "/abs/out"}};
  const RunConfig cfg = config_from_json(j, "/base");
  CHECK(cfg.vlm.extractor_model == "m1");
  CHECK(cfg.vlm.evaluator_model == "m2");
  CHECK(cfg.vlm.cache_dir == fs::path("/base/cache"));
  CHECK(cfg.datasets[0].path == fs::path("/base/data/a"));
  CHECK(cfg.out_dir == fs::path("/abs/out"));
  CHECK(cfg.edit.threshold == 0.6);
  CHECK(cfg.edit.scale_for("c2") == 4.0);
  CHECK(cfg.sample_count == 3);
  CHECK(cfg.distance_method() == DistanceMethod::PixelMseFallback);
  CHECK(to_json(cfg)["vlm"].contains("api_key") == false);

  RunConfig defaults;
  CHECK(defaults.sample_count == 75);
  CHECK(defaults.edit.inversion_steps == 100);
  CHECK(defaults.distance_method() == DistanceMethod::PixelMseFallback);
  defaults.backend = BackendKind::Remote;
  CHECK(defaults.distance_method() == DistanceMethod::LpipsRemote);

  CHECK(code_of([] { (void)config_from_json(json{{"sampel_count", 3}}); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { (void)config_from_json(json{{"edit", {{"treshold", 0.5}}}}); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { (void)config_from_json(json{{"backend", "gpu"}}); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { (void)config_from_json(json{{"sample_count", "many"}}); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { (void)load_config("/nonexistent/config.json"); }) != ErrorCode::CycleDetected);
}

TEST_CASE("dataset listing and seeded sampling") {
  const auto faces = list_dataset({"faces", fixture_dir() / "datasets/faces"});
  REQUIRE(faces.size() == 2);
  CHECK(faces[0].image_id == "faces-a");
  CHECK(faces[0].caption.has_value());
  const auto scenes = list_dataset({"scenes", fixture_dir() / "datasets/scenes"});
  CHECK_FALSE(scenes[1].caption.has_value());

  std::vector<DatasetItem> many;
  for (int i = 0; i < 200; ++i) {
    many.push_back({"set", "set-" + std::to_string(i), "img" + std::to_string(i) + ".png", std::nullopt});
  }
  const auto a = sample_items(many, 75, 1234);
  const auto b = sample_items(many, 75, 1234);
  const auto c = sample_items(many, 75, 1235);
  REQUIRE(a.size() == 75);
  bool same = true, differs = false;
  std::set<std::string> ids;
  for (std::size_t i = 0; i < a.size(); ++i) {
    same &= a[i].image_id == b[i].image_id;
    differs |= a[i].image_id != c[i].image_id;
    ids.insert(a[i].image_id);
  }
  CHECK(same);
  CHECK(differs);
  CHECK(ids.size() == 75);

  many.resize(10);
  CHECK(code_of([&] { (void)sample_items(many, 75, 1); }) == ErrorCode::InsufficientItems);
  TempDir empty;
  CHECK(code_of([&] { (void)list_dataset({"e", empty.path()}); }) == ErrorCode::DatasetEmpty);
}

TEST_CASE("single-image fixture run is offline and sound") {
  TempDir out;
  const RunConfig cfg = fixture_config(out.path());
  auto transport = std::make_shared<CountingTransport>(*cfg.fixtures_dir);
  Pipeline p(cfg, transport, std::make_shared<ToyBackend>(cfg.toy));
  CHECK_FALSE(p.client().transport().remote());
  const RunRecord r = p.run_single(fixture_dir() / "images/portrait.png",
                                   util::read_text_file(fixture_dir() / "images/portrait.txt"), "portrait");
  CHECK(r.complete());
  CHECK(r.base_prompt_origin == "caption");
  REQUIRE(r.graph);
  REQUIRE(r.interventions.size() == 3);
  REQUIRE(r.outcomes.size() == 3);
  for (const auto& iv : r.interventions) {
    IdSet allowed = oracle_descendants(*r.graph, iv.target_concept_id);
    allowed.insert(iv.target_concept_id);
    for (const auto& [id, v] : iv.final_concept_states) CHECK(allowed.contains(id));
  }
  for (const auto& o : r.outcomes) {
    CHECK(o.ok());
    CHECK(o.vlm_eff.has_value());
    CHECK(fs::exists(out / ("portrait/" + o.image_file)));
    CHECK(fs::exists(out / ("portrait/" + o.tensor_file)));
  }
  CHECK(r.outcomes[0].prompts->intervention_prompt == "male");
  CHECK(transport->calls == 5);
  for (const char* f : {"record.json", "timings.json", "graph.json", "interventions.json"}) {
    CHECK(fs::exists(out / "portrait" / f));
  }
  const RunRecord back = record_from_json(read_json(out / "portrait/record.json"));
  CHECK(to_json(back) == to_json(r));

  const Latent t = latent_from_json(read_json(out / ("portrait/" + r.outcomes[0].tensor_file)));
  CHECK(t.shape() == cfg.toy.latent_shape);
}

TEST_CASE("one failing edit does not sink the others") {
  TempDir out;
  const RunConfig cfg = fixture_config(out.path());
  Pipeline p(cfg, std::make_shared<FixtureTransport>(*cfg.fixtures_dir),
             std::make_shared<PoisonedBackend>(cfg.toy, "elderly"));
  const RunRecord r = p.run_single(fixture_dir() / "images/portrait.png", std::string("a portrait"), "portrait");
  REQUIRE(r.outcomes.size() == 3);
  CHECK(r.outcomes[0].ok());
  CHECK_FALSE(r.outcomes[1].ok());
  CHECK(r.outcomes[1].error.find("BackendError") != std::string::npos);
  CHECK(r.outcomes[2].ok());
  CHECK_FALSE(r.complete());
  CHECK(examples_of(r, "CSG").size() == 2);
}

TEST_CASE("reruns with a warm cache are byte-identical") {
  TempDir out1, out2, cache;
  RunConfig cfg = fixture_config(out1.path());
  cfg.vlm.cache_dir = cache.path();
  {
    Pipeline p(cfg);
    CHECK(p.run_single(fixture_dir() / "images/portrait.png", std::string("a portrait"), "portrait").complete());
  }
  cfg.out_dir = out2.path();
  auto empty_fixtures = std::make_shared<CountingTransport>(cache.path() / "nothing-here");
  Pipeline again(cfg, empty_fixtures, std::make_shared<ToyBackend>(cfg.toy));
  CHECK(again.run_single(fixture_dir() / "images/portrait.png", std::string("a portrait"), "portrait").complete());
  CHECK(empty_fixtures->calls == 0);
  CHECK(again.client().stats().cache_hits == 5);
  for (const char* f : {"record.json", "graph.json", "interventions.json", "cf_1.tensor.json", "cf_2.png"}) {
    CHECK(util::read_file(out1.path() / "portrait" / f) == util::read_file(out2.path() / "portrait" / f));
  }
}

TEST_CASE("dataset run aggregates per dataset") {
  TempDir out;
  const RunConfig cfg = fixture_config(out.path());
  Pipeline p(cfg);
  const DatasetRun run = p.run_dataset();
  REQUIRE(run.records.size() == 4);
  for (const auto& r : run.records) CHECK(r.complete());
  CHECK(run.manifest["model_calls"]["network"] == 0);
  CHECK(run.manifest["seed"] == 7);
  CHECK(run.manifest["samples"]["faces"].size() == 2);
  REQUIRE(run.result.per_dataset.size() == 2);
  CHECK(run.result.per_dataset[0].dataset == "faces");
  CHECK(run.result.per_dataset[0].count == 6);

  // Hand averages over the written records.
  std::map<std::string, std::pair<double, int>> sums;
  for (const auto& r : run.records) {
    for (const auto& o : r.outcomes) {
      sums[r.dataset].first += *o.vlm_eff;
      sums[r.dataset].second += 1;
    }
  }
  const double faces = sums["faces"].first / sums["faces"].second;
  const double scenes = sums["scenes"].first / sums["scenes"].second;
  CHECK(run.result.per_dataset[0].vlm_eff == doctest::Approx(faces).epsilon(1e-12));
  CHECK(run.result.overall[0].vlm_eff == doctest::Approx((faces + scenes) / 2).epsilon(1e-12));
  CHECK(fs::exists(out / "report.csv"));
  CHECK(fs::exists(out / "manifest.json"));

  const auto again = report_from_records(out.path(), "CSG", cfg.distance_method());
  CHECK(to_csv(again) == to_csv(run.result));
}

TEST_CASE("command-line exit codes") {
  TempDir out;
  const std::string cfg = (fixture_dir() / "fixture_run.json").string();
  CHECK(run_cli("run --config " + cfg + " --out " + out.path().string()) == 0);
  CHECK(fs::exists(out / "report.csv"));
  CHECK(run_cli("report --out " + out.path().string()) == 0);
  CHECK(run_cli("extract --config " + cfg + " --image " + (fixture_dir() / "images/portrait.png").string() +
                " --out " + (out / "single").string()) == 0);
  CHECK(run_cli("run --config /nonexistent.json --out " + out.path().string()) != 0);
  CHECK(run_cli("extract --config " + cfg + " --image /nonexistent.png --out " + out.path().string()) != 0);
  CHECK(run_cli("frobnicate") != 0);
}
