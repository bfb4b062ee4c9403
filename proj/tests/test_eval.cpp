// Copyright 2026 The fmcgm Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "doctest.h"
#include "fmcgm/eval/evaluation.hpp"
#include "fmcgm/gateway/client.hpp"
#include "fmcgm/util/codec.hpp"
#include "test_support.hpp"

using namespace fmcgm;
using fmcgm::testing::TempDir;
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

Intervention beard_intervention() {
  Intervention iv;
  iv.id = "intervention_1";
  iv.target_concept_id = "c1";
  iv.target_concept_name = "gender";
  iv.original_value = "female";
  iv.new_value = "male";
  iv.propagated_changes = {{"c4", "facial hair", "no beard", "full beard", ""},
                           {"c2", "hair length", "long hair", "short hair", ""}};
  iv.final_concept_states = {{"c1", "male"}, {"c2", "short hair"}, {"c4", "full beard"}};
  iv.generation_prompt = "a man with a beard";
  return iv;
}

EvalVerdict verdict(std::vector<std::pair<std::string, bool>> checks, Verdict v) {
  EvalVerdict out;
  for (auto& [name, yes] : checks) out.concept_checks.push_back({name, "", yes});
  out.verdict = v;
  return out;
}

std::string fixed(double v, int digits) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

ExampleRecord rec(const std::string& method, const std::string& dataset, const std::string& image,
                  double eff, std::optional<double> dist) {
  return {method, dataset, image, "intervention_1", eff, dist};
}

}  // namespace

TEST_CASE("checklists follow target then propagation order") {
  const Checklist c = build_checklist(beard_intervention());
  REQUIRE(c.items.size() == 3);
  CHECK(c.items[0] == ChecklistItem{"c1", "gender", "male"});
  CHECK(c.items[1] == ChecklistItem{"c4", "facial hair", "full beard"});
  CHECK(c.items[2] == ChecklistItem{"c2", "hair length", "short hair"});
  CHECK(c.render() == "gender: male\nfacial hair: full beard\nhair length: short hair");

  Intervention empty = beard_intervention();
  empty.final_concept_states.clear();
  CHECK(code_of([&] { (void)build_checklist(empty); }) == ErrorCode::EmptyStates);
}

TEST_CASE("rubric and scores") {
  const Checklist c = build_checklist(beard_intervention());
  const auto all_yes = verdict({{"gender", true}, {"facial hair", true}, {"hair length", true}},
                               Verdict::Success);
  CHECK_NOTHROW(check_rubric(all_yes));
  CHECK(checklist_score(c, all_yes) == 1.0);

  auto lying = all_yes;
  lying.concept_checks[1].present = false;
  CHECK(code_of([&] { check_rubric(lying); }) == ErrorCode::SchemaInvalid);
  lying.verdict = Verdict::Partial;
  CHECK_NOTHROW(check_rubric(lying));
  CHECK(checklist_score(c, lying) == doctest::Approx(2.0 / 3.0));

  auto modest = all_yes;
  modest.verdict = Verdict::Partial;
  CHECK(code_of([&] { check_rubric(modest); }) == ErrorCode::SchemaInvalid);

  // A failed target with every descendant present is accepted as a failure.
  const auto target_no = verdict({{"gender", false}, {"facial hair", true}, {"hair length", true}},
                                 Verdict::Failure);
  CHECK_NOTHROW(check_rubric(target_no));

  Intervention two = beard_intervention();
  two.propagated_changes.pop_back();
  two.final_concept_states.erase("c2");
  const Checklist c2 = build_checklist(two);
  CHECK(checklist_score(c2, verdict({{"Gender", true}, {"facial hair", false}}, Verdict::Partial)) == 0.5);
  CHECK(checklist_score(c2, verdict({{"x", true}, {"y", true}}, Verdict::Success)) == 1.0);
  CHECK(checklist_score(c2, verdict({{"gender", true}}, Verdict::Partial)) == 0.5);
}

TEST_CASE("vlm_eff against scripted evaluator replies") {
  TempDir dir;
  const json good = {{"intervention_id", "intervention_1"},
                     {"concept_checks",
                      {{{"concept_name", "gender"}, {"expected_value", "male"}, {"present", "yes"}},
                       {{"concept_name", "facial hair"}, {"expected_value", "full beard"}, {"present", "no"}},
                       {{"concept_name", "hair length"}, {"expected_value", "short hair"}, {"present", "yes"}}}},
                     {"verdict", "partial"},
                     {"reasoning", "no beard"}};
  json bad = good;
  bad["verdict"] = "success";
  std::filesystem::create_directories(dir / "img");
  util::write_file_atomic(dir / "img/eval_1.1.json", bad.dump());
  util::write_file_atomic(dir / "img/eval_1.2.json", good.dump());
  VlmClient client(std::make_shared<FixtureTransport>(dir.path()));
  const EncodedImage img{{1}, "image/png"};
  const auto r = vlm_eff(client, img, beard_intervention(), "a man", "img/eval_1", {});
  CHECK(r.attempts == 2);
  CHECK(r.score == doctest::Approx(2.0 / 3.0));
  CHECK(r.verdict.verdict == Verdict::Partial);
  CHECK(to_json(r.verdict)["concept_checks"][1]["present"] == "no");

  util::write_file_atomic(dir / "img/eval_2.json", bad.dump());
  CHECK(code_of([&] { vlm_eff(client, img, beard_intervention(), "a man", "img/eval_2", {}); }) ==
        ErrorCode::SchemaInvalid);
}

TEST_CASE("pixel distance") {
  Image a{2, 1, 1, {0, 255}};
  Image b{2, 1, 1, {255, 0}};
  CHECK(pixel_mse(a, a) == 0.0);
  CHECK(pixel_mse(a, b) == 1.0);
  Image half{2, 1, 1, {0, 0}};
  CHECK(pixel_mse(a, half) == 0.5);
  CHECK(perceptual_distance(a, b, DistanceMethod::PixelMseFallback) == 1.0);
  CHECK(code_of([&] { (void)perceptual_distance(a, b, DistanceMethod::LpipsRemote); }) ==
        ErrorCode::InvalidArgument);
  Image c{1, 2, 1, {0, 0}};
  CHECK(code_of([&] { (void)pixel_mse(a, c); }) == ErrorCode::ShapeMismatch);
  CHECK(parse_distance_method("lpips_remote") == DistanceMethod::LpipsRemote);
  CHECK(to_string(DistanceMethod::PixelMseFallback) == "pixel_mse_fallback");
  CHECK(code_of([] { (void)parse_distance_method("ssim"); }) == ErrorCode::ConfigError);
}

TEST_CASE("aggregation") {
  SUBCASE("single record") {
    const std::vector<ExampleRecord> one{rec("CSG", "faces", "a", 0.5, 0.2)};
    const auto r = aggregate(one);
    REQUIRE(r.per_dataset.size() == 1);
    CHECK(r.per_dataset[0].vlm_eff == 0.5);
    CHECK(r.overall[0].dataset == "Average");
    CHECK(r.overall[0].distance == 0.2);
    CHECK(r.overall[0].count == 1);
  }

  SUBCASE("mean of dataset means") {
    const std::vector<ExampleRecord> rs{
        rec("CSG", "faces", "a", 1.0, 0.1), rec("CSG", "faces", "b", 0.0, 0.3),
        rec("CSG", "faces", "c", 0.5, std::nullopt), rec("CSG", "scenes", "d", 0.25, 0.4)};
    const auto r = aggregate(rs);
    REQUIRE(r.per_dataset.size() == 2);
    CHECK(r.per_dataset[0].vlm_eff == 0.5);
    CHECK(*r.per_dataset[0].distance == doctest::Approx(0.2));
    CHECK(r.per_dataset[0].count == 3);
    CHECK(r.overall[0].vlm_eff == doctest::Approx(0.375));
    CHECK(*r.overall[0].distance == doctest::Approx(0.3));
    CHECK(r.overall[0].count == 4);
    CHECK(to_json(r)["distance_comparable_to_lpips"] == true);
  }

  SUBCASE("methods are kept apart") {
    const std::vector<ExampleRecord> rs{rec("CSG", "faces", "a", 1.0, 0.1),
                                        rec("DDIM", "faces", "a", 0.0, 0.5)};
    const auto r = aggregate(rs);
    CHECK(r.overall.size() == 2);
    CHECK(r.overall[0].method == "CSG");
    CHECK(r.overall[1].vlm_eff == 0.0);
  }

  SUBCASE("order does not matter") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<ExampleRecord> rs;
    for (int i = 0; i < 60; ++i) {
      rs.push_back(rec("CSG", i % 3 ? "faces" : "scenes", "img" + std::to_string(i), u(rng), u(rng)));
    }
    const auto base = aggregate(rs);
    for (int t = 0; t < 20; ++t) {
      std::shuffle(rs.begin(), rs.end(), rng);
      const auto r = aggregate(rs);
      REQUIRE(r.overall[0].vlm_eff == base.overall[0].vlm_eff);
      REQUIRE(r.overall[0].distance == base.overall[0].distance);
      REQUIRE(r.per_example == base.per_example);
      REQUIRE(to_csv(r) == to_csv(base));
    }
  }

  CHECK(code_of([] { (void)aggregate(std::vector<ExampleRecord>{}); }) == ErrorCode::EmptyInput);
}

TEST_CASE("published averages reproduce from the dataset columns") {
  struct Row {
    const char* method;
    double faces_eff, faces_lpips, coco_eff, coco_lpips, avg_eff, avg_lpips;
  };
  const Row rows[] = {{"DDIM", 0.792, 0.4836, 0.741, 0.4759, 0.767, 0.4798},
                      {"DDPM", 0.756, 0.2244, 0.655, 0.2035, 0.705, 0.2139},
                      {"CSG", 0.854, 0.1980, 0.762, 0.1750, 0.808, 0.1865}};
  std::vector<ExampleRecord> rs;
  for (const auto& r : rows) {
    rs.push_back(rec(r.method, "CelebA-HQ", "x", r.faces_eff, r.faces_lpips));
    rs.push_back(rec(r.method, "MS-COCO", "x", r.coco_eff, r.coco_lpips));
  }
  const auto result = aggregate(rs);
  for (const auto& r : rows) {
    const auto it = std::find_if(result.overall.begin(), result.overall.end(),
                                 [&](const GroupMean& g) { return g.method == r.method; });
    REQUIRE(it != result.overall.end());
    if (std::string(r.method) == "CSG") {
      CHECK(fixed(it->vlm_eff, 3) == "0.808");
      CHECK(fixed(*it->distance, 4) == "0.1865");
    }
    // The printed baselines mix rounding directions, so they hold to half a unit.
    CHECK(std::abs(it->vlm_eff - r.avg_eff) <= 0.0005 + 1e-12);
    CHECK(std::abs(*it->distance - r.avg_lpips) <= 0.00005 + 1e-12);
  }
  const std::string csv = to_csv(result);
  CHECK(csv.rfind("method,dataset,vlm_eff,lpips\n", 0) == 0);
  CHECK(csv.find("CSG,Average,0.808,0.1865\n") != std::string::npos);
}

TEST_CASE("example records round trip") {
  const ExampleRecord r = rec("CSG", "faces", "faces-a", 0.75, std::nullopt);
  CHECK(example_from_json(to_json(r)) == r);
  const ExampleRecord d = rec("CSG", "faces", "faces-a", 0.75, 0.01);
  CHECK(example_from_json(to_json(d)) == d);
  CHECK(code_of([] { (void)example_from_json(json{{"vlm_eff", 0.5}}); }) == ErrorCode::SchemaInvalid);
  CHECK(code_of([] { (void)example_from_json(json{{"dataset", "x"}, {"vlm_eff", 1.5}}); }) ==
        ErrorCode::SchemaInvalid);
  const std::vector<ExampleRecord> one{d};
  CHECK(to_csv(aggregate(one, DistanceMethod::PixelMseFallback)).rfind("method,dataset,vlm_eff,pixel_mse\n", 0) == 0);
}
