// Copyright 2026 The fmcgm Authors
// SPDX-License-Identifier: Apache-2.0

#include "fmcgm/error.hpp"
#include "fmcgm/pipeline/config.hpp"

#include <set>

#include "fmcgm/gateway/client.hpp"
#include "fmcgm/util/codec.hpp"

namespace fmcgm {

using nlohmann::json;
namespace fs = std::filesystem;

std::string_view to_string(BackendKind k) noexcept { return k == BackendKind::Toy ? "toy" : "remote"; }

BackendKind parse_backend_kind(std::string_view name) {
  if (name == "toy") return BackendKind::Toy;
  if (name == "remote") return BackendKind::Remote;
  throw Error(ErrorCode::ConfigError, "backend must be 'toy' or 'remote', got '" + std::string(name) + "'");
}

ToyWorld RunConfig::default_toy_world() {
  ToyWorld w;
  w.auto_vocabulary = true;
  return w;
}

void RunConfig::validate() const {
  if (sample_count < 1) throw Error(ErrorCode::ConfigError, "sample_count must be >= 1");
  if (workers < 1) throw Error(ErrorCode::ConfigError, "workers must be >= 1");
  if (vlm.max_in_flight < 1) throw Error(ErrorCode::ConfigError, "vlm.max_in_flight must be >= 1");
  if (vlm.timeout_ms < 1 || service.timeout_ms < 1) throw Error(ErrorCode::ConfigError, "timeouts must be positive");
  if (backend == BackendKind::Remote && service.base_url.empty()) {
    throw Error(ErrorCode::ConfigError, "remote backend needs service.base_url");
  }
  if (!fixtures_dir && vlm.base_url.empty()) {
    throw Error(ErrorCode::ConfigError, "either fixtures or vlm.base_url must be set");
  }
  std::set<std::string> names;
  for (const auto& d : datasets) {
    if (d.name.empty()) throw Error(ErrorCode::ConfigError, "dataset without a name");
    if (!names.insert(d.name).second) throw Error(ErrorCode::ConfigError, "dataset '" + d.name + "' listed twice");
  }
  try {
    edit.validate();
    toy.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigError, e.what());
  }
}

DistanceMethod RunConfig::distance_method() const {
  if (distance) return *distance;
  return backend == BackendKind::Remote ? DistanceMethod::LpipsRemote : DistanceMethod::PixelMseFallback;
}

namespace {

void reject_unknown(const json& j, const std::string& where, std::initializer_list<const char*> known) {
  if (!j.is_object()) throw Error(ErrorCode::ConfigError, where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw Error(ErrorCode::ConfigError, "unknown key '" + key + "' in " + where);
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_relative() && !base.empty() ? base / path : path;
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

}  // namespace

RunConfig config_from_json(const json& j, const fs::path& base_dir) {
  RunConfig cfg;
  try {
    reject_unknown(j, "config", {"vlm", "service", "backend", "edit", "datasets", "sample_count", "seed",
                                 "out", "fixtures", "templates", "workers", "distance", "method", "toy"});
    if (j.contains("vlm")) {
      const auto& v = j.at("vlm");
      reject_unknown(v, "vlm", {"base_url", "api_key", "extractor_model", "manipulator_model",
                                "evaluator_model", "model", "max_in_flight", "timeout_ms", "cache_dir"});
      std::string model;
      read(v, "model", model);
      cfg.vlm.extractor_model = cfg.vlm.manipulator_model = cfg.vlm.evaluator_model = model;
      read(v, "base_url", cfg.vlm.base_url);
      read(v, "api_key", cfg.vlm.api_key);
      read(v, "extractor_model", cfg.vlm.extractor_model);
      read(v, "manipulator_model", cfg.vlm.manipulator_model);
      read(v, "evaluator_model", cfg.vlm.evaluator_model);
      read(v, "max_in_flight", cfg.vlm.max_in_flight);
      read(v, "timeout_ms", cfg.vlm.timeout_ms);
      if (v.contains("cache_dir") && !v.at("cache_dir").is_null()) {
        cfg.vlm.cache_dir = resolve(base_dir, v.at("cache_dir").get<std::string>());
      }
    }
    if (j.contains("service")) {
      const auto& s = j.at("service");
      reject_unknown(s, "service", {"base_url", "session", "timeout_ms"});
      read(s, "base_url", cfg.service.base_url);
      read(s, "session", cfg.service.session);
      read(s, "timeout_ms", cfg.service.timeout_ms);
    }
    if (j.contains("backend")) cfg.backend = parse_backend_kind(j.at("backend").get<std::string>());
    if (j.contains("edit")) {
      const auto& e = j.at("edit");
      reject_unknown(e, "edit", {"edit_scale", "concept_scales", "threshold", "warmup_steps", "inversion_steps",
                                 "skip_ratio", "source_guidance", "intersect_masks", "guide_base"});
      read(e, "edit_scale", cfg.edit.edit_scale);
      read(e, "concept_scales", cfg.edit.concept_scales);
      read(e, "threshold", cfg.edit.threshold);
      read(e, "warmup_steps", cfg.edit.warmup_steps);
      read(e, "inversion_steps", cfg.edit.inversion_steps);
      read(e, "skip_ratio", cfg.edit.skip_ratio);
      read(e, "source_guidance", cfg.edit.source_guidance);
      read(e, "intersect_masks", cfg.edit.intersect_masks);
      read(e, "guide_base", cfg.edit.guide_base);
    }
    if (j.contains("datasets")) {
      for (const auto& d : j.at("datasets")) {
        reject_unknown(d, "datasets[]", {"name", "path"});
        cfg.datasets.push_back({d.at("name").get<std::string>(), resolve(base_dir, d.at("path").get<std::string>())});
      }
    }
    read(j, "sample_count", cfg.sample_count);
    read(j, "seed", cfg.seed);
    read(j, "workers", cfg.workers);
    read(j, "method", cfg.method_label);
    if (j.contains("out")) cfg.out_dir = resolve(base_dir, j.at("out").get<std::string>());
    if (j.contains("fixtures") && !j.at("fixtures").is_null()) {
      cfg.fixtures_dir = resolve(base_dir, j.at("fixtures").get<std::string>());
    }
    if (j.contains("templates") && !j.at("templates").is_null()) {
      cfg.template_dir = resolve(base_dir, j.at("templates").get<std::string>());
    }
    if (j.contains("distance") && !j.at("distance").is_null()) {
      cfg.distance = parse_distance_method(j.at("distance").get<std::string>());
    }
    if (j.contains("toy")) {
      const auto& t = j.at("toy");
      reject_unknown(t, "toy", {"latent_shape", "attention_resolution", "variance", "auto_vocabulary",
                                "auto_shift", "decode_scale", "schedule_steps"});
      if (t.contains("latent_shape")) {
        const auto s = t.at("latent_shape").get<std::vector<int>>();
        if (s.size() != 3) throw Error(ErrorCode::ConfigError, "toy.latent_shape must be [c, h, w]");
        cfg.toy.latent_shape = {s[0], s[1], s[2]};
      }
      if (t.contains("attention_resolution")) {
        const auto r = t.at("attention_resolution").get<std::vector<int>>();
        if (r.size() != 2) throw Error(ErrorCode::ConfigError, "toy.attention_resolution must be [h, w]");
        cfg.toy.attention_resolution = {r[0], r[1]};
      }
      read(t, "variance", cfg.toy.variance);
      read(t, "auto_vocabulary", cfg.toy.auto_vocabulary);
      read(t, "auto_shift", cfg.toy.auto_shift);
      read(t, "decode_scale", cfg.toy.decode_scale);
      read(t, "schedule_steps", cfg.toy.schedule_steps);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, "malformed config", e.what());
  }
  return cfg;
}

RunConfig load_config(const fs::path& path) {
  json j;
  try {
    j = json::parse(util::read_text_file(path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ConfigError, "config " + path.string() + " is not JSON", e.what());
  }
  RunConfig cfg = config_from_json(j, path.parent_path());
  const Endpoint ep = Endpoint::from_env({cfg.vlm.base_url, cfg.vlm.api_key});
  cfg.vlm.base_url = ep.base_url;
  cfg.vlm.api_key = ep.api_key;
  return cfg;
}

json to_json(const RunConfig& cfg) {
  json datasets = json::array();
  for (const auto& d : cfg.datasets) datasets.push_back({{"name", d.name}, {"path", d.path.generic_string()}});
  const auto& e = cfg.edit;
  return {
      {"vlm",
       {{"base_url", cfg.vlm.base_url},
        {"extractor_model", cfg.vlm.extractor_model},
        {"manipulator_model", cfg.vlm.manipulator_model},
        {"evaluator_model", cfg.vlm.evaluator_model},
        {"max_in_flight", cfg.vlm.max_in_flight}}},
      {"service", {{"base_url", cfg.service.base_url}, {"session", cfg.service.session}}},
      {"backend", std::string(to_string(cfg.backend))},
      {"edit",
       {{"edit_scale", e.edit_scale},
        {"concept_scales", e.concept_scales},
        {"threshold", e.threshold},
        {"warmup_steps", e.warmup_steps},
        {"inversion_steps", e.inversion_steps},
        {"skip_ratio", e.skip_ratio},
        {"source_guidance", e.source_guidance},
        {"intersect_masks", e.intersect_masks},
        {"guide_base", e.guide_base}}},
      {"datasets", datasets},
      {"sample_count", cfg.sample_count},
      {"seed", cfg.seed},
      {"workers", cfg.workers},
      {"fixture_mode", cfg.fixtures_dir.has_value()},
      {"distance", std::string(to_string(cfg.distance_method()))},
      {"method", cfg.method_label},
  };
}

}  // namespace fmcgm
