// Copyright 2026 The fmcgm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "fmcgm/backend/toy_backend.hpp"
#include "fmcgm/csg/guidance.hpp"
#include "fmcgm/eval/evaluation.hpp"

namespace fmcgm {

enum class BackendKind { Toy, Remote };

std::string_view to_string(BackendKind k) noexcept;
BackendKind parse_backend_kind(std::string_view name);

struct VlmSettings {
  std::string base_url;
  std::string api_key;
  std::string extractor_model;
  std::string manipulator_model;
  std::string evaluator_model;
  int max_in_flight = 4;
  int timeout_ms = 120000;
  std::optional<std::filesystem::path> cache_dir;
};

struct ServiceSettings {
  std::string base_url;
  std::string session = "default";
  int timeout_ms = 120000;
};

struct DatasetSpec {
  std::string name;
  std::filesystem::path path;
};

struct RunConfig {
  VlmSettings vlm;
  ServiceSettings service;
  BackendKind backend = BackendKind::Toy;
  EditConfig edit;
  std::vector<DatasetSpec> datasets;
  int sample_count = 75;
  std::uint64_t seed = 1234;
  std::filesystem::path out_dir = "out";
  /// Replay canned model replies from this directory instead of calling an endpoint.
  std::optional<std::filesystem::path> fixtures_dir;
  std::optional<std::filesystem::path> template_dir;
  int workers = 2;
  /// Defaults to lpips_remote with the remote backend, pixel_mse_fallback with the toy one.
  std::optional<DistanceMethod> distance;
  std::string method_label = "CSG";
  ToyWorld toy = default_toy_world();

  /// Throws ConfigError on out-of-range values (sample_count >= 1, workers >= 1, ...).
  void validate() const;
  [[nodiscard]] DistanceMethod distance_method() const;

  static ToyWorld default_toy_world();
};

/// Reads a config document. Relative paths resolve against `base_dir`.
/// Unknown keys are rejected. Errors: ConfigError.
RunConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});

/// Reads the file, then lets FMCGM_VLM_BASE_URL / FMCGM_VLM_API_KEY override
/// the endpoint. Errors: ConfigError, IoError.
RunConfig load_config(const std::filesystem::path& path);

/// For manifests: the API key is never written.
nlohmann::json to_json(const RunConfig& cfg);

}  // namespace fmcgm
