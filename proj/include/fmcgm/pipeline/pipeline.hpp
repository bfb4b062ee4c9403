// Copyright 2026 The fmcgm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "fmcgm/backend/denoiser.hpp"
#include "fmcgm/backend/service_client.hpp"
#include "fmcgm/csg/edit.hpp"
#include "fmcgm/eval/evaluation.hpp"
#include "fmcgm/extractor/extractor.hpp"
#include "fmcgm/gateway/client.hpp"
#include "fmcgm/manipulator/manipulator.hpp"
#include "fmcgm/pipeline/config.hpp"

namespace fmcgm {

/// What happened to one intervention of one image. File names are relative
/// to the image's output directory.
struct InterventionOutcome {
  std::string intervention_id;
  std::optional<EditPromptSet> prompts;
  std::string image_file;
  std::string tensor_file;
  std::string eval_file;
  int guided_steps = 0;
  std::optional<EvalVerdict> verdict;
  std::optional<double> vlm_eff;
  std::optional<double> distance;
  /// "<ErrorCode>: message" of the stage that failed, if any.
  std::string error;

  [[nodiscard]] bool ok() const noexcept { return error.empty(); }
};

struct RunRecord {
  std::string image_id;
  std::string dataset;
  std::string source;
  std::string base_prompt;
  /// "caption" (sidecar or argument) or "describe".
  std::string base_prompt_origin;
  std::optional<ConceptGraph> graph;
  std::vector<Intervention> interventions;
  std::vector<InterventionOutcome> outcomes;
  std::vector<std::string> warnings;
  /// Errors of image-level stages, keyed by stage name.
  std::map<std::string, std::string> stage_errors;

  /// Every stage succeeded for every intervention.
  [[nodiscard]] bool complete() const;
};

nlohmann::json to_json(const RunRecord& r);

/// Wall-clock seconds per stage; kept out of record.json so records stay
/// byte-identical across reruns.
using StageTimings = std::map<std::string, double>;

struct DatasetItem {
  std::string dataset;
  std::string image_id;
  std::filesystem::path image;
  std::optional<std::string> caption;
};

/// Images (png, jpg, jpeg, bmp, webp) in `dir`, sorted by file name, each
/// with the text of a same-stem .txt sidecar when present.
/// Errors: DatasetEmpty, IoError.
std::vector<DatasetItem> list_dataset(const DatasetSpec& spec);

/// `count` items drawn without replacement by a partial Fisher-Yates shuffle
/// seeded with seed ^ hash(dataset name). Errors: InsufficientItems.
std::vector<DatasetItem> sample_items(const std::vector<DatasetItem>& items, int count, std::uint64_t seed);

struct DatasetRun {
  std::vector<RunRecord> records;
  EvalResult result;
  nlohmann::json manifest;
};

/// Orchestrates describe -> extract -> propose -> edit -> evaluate and writes
/// artifacts under cfg.out_dir/<image_id>/.
class Pipeline {
 public:
  explicit Pipeline(RunConfig cfg);
  /// For tests: inject the gateway transport and backend.
  Pipeline(RunConfig cfg, std::shared_ptr<ChatTransport> transport,
           std::shared_ptr<const DenoiserBackend> backend);

  // Individual stages. Each writes its artifact into `dir`.
  std::string base_prompt(const EncodedImage& image, const std::string& image_id,
                          const std::optional<std::string>& caption, std::string* origin = nullptr);
  ExtractionOutcome extract_stage(const EncodedImage& image, const std::string& base_prompt,
                                  const std::string& image_id, const std::filesystem::path& dir);
  ProposalOutcome manipulate_stage(const EncodedImage& image, const std::string& base_prompt,
                                   const ConceptGraph& graph, const std::string& image_id,
                                   const std::filesystem::path& dir);
  /// Edits every intervention from one shared inversion. Per-intervention
  /// failures land in the returned outcomes.
  std::vector<InterventionOutcome> edit_stage(const Image& image, const std::string& base_prompt,
                                              const std::vector<Intervention>& interventions,
                                              const std::filesystem::path& dir);
  /// Fills verdict, score and distance for every outcome that has an image.
  void evaluate_stage(const Image& factual, const std::string& image_id,
                      const std::vector<Intervention>& interventions,
                      std::vector<InterventionOutcome>& outcomes, const std::filesystem::path& dir);

  /// Full pipeline for one image. Only extraction failures stop early; the
  /// record is written to <out>/<image_id>/record.json either way.
  RunRecord run_single(const std::filesystem::path& image_path, const std::optional<std::string>& caption,
                       const std::string& image_id, const std::string& dataset = "default");

  /// Samples every configured dataset, runs images on a worker pool and
  /// writes report.json, report.csv and manifest.json.
  /// Errors: DatasetEmpty, InsufficientItems.
  DatasetRun run_dataset();

  [[nodiscard]] const RunConfig& config() const noexcept { return cfg_; }
  [[nodiscard]] VlmClient& client() noexcept { return *client_; }
  [[nodiscard]] const DenoiserBackend& backend() const noexcept { return *backend_; }
  [[nodiscard]] StageTimings timings(const std::string& image_id) const;

 private:
  void record_time(const std::string& image_id, const std::string& stage, double seconds);

  RunConfig cfg_;
  std::unique_ptr<VlmClient> client_;
  std::shared_ptr<const DenoiserBackend> backend_;
  std::unique_ptr<ServiceClient> service_;
  mutable std::mutex timings_mu_;
  std::map<std::string, StageTimings> timings_;
};

/// Aggregates every <out>/*/record.json (the `report` verb).
EvalResult report_from_records(const std::filesystem::path& out_dir, const std::string& method,
                               DistanceMethod method_used);

/// Example rows contributed by one record (interventions with a score).
std::vector<ExampleRecord> examples_of(const RunRecord& r, const std::string& method);

/// Reads a record.json written by run_single.
RunRecord record_from_json(const nlohmann::json& j);

/// Full-precision tensor dump: {"shape": [c, h, w], "data": [...]}.
nlohmann::json latent_to_json(const Latent& latent);
Latent latent_from_json(const nlohmann::json& j);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace fmcgm
