// Copyright 2026 The fmcgm Authors
// SPDX-License-Identifier: Apache-2.0

#include "fmcgm/error.hpp"
#include "fmcgm/pipeline/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <random>
#include <thread>

#include "fmcgm/backend/remote_backend.hpp"
#include "fmcgm/backend/toy_backend.hpp"
#include "fmcgm/gateway/schemas.hpp"
#include "fmcgm/graph/graph_json.hpp"
#include "fmcgm/util/codec.hpp"
#include "fmcgm/util/text.hpp"

namespace fmcgm {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string describe(const Error& e) { return std::string(to_string(e.code())) + ": " + e.what(); }

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

EncodedImage encoded(const Image& img) { return {encode_png(img), "image/png"}; }

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::shared_ptr<ChatTransport> make_transport(const RunConfig& cfg) {
  if (cfg.fixtures_dir) return std::make_shared<FixtureTransport>(*cfg.fixtures_dir);
  return std::make_shared<HttpChatTransport>(Endpoint{cfg.vlm.base_url, cfg.vlm.api_key});
}

std::shared_ptr<const DenoiserBackend> make_backend(const RunConfig& cfg) {
  if (cfg.backend == BackendKind::Toy) return std::make_shared<ToyBackend>(cfg.toy);
  return std::make_shared<RemoteBackend>(RemoteOptions{cfg.service.base_url, cfg.service.session,
                                                       std::chrono::milliseconds(cfg.service.timeout_ms)});
}

}  // namespace

bool RunRecord::complete() const {
  if (!stage_errors.empty() || !graph || interventions.empty()) return false;
  return std::all_of(outcomes.begin(), outcomes.end(), [](const auto& o) { return o.ok(); });
}

// ---- JSON helpers -----------------------------------------------------------

void write_json(const fs::path& path, const json& j) { util::write_file_atomic(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
  try {
    return json::parse(util::read_text_file(path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::SchemaInvalid, path.string() + " is not JSON", e.what());
  }
}

json latent_to_json(const Latent& latent) {
  const auto& s = latent.shape();
  const auto flat = latent.flat();
  return {{"shape", {s.channels, s.height, s.width}}, {"data", std::vector<double>(flat.begin(), flat.end())}};
}

Latent latent_from_json(const json& j) {
  try {
    const auto shape = j.at("shape").get<std::vector<int>>();
    if (shape.size() != 3) throw Error(ErrorCode::SchemaInvalid, "tensor shape must be [c, h, w]");
    const auto data = j.at("data").get<std::vector<double>>();
    return Latent(LatentShape{shape[0], shape[1], shape[2]}, std::span<const double>(data));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaInvalid, "malformed tensor file", e.what());
  }
}

json to_json(const RunRecord& r) {
  json outcomes = json::array();
  for (const auto& o : r.outcomes) {
    json j = {{"intervention_id", o.intervention_id},
              {"image_file", o.image_file},
              {"tensor_file", o.tensor_file},
              {"eval_file", o.eval_file},
              {"guided_steps", o.guided_steps},
              {"error", o.error}};
    j["prompts"] = o.prompts ? to_json(*o.prompts) : json(nullptr);
    j["verdict"] = o.verdict ? to_json(*o.verdict) : json(nullptr);
    j["vlm_eff"] = o.vlm_eff ? json(*o.vlm_eff) : json(nullptr);
    j["distance"] = o.distance ? json(*o.distance) : json(nullptr);
    outcomes.push_back(std::move(j));
  }
  json ivs = json::array();
  for (const auto& iv : r.interventions) ivs.push_back(to_json(iv));
  return {{"image_id", r.image_id},
          {"dataset", r.dataset},
          {"source", r.source},
          {"base_prompt", r.base_prompt},
          {"base_prompt_origin", r.base_prompt_origin},
          {"graph", r.graph ? to_json(*r.graph) : json(nullptr)},
          {"interventions", ivs},
          {"outcomes", outcomes},
          {"warnings", r.warnings},
          {"stage_errors", r.stage_errors},
          {"complete", r.complete()}};
}

RunRecord record_from_json(const json& j) {
  try {
    RunRecord r;
    r.image_id = j.at("image_id").get<std::string>();
    r.dataset = j.at("dataset").get<std::string>();
    r.source = j.value("source", std::string());
    r.base_prompt = j.value("base_prompt", std::string());
    r.base_prompt_origin = j.value("base_prompt_origin", std::string());
    if (j.contains("graph") && !j.at("graph").is_null()) r.graph = graph_from_json(j.at("graph"));
    if (j.contains("interventions") && !j.at("interventions").empty()) {
      r.interventions = validate_manipulator({{"interventions", j.at("interventions")}}).interventions;
    }
    for (const auto& o : j.at("outcomes")) {
      InterventionOutcome out;
      out.intervention_id = o.at("intervention_id").get<std::string>();
      out.image_file = o.value("image_file", std::string());
      out.tensor_file = o.value("tensor_file", std::string());
      out.eval_file = o.value("eval_file", std::string());
      out.guided_steps = o.value("guided_steps", 0);
      out.error = o.value("error", std::string());
      if (o.contains("prompts") && !o.at("prompts").is_null()) out.prompts = prompt_set_from_json(o.at("prompts"));
      if (o.contains("verdict") && !o.at("verdict").is_null()) out.verdict = validate_evaluator(o.at("verdict"));
      if (o.contains("vlm_eff") && !o.at("vlm_eff").is_null()) out.vlm_eff = o.at("vlm_eff").get<double>();
      if (o.contains("distance") && !o.at("distance").is_null()) out.distance = o.at("distance").get<double>();
      r.outcomes.push_back(std::move(out));
    }
    r.warnings = j.value("warnings", std::vector<std::string>{});
    r.stage_errors = j.value("stage_errors", std::map<std::string, std::string>{});
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaInvalid, "malformed run record", e.what());
  }
}

std::vector<ExampleRecord> examples_of(const RunRecord& r, const std::string& method) {
  std::vector<ExampleRecord> out;
  for (const auto& o : r.outcomes) {
    if (!o.vlm_eff) continue;
    out.push_back({method, r.dataset, r.image_id, o.intervention_id, *o.vlm_eff, o.distance});
  }
  return out;
}

// ---- datasets ---------------------------------------------------------------

std::vector<DatasetItem> list_dataset(const DatasetSpec& spec) {
  std::error_code ec;
  if (!fs::is_directory(spec.path, ec)) {
    throw Error(ErrorCode::IoError, "dataset '" + spec.name + "' is not a directory: " + spec.path.string());
  }
  std::vector<fs::path> images;
  for (const auto& entry : fs::directory_iterator(spec.path)) {
    if (!entry.is_regular_file()) continue;
    const std::string ext = util::to_lower(entry.path().extension().string());
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp" || ext == ".webp") {
      images.push_back(entry.path());
    }
  }
  if (images.empty()) throw Error(ErrorCode::DatasetEmpty, "dataset '" + spec.name + "' has no images");
  std::sort(images.begin(), images.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });
  std::vector<DatasetItem> out;
  for (const auto& img : images) {
    DatasetItem item{spec.name, spec.name + "-" + img.stem().string(), img, std::nullopt};
    fs::path sidecar = img;
    sidecar.replace_extension(".txt");
    if (fs::exists(sidecar)) {
      auto text = util::trim(util::read_text_file(sidecar));
      if (!text.empty()) item.caption = std::move(text);
    }
    out.push_back(std::move(item));
  }
  return out;
}

std::vector<DatasetItem> sample_items(const std::vector<DatasetItem>& items, int count, std::uint64_t seed) {
  if (items.empty()) throw Error(ErrorCode::DatasetEmpty, "no items to sample");
  if (count < 1 || static_cast<std::size_t>(count) > items.size()) {
    throw Error(ErrorCode::InsufficientItems, "dataset '" + items.front().dataset + "' has " +
                                                  std::to_string(items.size()) + " items, " +
                                                  std::to_string(count) + " requested");
  }
  std::mt19937_64 rng(seed ^ fnv1a(items.front().dataset));
  std::vector<std::size_t> idx(items.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::vector<DatasetItem> out;
  for (std::size_t i = 0; i < static_cast<std::size_t>(count); ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
    out.push_back(items[idx[i]]);
  }
  return out;
}

// ---- pipeline ---------------------------------------------------------------

Pipeline::Pipeline(RunConfig cfg) : Pipeline(cfg, make_transport(cfg), make_backend(cfg)) {}

Pipeline::Pipeline(RunConfig cfg, std::shared_ptr<ChatTransport> transport,
                   std::shared_ptr<const DenoiserBackend> backend)
    : cfg_(std::move(cfg)), backend_(std::move(backend)) {
  cfg_.validate();
  RetryPolicy policy;
  policy.timeout = std::chrono::milliseconds(cfg_.vlm.timeout_ms);
  client_ = std::make_unique<VlmClient>(std::move(transport), policy, cfg_.vlm.cache_dir, cfg_.vlm.max_in_flight);
  if (!cfg_.service.base_url.empty()) {
    service_ = std::make_unique<ServiceClient>(cfg_.service.base_url,
                                               std::chrono::milliseconds(cfg_.service.timeout_ms));
  }
}

void Pipeline::record_time(const std::string& image_id, const std::string& stage, double seconds) {
  std::lock_guard lock(timings_mu_);
  timings_[image_id][stage] += seconds;
}

StageTimings Pipeline::timings(const std::string& image_id) const {
  std::lock_guard lock(timings_mu_);
  auto it = timings_.find(image_id);
  return it == timings_.end() ? StageTimings{} : it->second;
}

std::string Pipeline::base_prompt(const EncodedImage& image, const std::string& image_id,
                                  const std::optional<std::string>& caption, std::string* origin) {
  if (caption && !util::trim(*caption).empty()) {
    if (origin) *origin = "caption";
    return util::trim(*caption);
  }
  Stopwatch sw;
  ExtractorOptions opts{cfg_.vlm.extractor_model, cfg_.template_dir};
  auto text = describe_scene(*client_, image, image_id, opts).text;
  record_time(image_id, "describe", sw.seconds());
  if (origin) *origin = "describe";
  return text;
}

ExtractionOutcome Pipeline::extract_stage(const EncodedImage& image, const std::string& base_prompt,
                                          const std::string& image_id, const fs::path& dir) {
  Stopwatch sw;
  ExtractorOptions opts{cfg_.vlm.extractor_model, cfg_.template_dir};
  auto out = extract(*client_, image, base_prompt, image_id, opts);
  record_time(image_id, "extract", sw.seconds());
  write_json(dir / "graph.json", to_json(out.graph));
  return out;
}

ProposalOutcome Pipeline::manipulate_stage(const EncodedImage& image, const std::string& base_prompt,
                                           const ConceptGraph& graph, const std::string& image_id,
                                           const fs::path& dir) {
  Stopwatch sw;
  ManipulatorOptions opts{cfg_.vlm.manipulator_model, cfg_.template_dir};
  auto out = propose_interventions(*client_, image, base_prompt, graph, image_id, opts);
  record_time(image_id, "manipulate", sw.seconds());
  json ivs = json::array();
  for (const auto& iv : out.interventions) ivs.push_back(to_json(iv));
  write_json(dir / "interventions.json", {{"interventions", ivs}, {"warnings", out.warnings}});
  return out;
}

std::vector<InterventionOutcome> Pipeline::edit_stage(const Image& image, const std::string& base_prompt,
                                                      const std::vector<Intervention>& interventions,
                                                      const fs::path& dir) {
  const std::string image_id = dir.filename().string();
  std::vector<InterventionOutcome> outcomes;
  for (const auto& iv : interventions) {
    InterventionOutcome o;
    o.intervention_id = iv.id;
    outcomes.push_back(std::move(o));
  }

  Stopwatch sw;
  std::optional<InversionResult> inv;
  try {
    inv = invert(backend_->encode(image), base_prompt, cfg_.edit, *backend_);
  } catch (const Error& e) {
    for (auto& o : outcomes) o.error = "edit: " + describe(e);
    return outcomes;
  }
  record_time(image_id, "invert", sw.seconds());

  for (std::size_t k = 0; k < interventions.size(); ++k) {
    auto& o = outcomes[k];
    Stopwatch step;
    try {
      o.prompts = build_edit_prompts(interventions[k], base_prompt);
      const EditResult er = edit_from(*inv, *o.prompts, cfg_.edit, *backend_);
      o.guided_steps = er.guided_steps;
      const std::string stem = "cf_" + std::to_string(k + 1);
      write_json(dir / (stem + ".tensor.json"), latent_to_json(er.latent));
      o.tensor_file = stem + ".tensor.json";
      util::write_file_atomic(dir / (stem + ".png"), encode_png(backend_->decode(er.latent)));
      o.image_file = stem + ".png";
    } catch (const Error& e) {
      o.error = "edit: " + describe(e);
    }
    record_time(image_id, "edit", step.seconds());
  }
  return outcomes;
}

void Pipeline::evaluate_stage(const Image& factual, const std::string& image_id,
                              const std::vector<Intervention>& interventions,
                              std::vector<InterventionOutcome>& outcomes, const fs::path& dir) {
  EvaluatorOptions opts{cfg_.vlm.evaluator_model, cfg_.template_dir};
  const DistanceMethod method = cfg_.distance_method();
  for (std::size_t k = 0; k < outcomes.size() && k < interventions.size(); ++k) {
    auto& o = outcomes[k];
    if (!o.ok() || o.image_file.empty()) continue;
    Stopwatch sw;
    try {
      const Image cf = decode_image(util::read_file(dir / o.image_file));
      const auto res = vlm_eff(*client_, encoded(cf), interventions[k], interventions[k].generation_prompt,
                               image_id + "/eval_" + std::to_string(k + 1), opts);
      o.verdict = res.verdict;
      o.vlm_eff = res.score;
      Image reference = factual;
      if (reference.width != cf.width || reference.height != cf.height) {
        reference = backend_->decode(backend_->encode(factual));
      }
      if (reference.channels != cf.channels) {
        reference = backend_->decode(backend_->encode(reference));
      }
      o.distance = perceptual_distance(reference, cf, method, service_.get());
      const std::string name = "eval_" + std::to_string(k + 1) + ".json";
      json j = to_json(res.verdict);
      j["score"] = res.score;
      j["distance"] = *o.distance;
      j["distance_method"] = std::string(to_string(method));
      write_json(dir / name, j);
      o.eval_file = name;
    } catch (const Error& e) {
      o.error = "evaluate: " + describe(e);
    }
    record_time(image_id, "evaluate", sw.seconds());
  }
}

RunRecord Pipeline::run_single(const fs::path& image_path, const std::optional<std::string>& caption,
                               const std::string& image_id, const std::string& dataset) {
  RunRecord rec;
  rec.image_id = image_id;
  rec.dataset = dataset;
  rec.source = image_path.filename().string();
  const fs::path dir = cfg_.out_dir / image_id;
  fs::create_directories(dir);

  auto finish = [&]() -> RunRecord {
    write_json(dir / "record.json", to_json(rec));
    json t = json::object();
    for (const auto& [stage, secs] : timings(image_id)) t[stage] = secs;
    write_json(dir / "timings.json", t);
    return rec;
  };

  Image image;
  EncodedImage enc;
  try {
    const auto bytes = util::read_file(image_path);
    image = decode_image(bytes);
    enc = {bytes, sniff_media_type(bytes)};
  } catch (const Error& e) {
    rec.stage_errors["load"] = describe(e);
    return finish();
  }

  try {
    rec.base_prompt = base_prompt(enc, image_id, caption, &rec.base_prompt_origin);
  } catch (const Error& e) {
    rec.stage_errors["describe"] = describe(e);
    return finish();
  }

  try {
    auto ex = extract_stage(enc, rec.base_prompt, image_id, dir);
    rec.graph = std::move(ex.graph);
    rec.warnings.insert(rec.warnings.end(), ex.warnings.begin(), ex.warnings.end());
  } catch (const Error& e) {
    rec.stage_errors["extract"] = describe(e);
    return finish();
  }

  try {
    auto prop = manipulate_stage(enc, rec.base_prompt, *rec.graph, image_id, dir);
    rec.interventions = std::move(prop.interventions);
    rec.warnings.insert(rec.warnings.end(), prop.warnings.begin(), prop.warnings.end());
  } catch (const Error& e) {
    rec.stage_errors["manipulate"] = describe(e);
    return finish();
  }

  rec.outcomes = edit_stage(image, rec.base_prompt, rec.interventions, dir);
  evaluate_stage(image, image_id, rec.interventions, rec.outcomes, dir);
  return finish();
}

DatasetRun Pipeline::run_dataset() {
  if (cfg_.datasets.empty()) throw Error(ErrorCode::ConfigError, "no datasets configured");
  std::vector<DatasetItem> todo;
  json samples = json::object();
  for (const auto& spec : cfg_.datasets) {
    auto picked = sample_items(list_dataset(spec), cfg_.sample_count, cfg_.seed);
    json names = json::array();
    for (const auto& item : picked) names.push_back(item.image.filename().string());
    samples[spec.name] = names;
    todo.insert(todo.end(), picked.begin(), picked.end());
  }

  std::vector<RunRecord> records(todo.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < todo.size(); i = next++) {
      const auto& item = todo[i];
      records[i] = run_single(item.image, item.caption, item.image_id, item.dataset);
    }
  };
  const int n_workers = std::min<int>(cfg_.workers, static_cast<int>(todo.size()));
  std::vector<std::thread> pool;
  for (int w = 1; w < n_workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  DatasetRun run;
  std::vector<ExampleRecord> examples;
  json images = json::array();
  for (const auto& r : records) {
    auto ex = examples_of(r, cfg_.method_label);
    examples.insert(examples.end(), ex.begin(), ex.end());
    images.push_back({{"image_id", r.image_id},
                      {"dataset", r.dataset},
                      {"record", (fs::path(r.image_id) / "record.json").generic_string()},
                      {"complete", r.complete()}});
  }
  if (!examples.empty()) {
    run.result = aggregate(examples, cfg_.distance_method());
    write_json(cfg_.out_dir / "report.json", to_json(run.result));
    util::write_file_atomic(cfg_.out_dir / "report.csv", to_csv(run.result));
  }
  const auto stats = client_->stats();
  run.manifest = {{"config", to_json(cfg_)},
                  {"seed", cfg_.seed},
                  {"samples", samples},
                  {"images", images},
                  {"model_calls", {{"transport", stats.transport_calls},
                                   {"network", client_->transport().remote() ? stats.transport_calls : 0},
                                   {"cache_hits", stats.cache_hits},
                                   {"retries", stats.retries}}}};
  write_json(cfg_.out_dir / "manifest.json", run.manifest);
  run.records = std::move(records);
  return run;
}

EvalResult report_from_records(const fs::path& out_dir, const std::string& method, DistanceMethod method_used) {
  std::vector<ExampleRecord> examples;
  std::vector<fs::path> files;
  if (fs::is_directory(out_dir)) {
    for (const auto& entry : fs::directory_iterator(out_dir)) {
      if (entry.is_directory() && fs::exists(entry.path() / "record.json")) files.push_back(entry.path() / "record.json");
    }
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    auto ex = examples_of(record_from_json(read_json(f)), method);
    examples.insert(examples.end(), ex.begin(), ex.end());
  }
  return aggregate(examples, method_used);
}

}  // namespace fmcgm
