// Copyright 2026 The fmcgm Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end. Every stage can run on its own:
//
//   fmcgm extract    --image img.png [--caption "..."]   -> out/<id>/graph.json
//   fmcgm manipulate --image img.png                     -> out/<id>/interventions.json
//   fmcgm edit       --image img.png                     -> out/<id>/cf_<k>.{png,tensor.json}
//   fmcgm evaluate   --image img.png                     -> out/<id>/eval_<k>.json
//   fmcgm run        [--image img.png]                   -> everything (datasets from config without --image)
//   fmcgm report                                         -> out/report.{json,csv}
//
// Exit status is 0 only when every requested stage succeeded for at least one image.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "fmcgm/gateway/schemas.hpp"
#include "fmcgm/graph/graph_json.hpp"
#include "fmcgm/pipeline/pipeline.hpp"
#include "fmcgm/util/codec.hpp"

namespace fs = std::filesystem;
using namespace fmcgm;

namespace {

struct CommonFlags {
  std::string config;
  std::string backend;
  std::string fixtures;
  std::optional<std::uint64_t> seed;
  std::string out;
};

struct ImageFlags {
  std::string image;
  std::string caption;
  std::string id;
};

RunConfig build_config(const CommonFlags& f) {
  RunConfig cfg;
  if (!f.config.empty()) {
    cfg = load_config(f.config);
  } else {
    const Endpoint ep = Endpoint::from_env();
    cfg.vlm.base_url = ep.base_url;
    cfg.vlm.api_key = ep.api_key;
  }
  if (!f.backend.empty()) cfg.backend = parse_backend_kind(f.backend);
  if (!f.fixtures.empty()) cfg.fixtures_dir = fs::path(f.fixtures);
  if (f.seed) cfg.seed = *f.seed;
  if (!f.out.empty()) cfg.out_dir = fs::path(f.out);
  return cfg;
}

std::string image_id_of(const ImageFlags& f) { return f.id.empty() ? fs::path(f.image).stem().string() : f.id; }

std::optional<std::string> caption_of(const ImageFlags& f) {
  if (!f.caption.empty()) return f.caption;
  fs::path sidecar(f.image);
  sidecar.replace_extension(".txt");
  if (fs::exists(sidecar)) return util::read_text_file(sidecar);
  return std::nullopt;
}

void add_common(CLI::App* app, CommonFlags& f) {
  app->add_option("--config", f.config, "JSON run configuration");
  app->add_option("--backend", f.backend, "denoiser backend")->check(CLI::IsMember({"toy", "remote"}));
  app->add_option("--fixtures", f.fixtures, "replay model replies from this directory");
  app->add_option("--seed", f.seed, "sampling seed");
  app->add_option("--out", f.out, "output directory");
}

void add_image(CLI::App* app, ImageFlags& f, bool required) {
  auto* opt = app->add_option("--image", f.image, "input image");
  if (required) opt->required();
  app->add_option("--caption", f.caption, "base prompt (default: sidecar .txt, else a model description)");
  app->add_option("--id", f.id, "image id (default: file stem)");
}

struct Loaded {
  Image image;
  EncodedImage encoded;
};

Loaded load_image(const std::string& path) {
  const auto bytes = util::read_file(path);
  return {decode_image(bytes), {bytes, sniff_media_type(bytes)}};
}

std::vector<Intervention> read_interventions(const fs::path& dir) {
  const auto j = read_json(dir / "interventions.json");
  return validate_manipulator({{"interventions", j.at("interventions")}}).interventions;
}

int report_outcomes(const std::vector<InterventionOutcome>& outcomes) {
  bool all_ok = !outcomes.empty();
  for (const auto& o : outcomes) {
    if (o.ok()) {
      std::printf("%s: ok", o.intervention_id.c_str());
      if (o.vlm_eff) std::printf(" vlm_eff=%.3f", *o.vlm_eff);
      if (o.distance) std::printf(" distance=%.4f", *o.distance);
      std::printf("\n");
    } else {
      std::printf("%s: %s\n", o.intervention_id.c_str(), o.error.c_str());
      all_ok = false;
    }
  }
  return all_ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Causal counterfactual image editing pipeline"};
  app.require_subcommand(1);

  CommonFlags common;
  ImageFlags img;
  std::string method = "CSG";
  std::string distance;

  auto* extract_cmd = app.add_subcommand("extract", "describe the image and extract its concept graph");
  auto* manip_cmd = app.add_subcommand("manipulate", "propose interventions on an extracted graph");
  auto* edit_cmd = app.add_subcommand("edit", "render counterfactuals for proposed interventions");
  auto* eval_cmd = app.add_subcommand("evaluate", "score rendered counterfactuals");
  auto* run_cmd = app.add_subcommand("run", "full pipeline on one image or on the configured datasets");
  auto* report_cmd = app.add_subcommand("report", "re-aggregate records under the output directory");
  for (auto* cmd : {extract_cmd, manip_cmd, edit_cmd, eval_cmd, run_cmd, report_cmd}) add_common(cmd, common);
  for (auto* cmd : {extract_cmd, manip_cmd, edit_cmd, eval_cmd}) add_image(cmd, img, true);
  add_image(run_cmd, img, false);
  report_cmd->add_option("--method", method, "method label for report rows");
  report_cmd->add_option("--distance", distance, "distance method used by the records")
      ->check(CLI::IsMember({"lpips_remote", "pixel_mse_fallback"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (report_cmd->parsed()) {
      RunConfig cfg;
      if (!common.config.empty()) cfg = load_config(common.config);
      if (!common.out.empty()) cfg.out_dir = common.out;
      if (!common.backend.empty()) cfg.backend = parse_backend_kind(common.backend);
      const DistanceMethod dm = distance.empty() ? cfg.distance_method() : parse_distance_method(distance);
      const auto result = report_from_records(cfg.out_dir, method, dm);
      write_json(cfg.out_dir / "report.json", to_json(result));
      util::write_file_atomic(cfg.out_dir / "report.csv", to_csv(result));
      std::cout << to_csv(result);
      return 0;
    }

    Pipeline pipeline(build_config(common));
    const auto& out_dir = pipeline.config().out_dir;

    if (run_cmd->parsed()) {
      if (!img.image.empty()) {
        const auto rec = pipeline.run_single(img.image, caption_of(img), image_id_of(img));
        for (const auto& [stage, err] : rec.stage_errors) std::printf("%s: %s\n", stage.c_str(), err.c_str());
        return rec.complete() ? report_outcomes(rec.outcomes) : 1;
      }
      const auto run = pipeline.run_dataset();
      int complete = 0;
      for (const auto& r : run.records) complete += r.complete() ? 1 : 0;
      std::printf("%d of %zu images complete\n", complete, run.records.size());
      if (!run.result.per_dataset.empty()) std::cout << to_csv(run.result);
      return complete > 0 ? 0 : 1;
    }

    const std::string id = image_id_of(img);
    const fs::path dir = out_dir / id;
    fs::create_directories(dir);
    const Loaded in = load_image(img.image);
    const std::string base = pipeline.base_prompt(in.encoded, id, caption_of(img));

    if (extract_cmd->parsed()) {
      const auto ex = pipeline.extract_stage(in.encoded, base, id, dir);
      for (const auto& w : ex.warnings) std::printf("warning: %s\n", w.c_str());
      std::printf("%zu concepts, %zu edges -> %s\n", ex.graph.size(), ex.graph.edges().size(),
                  (dir / "graph.json").string().c_str());
      return 0;
    }

    if (manip_cmd->parsed()) {
      const auto graph = graph_from_json(read_json(dir / "graph.json"));
      const auto prop = pipeline.manipulate_stage(in.encoded, base, graph, id, dir);
      for (const auto& w : prop.warnings) std::printf("warning: %s\n", w.c_str());
      for (const auto& iv : prop.interventions) {
        std::printf("%s: do(%s = %s), %zu propagated\n", iv.id.c_str(), iv.target_concept_id.c_str(),
                    iv.new_value.c_str(), iv.propagated_changes.size());
      }
      return 0;
    }

    const auto interventions = read_interventions(dir);
    if (edit_cmd->parsed()) return report_outcomes(pipeline.edit_stage(in.image, base, interventions, dir));

    // evaluate: pick up whatever counterfactuals exist on disk.
    std::vector<InterventionOutcome> outcomes;
    for (std::size_t k = 0; k < interventions.size(); ++k) {
      InterventionOutcome o;
      o.intervention_id = interventions[k].id;
      const std::string file = "cf_" + std::to_string(k + 1) + ".png";
      if (fs::exists(dir / file)) o.image_file = file;
      else o.error = "evaluate: missing " + file;
      outcomes.push_back(std::move(o));
    }
    pipeline.evaluate_stage(in.image, id, interventions, outcomes, dir);
    return report_outcomes(outcomes);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s: %s\n", std::string(to_string(e.code())).c_str(), e.what());
    if (!e.detail().empty()) std::fprintf(stderr, "  %s\n", e.detail().c_str());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
