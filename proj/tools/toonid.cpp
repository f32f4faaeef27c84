// Copyright 2026 The ToonID Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// toonid: command-line entry point for the character recognition pipeline.

#include <cstdlib>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "toonid/toonid.hpp"

namespace {

using namespace toonid;

std::optional<fs::path> opt_path(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return fs::path(s);
}

int fail(const std::string& stage, const Error& e) {
  std::cerr << error_json(stage, e) << std::endl;
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"toonid - character-centric recognition for animated movies"};
  app.require_subcommand(1);

  // build-bank
  auto* bb = app.add_subcommand("build-bank", "Build appearance and voice banks");
  std::string bb_candidates, bb_interviews, bb_tracks, bb_segments, bb_sync, bb_out;
  BankBuildOptions bb_opts;
  bb->add_option("--candidates", bb_candidates, "candidates.jsonl")->required();
  bb->add_option("--interviews", bb_interviews, "interview_clusters.jsonl");
  bb->add_option("--tracks", bb_tracks, "labelled tracks for in-movie exemplars");
  bb->add_option("--segments", bb_segments, "speech segments for in-movie exemplars");
  bb->add_option("--sync", bb_sync, "sync.jsonl for in-movie exemplars");
  bb->add_option("--out", bb_out, "output bank.jsonl")->required();
  bb->add_option("--filter-threshold", bb_opts.filter_threshold)->capture_default_str();
  bb->add_option("--merge-tau", bb_opts.merge_tau)->capture_default_str();
  bb->add_option("--vm-th", bb_opts.gates.vm_threshold)->capture_default_str();
  bb->add_option("--sync-th", bb_opts.gates.sync_threshold)->capture_default_str();
  bb->add_option("--voice-cap", bb_opts.voice_cap)->capture_default_str();

  // adapt
  auto* ad = app.add_subcommand("adapt", "Train the visual projection with InfoNCE");
  std::string ad_bank, ad_out;
  TrainConfig ad_cfg;
  ad->add_option("--bank", ad_bank)->required();
  ad->add_option("--epochs", ad_cfg.epochs)->capture_default_str();
  ad->add_option("--lr-start", ad_cfg.lr_start)->capture_default_str();
  ad->add_option("--lr-end", ad_cfg.lr_end)->capture_default_str();
  ad->add_option("--tau", ad_cfg.temperature)->capture_default_str();
  ad->add_option("--seed", ad_cfg.seed)->capture_default_str();
  ad->add_option("--out", ad_out, "output projection.json")->required();

  // recognize-visual
  auto* rv = app.add_subcommand("recognize-visual", "Match seed tracks and identify characters");
  std::string rv_tracks, rv_bank, rv_projection, rv_out;
  VisualOptions rv_opts;
  rv->add_option("--tracks", rv_tracks)->required();
  rv->add_option("--bank", rv_bank)->required();
  rv->add_option("--projection", rv_projection);
  rv->add_option("--k", rv_opts.k)->capture_default_str();
  rv->add_option("--iou-th", rv_opts.track_iou_threshold)->capture_default_str();
  rv->add_option("--nms-th", rv_opts.nms_threshold)->capture_default_str();
  rv->add_option("--jobs", rv_opts.jobs)->capture_default_str();
  rv->add_option("--out", rv_out)->required();

  // recognize-audio and its fusion alias
  struct AudioArgs {
    std::string segments, bank, tracks, sync, out;
    AudioStageOptions opts;
    double fps = 0.0;
    bool no_fusion = false;
  };
  AudioArgs ra_args, fu_args;
  auto add_audio = [&](CLI::App* sc, AudioArgs& a, bool allow_no_fusion) {
    sc->add_option("--segments", a.segments)->required();
    sc->add_option("--bank", a.bank)->required();
    sc->add_option("--tracks", a.tracks, "labelled tracks");
    sc->add_option("--sync", a.sync);
    sc->add_option("--k", a.opts.diarise.k)->capture_default_str();
    sc->add_option("--lambda", a.opts.diarise.fusion.lambda)->capture_default_str();
    sc->add_option("--low-conf", a.opts.diarise.fusion.low_conf_threshold)->capture_default_str();
    sc->add_option("--fps", a.fps, "overrides the tracks manifest fps");
    sc->add_option("--out", a.out)->required();
    if (allow_no_fusion) sc->add_flag("--no-fusion", a.no_fusion, "audio-only labels");
  };
  auto* ra = app.add_subcommand("recognize-audio", "Speaker recognition with visual correction");
  add_audio(ra, ra_args, true);
  auto* fu = app.add_subcommand("fuse", "Alias of recognize-audio with fusion enabled");
  add_audio(fu, fu_args, false);

  // subtitles
  auto* st = app.add_subcommand("subtitles", "Write speaker-tagged SRT subtitles");
  std::string st_segments, st_out;
  st->add_option("--segments", st_segments)->required();
  st->add_option("--out", st_out)->required();

  // ad-prompts
  auto* ap = app.add_subcommand("ad-prompts", "Assemble AD prompt packages");
  std::string ap_tracks, ap_intervals, ap_out, ap_responses;
  AdStageOptions ap_opts;
  bool ap_mock = false;
  ap->add_option("--tracks", ap_tracks)->required();
  ap->add_option("--intervals", ap_intervals)->required();
  ap->add_option("--vm-th", ap_opts.vm_retention)->capture_default_str();
  ap->add_option("--frames", ap_opts.frames)->capture_default_str();
  ap->add_option("--out", ap_out)->required();
  ap->add_option("--responses", ap_responses, "submit packages to the generation endpoint and write replies here");
  ap->add_flag("--mock-client", ap_mock, "use the built-in echo client instead of TOONID_GEN_ENDPOINT");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Compute evaluation metrics");
  std::string ev_task, ev_pred, ev_gt, ev_report, ev_bank;
  EvalOptions ev_opts;
  ev->add_option("--task", ev_task)->required()->check(CLI::IsMember({"names", "boxes", "speakers", "der"}));
  ev->add_option("--pred", ev_pred)->required();
  ev->add_option("--gt", ev_gt)->required();
  ev->add_option("--report", ev_report)->required();
  ev->add_option("--bank", ev_bank, "closed-set filter for der ground truth");
  ev->add_flag("--exclude-singing", ev_opts.exclude_singing);
  ev->add_option("--collar", ev_opts.collar_s)->capture_default_str();

  // validate
  auto* va = app.add_subcommand("validate", "Validate a manifest file");
  std::string va_kind, va_file;
  va->add_option("--kind", va_kind)->required()->check(CLI::IsMember({"bank", "tracks", "segments", "sync"}));
  va->add_option("--file", va_file)->required();

  // run
  auto* rn = app.add_subcommand("run", "Run the full pipeline from a config file");
  std::string rn_config;
  rn->add_option("--config", rn_config, "flat JSON config (default: $TOONID_CONFIG)");
  std::map<std::string, std::string> overrides;
  for (const auto& key : PipelineConfig::path_keys()) rn->add_option("--" + key, overrides[key]);
  for (const auto& key : PipelineConfig::value_keys()) rn->add_option("--" + key, overrides[key]);

  CLI11_PARSE(app, argc, argv);

  std::string stage = app.get_subcommands().front()->get_name();
  try {
    if (*bb) {
      auto r = build_bank({bb_candidates, opt_path(bb_interviews), opt_path(bb_tracks), opt_path(bb_segments),
                           opt_path(bb_sync)},
                          bb_opts);
      for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
      write_text_atomic(bb_out, to_jsonl(to_manifest(r.bank)));
    } else if (*ad) {
      auto r = adapt_bank(ad_bank, ad_cfg, ad_out);
      for (std::size_t e = 0; e < r.loss_curve.size(); ++e)
        std::cerr << "epoch " << e << " loss " << r.loss_curve[e] << "\n";
    } else if (*rv) {
      recognize_visual(rv_tracks, rv_bank, opt_path(rv_projection), rv_opts, rv_out);
    } else if (*ra || *fu) {
      AudioArgs& a = *ra ? ra_args : fu_args;
      if (a.fps > 0) a.opts.fps_override = a.fps;
      a.opts.diarise.enable_fusion = !a.no_fusion;
      recognize_audio(a.segments, a.bank, opt_path(a.tracks), opt_path(a.sync), a.opts, a.out);
    } else if (*st) {
      write_subtitles(st_segments, st_out);
    } else if (*ap) {
      auto packages = write_ad_prompts(ap_tracks, ap_intervals, ap_opts, ap_out);
      if (!ap_responses.empty()) {
        stage = "generate";
        if (ap_mock) {
          MockGenerationClient client;
          generate_descriptions(packages, client, 0, ap_responses);
        } else {
          const auto gcfg = GenerationClientConfig::from_env();
          HttpGenerationClient client(gcfg);
          generate_descriptions(packages, client, gcfg.retries, ap_responses);
        }
      }
    } else if (*ev) {
      if (!ev_bank.empty()) ev_opts.bank = fs::path(ev_bank);
      json report = evaluate_task(ev_task, ev_pred, ev_gt, ev_opts);
      report["config"] = {{"task", ev_task}, {"pred", ev_pred}, {"gt", ev_gt}, {"collar", ev_opts.collar_s},
                          {"exclude_singing", ev_opts.exclude_singing}, {"bank", ev_bank}};
      write_text_atomic(ev_report, dump_json(report));
    } else if (*va) {
      const auto doc = read_manifest(va_file);
      std::vector<ValidationIssue> issues;
      if (va_kind == "bank") issues = validate_bank(doc).issues;
      else if (va_kind == "tracks") issues = validate_tracks(doc, {.require_contiguous = false}).issues;
      else if (va_kind == "segments") issues = validate_manifest<SegmentManifest>(doc).issues;
      else issues = validate_manifest<SyncManifest>(doc).issues;
      json out = json::array();
      for (const auto& i : issues) out.push_back({{"path", i.path}, {"message", i.message}});
      std::cout << json{{"file", va_file}, {"valid", issues.empty()}, {"issues", out}}.dump() << std::endl;
      return issues.empty() ? 0 : 2;
    } else if (*rn) {
      if (rn_config.empty())
        if (const char* env = std::getenv("TOONID_CONFIG")) rn_config = env;
      PipelineConfig cfg = rn_config.empty() ? PipelineConfig{} : PipelineConfig::load(rn_config);
      for (const auto& [key, value] : overrides)
        if (!value.empty()) cfg.set(key, json(value));
      run_pipeline(cfg);
    }
  } catch (const StageFailure& e) {
    return fail(e.stage(), e);
  } catch (const Error& e) {
    return fail(stage, e);
  } catch (const std::exception& e) {
    return fail(stage, Error(ErrorCode::kIo, e.what()));
  }
  return 0;
}
