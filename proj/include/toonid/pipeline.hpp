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
#pragma once

// Pipeline stages over manifest files, the flat run configuration, and the
// end-to-end runner used by the `toonid` CLI.

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "toonid/applications.hpp"
#include "toonid/audio_recognition.hpp"
#include "toonid/bank_builder.hpp"
#include "toonid/embedding_adapter.hpp"
#include "toonid/evaluation.hpp"
#include "toonid/generation_client.hpp"
#include "toonid/manifest.hpp"
#include "toonid/visual_recognition.hpp"

namespace toonid {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Auxiliary manifests

struct CandidateManifest {
  std::string movie_id;
  std::size_t visual_dim = 0;
  std::size_t audio_dim = 0;
  std::vector<CandidateImageRecord> records;
};

inline CandidateManifest load_candidates(const fs::path& path) {
  const ManifestDocument doc = read_manifest(path);
  Validated<CandidateManifest> v;
  detail::Checker c(v.issues);
  c.expect_kind(doc.header, "candidates");
  if (auto id = c.string(doc.header, "movie_id", "header")) v.value.movie_id = *id;
  v.value.visual_dim = c.header_dim(doc.header, "visual_dim");
  v.value.audio_dim = c.header_dim(doc.header, "audio_dim");
  for (std::size_t i = 0; i < doc.records.size(); ++i) {
    const auto& r = doc.records[i];
    const auto p = detail::rec_path(i);
    CandidateImageRecord rec;
    if (auto n = c.string(r, "character_name", p)) rec.character_name = *n;
    if (auto t = c.string(r, "source_tag", p)) {
      rec.source_tag = *t;
      if (*t != "profile" && *t != "web") c.fail(p + ".source_tag", "source_tag must be 'profile' or 'web'");
    }
    if (const json* e = c.field(r, "embedding", p))
      if (auto emb = c.embedding(*e, p + ".embedding", v.value.visual_dim)) rec.embedding = *emb;
    v.value.records.push_back(std::move(rec));
  }
  return require_valid(std::move(v), path.string());
}

struct InterviewCluster {
  std::string character_name;
  SpeakerCluster cluster;
};

inline std::vector<InterviewCluster> load_interview_clusters(const fs::path& path) {
  const ManifestDocument doc = read_manifest(path);
  Validated<std::vector<InterviewCluster>> v;
  detail::Checker c(v.issues);
  c.expect_kind(doc.header, "interview_clusters");
  const std::size_t dim = c.header_dim(doc.header, "audio_dim");
  for (std::size_t i = 0; i < doc.records.size(); ++i) {
    const auto& r = doc.records[i];
    const auto p = detail::rec_path(i);
    InterviewCluster ic;
    if (auto n = c.string(r, "character_name", p)) ic.character_name = *n;
    std::int64_t cid = 0;
    if (auto id = c.integer(r, "cluster_id", p)) cid = *id;
    std::vector<EmbeddingVector> embs;
    if (const json* arr = c.field(r, "segment_embeddings", p)) {
      if (!arr->is_array() || arr->empty()) c.fail(p + ".segment_embeddings", "expected a non-empty array");
      else
        for (std::size_t k = 0; k < arr->size(); ++k)
          if (auto e = c.embedding((*arr)[k], p + ".segment_embeddings[" + std::to_string(k) + "]", dim))
            embs.push_back(std::move(*e));
    }
    if (!embs.empty()) {
      try {
        ic.cluster = SpeakerCluster::from_segments(cid, std::move(embs));
      } catch (const Error& e) {
        c.fail(p + ".segment_embeddings", e.what());
      }
    }
    v.value.push_back(std::move(ic));
  }
  return require_valid(std::move(v), path.string());
}

inline std::vector<AdInterval> load_intervals(const fs::path& path) {
  const ManifestDocument doc = read_manifest(path);
  Validated<std::vector<AdInterval>> v;
  detail::Checker c(v.issues);
  c.expect_kind(doc.header, "intervals");
  for (std::size_t i = 0; i < doc.records.size(); ++i) {
    const auto& r = doc.records[i];
    const auto p = detail::rec_path(i);
    AdInterval iv;
    if (auto id = c.string(r, "interval_id", p)) iv.interval_id = *id;
    auto s = c.number(r, "start_s", p), e = c.number(r, "end_s", p);
    if (s && e) {
      iv.start_s = *s;
      iv.end_s = *e;
      if (!(iv.start_s < iv.end_s)) c.fail(p, "start_s must be < end_s");
    }
    v.value.push_back(std::move(iv));
  }
  return require_valid(std::move(v), path.string());
}

struct NameClip {
  std::string clip_id;
  std::set<std::int64_t> shot_ids;
  std::set<std::string> names;
};

inline std::vector<NameClip> load_gt_names(const fs::path& path) {
  const ManifestDocument doc = read_manifest(path);
  Validated<std::vector<NameClip>> v;
  detail::Checker c(v.issues);
  c.expect_kind(doc.header, "gt_names");
  for (std::size_t i = 0; i < doc.records.size(); ++i) {
    const auto& r = doc.records[i];
    const auto p = detail::rec_path(i);
    NameClip clip;
    if (auto id = c.string(r, "clip_id", p)) clip.clip_id = *id;
    const json* shots = c.field(r, "shot_ids", p);
    const json* names = c.field(r, "names", p);
    try {
      if (shots) clip.shot_ids = shots->get<std::set<std::int64_t>>();
      if (names) clip.names = names->get<std::set<std::string>>();
    } catch (const json::exception&) {
      c.fail(p, "shot_ids must be integers and names strings");
    }
    if (names && clip.names.empty()) c.fail(p + ".names", "clip has no ground-truth names");
    v.value.push_back(std::move(clip));
  }
  return require_valid(std::move(v), path.string());
}

inline std::vector<GtBox> load_gt_boxes(const fs::path& path) {
  const ManifestDocument doc = read_manifest(path);
  Validated<std::vector<GtBox>> v;
  detail::Checker c(v.issues);
  c.expect_kind(doc.header, "gt_boxes");
  for (std::size_t i = 0; i < doc.records.size(); ++i) {
    const auto& r = doc.records[i];
    const auto p = detail::rec_path(i);
    auto b = c.box(r, p);
    auto n = c.string(r, "name", p);
    if (b && n) v.value.push_back({*b, *n});
  }
  return require_valid(std::move(v), path.string());
}

inline std::map<std::string, std::string> load_gt_speakers(const fs::path& path) {
  const ManifestDocument doc = read_manifest(path);
  Validated<std::map<std::string, std::string>> v;
  detail::Checker c(v.issues);
  c.expect_kind(doc.header, "gt_speakers");
  for (std::size_t i = 0; i < doc.records.size(); ++i) {
    const auto& r = doc.records[i];
    const auto p = detail::rec_path(i);
    auto id = c.string(r, "segment_id", p);
    auto spk = c.string(r, "speaker", p);
    if (id && spk && !v.value.emplace(*id, *spk).second) c.fail(p + ".segment_id", "duplicate segment id");
  }
  return require_valid(std::move(v), path.string());
}

struct ClipTurn {
  std::string clip_id;
  SpeakerTurn turn;
};

inline std::vector<ClipTurn> load_gt_turns(const fs::path& path) {
  const ManifestDocument doc = read_manifest(path);
  Validated<std::vector<ClipTurn>> v;
  detail::Checker c(v.issues);
  c.expect_kind(doc.header, "gt_turns");
  for (std::size_t i = 0; i < doc.records.size(); ++i) {
    const auto& r = doc.records[i];
    const auto p = detail::rec_path(i);
    ClipTurn ct;
    ct.clip_id = c.string(r, "clip_id", p, false).value_or("all");
    auto s = c.number(r, "start_s", p), e = c.number(r, "end_s", p);
    auto spk = c.string(r, "speaker", p);
    if (!s || !e || !spk) continue;
    if (!(*s < *e)) c.fail(p, "start_s must be < end_s");
    ct.turn = {*s, *e, *spk, r.value("singing", false)};
    v.value.push_back(std::move(ct));
  }
  return require_valid(std::move(v), path.string());
}

// ---------------------------------------------------------------------------
// Stages

struct BankBuildOptions {
  double filter_threshold = kDefaultFilterThreshold;
  double merge_tau = kDefaultMergeTau;
  InMovieGates gates;
  std::size_t voice_cap = kDefaultVoiceCap;
};

struct BankBuildInputs {
  fs::path candidates;
  std::optional<fs::path> interviews;
  // In-movie exemplars need all three.
  std::optional<fs::path> tracks_labeled;
  std::optional<fs::path> segments;
  std::optional<fs::path> sync;
};

inline VoiceBankResult build_bank(const BankBuildInputs& in, const BankBuildOptions& opts) {
  const CandidateManifest cand = load_candidates(in.candidates);
  CharacterBank bank =
      build_appearance_bank(cand.movie_id, cand.visual_dim, cand.audio_dim, cand.records, opts.filter_threshold);

  std::map<std::string, std::vector<EmbeddingVector>> interview;
  if (in.interviews) {
    std::map<std::string, std::vector<SpeakerCluster>> per_char;
    for (auto& ic : load_interview_clusters(*in.interviews)) {
      if (!bank.find(ic.character_name))
        throw Error(ErrorCode::kValidation, "interview cluster for unknown character '" + ic.character_name + "'",
                    in.interviews->string());
      if (ic.cluster.centroid.dim() != bank.audio_dim)
        throw Error(ErrorCode::kDimensionMismatch, "interview embeddings do not match bank audio_dim",
                    in.interviews->string());
      per_char[ic.character_name].push_back(std::move(ic.cluster));
    }
    for (const auto& [name, clusters] : per_char) {
      const auto groups = merge_speaker_clusters(clusters, opts.merge_tau);
      interview[name] = select_interview_exemplars(clusters, groups);
    }
  }

  std::map<std::string, std::vector<ScoredVoiceExemplar>> in_movie;
  const int provided = int(in.tracks_labeled.has_value()) + int(in.segments.has_value()) + int(in.sync.has_value());
  if (provided != 0 && provided != 3)
    throw Error(ErrorCode::kInvalidArgument, "in-movie exemplars need tracks, segments and sync manifests together");
  if (provided == 3) {
    const TrackManifest tracks = load_tracks(*in.tracks_labeled, {.require_contiguous = false});
    const SegmentManifest segs = load_manifest<SegmentManifest>(*in.segments);
    const SyncManifest sync = load_manifest<SyncManifest>(*in.sync);
    if (segs.audio_dim != bank.audio_dim)
      throw Error(ErrorCode::kDimensionMismatch, "segment embeddings do not match bank audio_dim", in.segments->string());
    std::map<std::string, const SpeechSegment*> by_id;
    for (const auto& s : segs.segments) by_id[s.segment_id] = &s;
    for (const auto& [name, refs] :
         select_in_movie_exemplars(tracks.tracks, segs.segments, sync.observations, tracks.fps, opts.gates)) {
      for (const auto& r : refs) in_movie[name].push_back({by_id.at(r.segment_ref)->embedding, r.score});
    }
  }
  return assemble_voice_bank(std::move(bank), in_movie, interview, opts.voice_cap);
}

inline std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

inline TrainResult adapt_bank(const fs::path& bank_path, const TrainConfig& cfg, const fs::path& out) {
  const CharacterBank bank = load_bank(bank_path);
  TrainResult r = train_projection(bank, cfg);
  write_text_atomic(out, dump_json(projection_to_json(r, cfg)));
  return r;
}

inline ProjectionMatrix load_projection(const fs::path& path) {
  try {
    return projection_from_json(json::parse(read_text_file(path)));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParse, path.string() + ": " + e.what(), path.string());
  }
}

inline TrackManifest recognize_visual(const fs::path& tracks_path, const fs::path& bank_path,
                                      const std::optional<fs::path>& projection_path, const VisualOptions& opts,
                                      const fs::path& out) {
  const TrackManifest raw = load_tracks(tracks_path);
  const CharacterBank bank = load_bank(bank_path);
  if (raw.visual_dim != bank.visual_dim)
    throw Error(ErrorCode::kDimensionMismatch, "track features do not match bank visual_dim", tracks_path.string());
  std::optional<ProjectionMatrix> proj;
  if (projection_path) {
    proj = load_projection(*projection_path);
    if (proj->d_in() != bank.visual_dim)
      throw Error(ErrorCode::kDimensionMismatch, "projection input does not match bank visual_dim",
                  projection_path->string());
  }
  TrackManifest labeled{raw.fps, raw.visual_dim, recognize_tracks(raw.tracks, bank, opts, proj ? &*proj : nullptr)};
  write_text_atomic(out, to_jsonl(to_manifest(labeled)));
  return labeled;
}

struct AudioStageOptions {
  DiariseOptions diarise;
  std::optional<double> fps_override;
};

inline SegmentManifest recognize_audio(const fs::path& segments_path, const fs::path& bank_path,
                                       const std::optional<fs::path>& tracks_path,
                                       const std::optional<fs::path>& sync_path, AudioStageOptions opts,
                                       const fs::path& out) {
  const SegmentManifest segs = load_manifest<SegmentManifest>(segments_path);
  const CharacterBank bank = load_bank(bank_path);
  if (segs.audio_dim != bank.audio_dim)
    throw Error(ErrorCode::kDimensionMismatch, "segment embeddings do not match bank audio_dim", segments_path.string());
  TrackManifest tracks;
  SyncManifest sync;
  if (tracks_path) tracks = load_tracks(*tracks_path, {.require_contiguous = false});
  if (sync_path) sync = load_manifest<SyncManifest>(*sync_path);
  opts.diarise.fps = opts.fps_override.value_or(tracks.fps);
  if (!tracks_path || !sync_path) opts.diarise.enable_fusion = false;
  SegmentManifest labeled{segs.audio_dim,
                          diarise(segs.segments, bank, tracks.tracks, sync.observations, opts.diarise)};
  write_text_atomic(out, to_jsonl(to_manifest(labeled)));
  return labeled;
}

inline std::vector<SubtitleEntry> write_subtitles(const fs::path& segments_path, const fs::path& out) {
  const SegmentManifest segs = load_manifest<SegmentManifest>(segments_path);
  auto entries = build_subtitles(segs.segments);
  write_text_atomic(out, render_srt(entries));
  return entries;
}

struct AdStageOptions {
  double vm_retention = kDefaultVmRetention;
  std::size_t frames = kDefaultAdFrames;
};

inline std::vector<ADPromptPackage> write_ad_prompts(const fs::path& tracks_path, const fs::path& intervals_path,
                                                     const AdStageOptions& opts, const fs::path& out) {
  const TrackManifest tracks = load_tracks(tracks_path, {.require_contiguous = false});
  std::vector<ADPromptPackage> packages;
  ManifestDocument doc;
  doc.header = json{{"record", "header"}, {"kind", "ad_prompts"}, {"fps", tracks.fps}};
  for (const auto& iv : load_intervals(intervals_path)) {
    packages.push_back(assemble_ad_prompt(iv, tracks.tracks, tracks.fps, opts.vm_retention, opts.frames));
    doc.records.push_back(package_to_json(packages.back()));
  }
  write_text_atomic(out, to_jsonl(doc));
  return packages;
}

inline std::vector<GenerationResponse> generate_descriptions(std::span<const ADPromptPackage> packages,
                                                             GenerationClient& client, int retries,
                                                             const fs::path& out) {
  std::vector<GenerationResponse> responses;
  ManifestDocument doc;
  doc.header = json{{"record", "header"}, {"kind", "ad_responses"}};
  for (std::size_t i = 0; i < packages.size(); ++i) {
    const std::string id = packages[i].interval.interval_id.empty() ? std::to_string(i) : packages[i].interval.interval_id;
    responses.push_back(submit_generation({id, packages[i]}, client, retries));
    doc.records.push_back(
        {{"record", "ad_response"}, {"request_id", id}, {"text", responses.back().text}, {"model", responses.back().model}});
  }
  write_text_atomic(out, to_jsonl(doc));
  return responses;
}

// ---------------------------------------------------------------------------
// Evaluation over manifest files

struct EvalOptions {
  std::optional<fs::path> bank;  // closed-set filter for DER ground truth
  bool exclude_singing = false;
  double collar_s = 0.0;
  std::vector<double> iou_thresholds = default_iou_sweep();
};

inline json der_json(const DerBreakdown& d) {
  return {{"der", d.der}, {"missed", d.missed}, {"false_alarm", d.false_alarm}, {"confusion", d.confusion},
          {"reference", d.reference}};
}

inline json evaluate_task(const std::string& task, const fs::path& pred, const fs::path& gt, const EvalOptions& opts) {
  json report{{"task", task}};
  if (task == "names") {
    const TrackManifest tracks = load_tracks(pred, {.require_contiguous = false});
    json clips = json::array();
    double sum = 0.0;
    const auto gt_clips = load_gt_names(gt);
    for (const auto& clip : gt_clips) {
      const auto preds = names_from_tracks(tracks.tracks, clip.shot_ids);
      const double ap = name_list_ap(preds, clip.names);
      sum += ap;
      json pj = json::array();
      for (const auto& p : preds) pj.push_back({{"name", p.name}, {"score", p.score}});
      clips.push_back({{"clip_id", clip.clip_id}, {"ap", ap}, {"predicted", std::move(pj)}, {"gt", clip.names}});
    }
    report["clips"] = std::move(clips);
    report["aggregate"] = {{"mean_ap", gt_clips.empty() ? 0.0 : sum / static_cast<double>(gt_clips.size())}};
  } else if (task == "boxes") {
    const TrackManifest tracks = load_tracks(pred, {.require_contiguous = false});
    const auto boxes = boxes_from_tracks(tracks.tracks);
    const auto gt_boxes = load_gt_boxes(gt);
    const auto r = detection_map(boxes, gt_boxes, opts.iou_thresholds);
    report["thresholds"] = r.thresholds;
    report["per_threshold_ap"] = r.per_threshold_ap;
    report["classes"] = r.classes;
    report["aggregate"] = {{"mean_ap", r.mean_ap}};
  } else if (task == "speakers") {
    const SegmentManifest segs = load_manifest<SegmentManifest>(pred);
    const auto gt_map = load_gt_speakers(gt);
    const auto preds = speaker_predictions(segs.segments);
    json items = json::array();
    for (const auto& p : preds) {
      const std::string& truth = gt_map.count(p.segment_id) ? gt_map.at(p.segment_id) : std::string();
      items.push_back({{"segment_id", p.segment_id}, {"predicted", p.speaker.value_or(kUnknownSpeaker)},
                       {"gt", truth}, {"confidence", p.confidence}, {"correct", p.speaker && *p.speaker == truth}});
    }
    report["segments"] = std::move(items);
    report["aggregate"] = {{"ap", speaker_sentence_ap(preds, gt_map)}};
  } else if (task == "der") {
    const SegmentManifest segs = load_manifest<SegmentManifest>(pred);
    std::vector<ClipTurn> turns = load_gt_turns(gt);
    std::optional<std::set<std::string>> roster;
    if (opts.bank) {
      roster.emplace();
      for (const auto& c : load_bank(*opts.bank).characters) roster->insert(c.name);
    }
    std::erase_if(turns, [&](const ClipTurn& t) {
      return (roster && !roster->contains(t.turn.speaker)) || (opts.exclude_singing && t.turn.singing);
    });
    const auto sys = timeline_from_segments(segs.segments);
    auto both = [&](std::span<const SpeakerTurn> ref, std::span<const SpeakerTurn> hyp) {
      json j;
      j["with_overlap"] = der_json(der(hyp, ref, true, opts.collar_s));
      try {
        j["without_overlap"] = der_json(der(hyp, ref, false, opts.collar_s));
      } catch (const Error&) {
        j["without_overlap"] = nullptr;  // reference is entirely overlapped speech
      }
      return j;
    };
    std::map<std::string, std::vector<SpeakerTurn>> by_clip;
    std::vector<SpeakerTurn> all;
    for (const auto& t : turns) {
      by_clip[t.clip_id].push_back(t.turn);
      all.push_back(t.turn);
    }
    json clips = json::array();
    for (const auto& [clip, ref] : by_clip) {
      double lo = ref.front().start_s, hi = ref.front().end_s;
      for (const auto& t : ref) {
        lo = std::min(lo, t.start_s);
        hi = std::max(hi, t.end_s);
      }
      std::vector<SpeakerTurn> hyp;
      for (auto t : sys) {
        t.start_s = std::max(t.start_s, lo);
        t.end_s = std::min(t.end_s, hi);
        if (t.start_s < t.end_s) hyp.push_back(t);
      }
      json cj = both(ref, hyp);
      cj["clip_id"] = clip;
      clips.push_back(std::move(cj));
    }
    report["clips"] = std::move(clips);
    report["aggregate"] = both(all, sys);
    report["collar_s"] = opts.collar_s;
    report["closed_set"] = roster.has_value();
    report["exclude_singing"] = opts.exclude_singing;
  } else {
    throw Error(ErrorCode::kInvalidArgument, "unknown evaluation task '" + task + "'");
  }
  return report;
}

// ---------------------------------------------------------------------------
// Run configuration

struct PipelineConfig {
  std::map<std::string, std::string> paths;
  BankBuildOptions bank;
  TrainConfig train;
  VisualOptions visual;
  DiariseOptions audio;
  std::optional<double> fps;
  AdStageOptions ad;
  double collar_s = 0.0;
  bool exclude_singing = false;

  static const std::set<std::string>& path_keys() {
    static const std::set<std::string> keys{"candidates", "interviews", "tracks",      "segments",
                                            "sync",       "intervals",  "gt-names",    "gt-boxes",
                                            "gt-speakers", "gt-turns",  "out-dir"};
    return keys;
  }

  static const std::vector<std::string>& value_keys() {
    static const std::vector<std::string> keys{
        "filter-threshold", "merge-tau", "vm-th",  "sync-th",      "voice-cap", "k",        "iou-th",
        "nms-th",           "lambda",    "low-conf", "vm-retention", "frames",  "epochs",   "lr-start",
        "lr-end",           "tau",       "seed",   "fps",          "collar",    "jobs",     "exclude-singing"};
    return keys;
  }

  // Sets one key from its textual or JSON value.
  void set(const std::string& key, const json& value) {
    auto num = [&]() -> double {
      if (value.is_number()) return value.get<double>();
      if (value.is_string()) {
        try {
          std::size_t used = 0;
          const std::string s = value.get<std::string>();
          const double d = std::stod(s, &used);
          if (used == s.size()) return d;
        } catch (const std::exception&) {
        }
      }
      throw Error(ErrorCode::kInvalidArgument, "config key '" + key + "' expects a number", key);
    };
    auto whole = [&]() -> long long {
      const double d = num();
      if (d != std::floor(d)) throw Error(ErrorCode::kInvalidArgument, "config key '" + key + "' expects an integer", key);
      return static_cast<long long>(d);
    };
    if (path_keys().contains(key)) {
      if (!value.is_string()) throw Error(ErrorCode::kInvalidArgument, "config key '" + key + "' expects a path", key);
      paths[key] = value.get<std::string>();
    } else if (key == "filter-threshold") bank.filter_threshold = num();
    else if (key == "merge-tau") bank.merge_tau = num();
    else if (key == "vm-th") bank.gates.vm_threshold = num();
    else if (key == "sync-th") bank.gates.sync_threshold = num();
    else if (key == "voice-cap") bank.voice_cap = static_cast<std::size_t>(whole());
    else if (key == "k") visual.k = audio.k = static_cast<std::size_t>(whole());
    else if (key == "iou-th") visual.track_iou_threshold = num();
    else if (key == "nms-th") visual.nms_threshold = num();
    else if (key == "lambda") audio.fusion.lambda = num();
    else if (key == "low-conf") audio.fusion.low_conf_threshold = num();
    else if (key == "vm-retention") ad.vm_retention = num();
    else if (key == "frames") ad.frames = static_cast<std::size_t>(whole());
    else if (key == "epochs") train.epochs = static_cast<int>(whole());
    else if (key == "lr-start") train.lr_start = num();
    else if (key == "lr-end") train.lr_end = num();
    else if (key == "tau") train.temperature = num();
    else if (key == "seed") train.seed = static_cast<std::uint64_t>(whole());
    else if (key == "fps") fps = num();
    else if (key == "collar") collar_s = num();
    else if (key == "jobs") visual.jobs = static_cast<std::size_t>(whole());
    else if (key == "exclude-singing") {
      if (value.is_boolean()) exclude_singing = value.get<bool>();
      else if (value.is_string()) exclude_singing = value.get<std::string>() == "true" || value.get<std::string>() == "1";
      else exclude_singing = num() != 0;
    } else throw Error(ErrorCode::kInvalidArgument, "unknown config key '" + key + "'", key);
  }

  static PipelineConfig from_json(const json& doc) {
    if (!doc.is_object()) throw Error(ErrorCode::kParse, "pipeline config must be a flat JSON object");
    PipelineConfig cfg;
    for (auto it = doc.begin(); it != doc.end(); ++it) cfg.set(it.key(), it.value());
    return cfg;
  }

  static PipelineConfig load(const fs::path& path) {
    try {
      return from_json(json::parse(read_text_file(path)));
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::kParse, path.string() + ": " + e.what(), path.string());
    }
  }

  void check() const {
    auto in = [](double v, double lo, double hi) { return v >= lo && v <= hi; };
    auto fail = [](const std::string& k, const std::string& why) {
      throw Error(ErrorCode::kInvalidArgument, "config '" + k + "' " + why, k);
    };
    if (!(bank.filter_threshold > -1 && bank.filter_threshold <= 1)) fail("filter-threshold", "must lie in (-1, 1]");
    if (!(bank.merge_tau > 0 && bank.merge_tau <= 1)) fail("merge-tau", "must lie in (0, 1]");
    if (!in(bank.gates.vm_threshold, -1, 1)) fail("vm-th", "must lie in [-1, 1]");
    if (!std::isfinite(bank.gates.sync_threshold)) fail("sync-th", "must be finite");
    if (bank.voice_cap < 1) fail("voice-cap", "must be >= 1");
    if (visual.k < 1) fail("k", "must be >= 1");
    if (!(visual.track_iou_threshold > 0 && visual.track_iou_threshold <= 1)) fail("iou-th", "must lie in (0, 1]");
    if (!(visual.nms_threshold > 0 && visual.nms_threshold <= 1)) fail("nms-th", "must lie in (0, 1]");
    audio.fusion.check();
    if (!in(ad.vm_retention, -1, 1)) fail("vm-retention", "must lie in [-1, 1]");
    if (ad.frames < 1) fail("frames", "must be >= 1");
    train.check();
    if (fps && !(*fps > 0)) fail("fps", "must be > 0");
    if (!(collar_s >= 0)) fail("collar", "must be >= 0");
    if (!paths.contains("candidates")) fail("candidates", "is required");
    if (!paths.contains("tracks")) fail("tracks", "is required");
    if (!paths.contains("out-dir")) fail("out-dir", "is required");
  }

  json to_json() const {
    json j;
    for (const auto& [k, v] : paths) j[k] = v;
    j["filter-threshold"] = bank.filter_threshold;
    j["merge-tau"] = bank.merge_tau;
    j["vm-th"] = bank.gates.vm_threshold;
    j["sync-th"] = bank.gates.sync_threshold;
    j["voice-cap"] = bank.voice_cap;
    j["k"] = visual.k;
    j["iou-th"] = visual.track_iou_threshold;
    j["nms-th"] = visual.nms_threshold;
    j["lambda"] = audio.fusion.lambda;
    j["low-conf"] = audio.fusion.low_conf_threshold;
    j["vm-retention"] = ad.vm_retention;
    j["frames"] = ad.frames;
    j["epochs"] = train.epochs;
    j["lr-start"] = train.lr_start;
    j["lr-end"] = train.lr_end;
    j["tau"] = train.temperature;
    j["seed"] = train.seed;
    if (fps) j["fps"] = *fps;
    j["collar"] = collar_s;
    j["exclude-singing"] = exclude_singing;
    return j;
  }

  std::optional<fs::path> path(const std::string& key) const {
    auto it = paths.find(key);
    if (it == paths.end()) return std::nullopt;
    return fs::path(it->second);
  }
};

// A failure inside a named pipeline stage.
class StageFailure : public Error {
 public:
  StageFailure(std::string stage, const Error& cause)
      : Error(cause.code(), cause.what(), cause.path()), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

inline std::string error_json(const std::string& stage, const Error& e) {
  json j{{"code", std::string(to_string(e.code()))}, {"message", e.what()}};
  if (!stage.empty()) j["stage"] = stage;
  if (!e.path().empty()) j["path"] = e.path();
  return json{{"error", std::move(j)}}.dump();
}

struct RunArtifacts {
  fs::path bank, projection, tracks_labeled, segments_labeled, subtitles, prompts, report;

  std::vector<fs::path> all() const {
    return {bank, projection, tracks_labeled, segments_labeled, subtitles, prompts, report};
  }
};

inline RunArtifacts artifact_paths(const fs::path& out_dir) {
  return {out_dir / "bank.jsonl",        out_dir / "projection.json", out_dir / "tracks_labeled.jsonl",
          out_dir / "segments_labeled.jsonl", out_dir / "movie.srt",  out_dir / "prompts.jsonl",
          out_dir / "report.json"};
}

// build-bank -> adapt -> recognize-visual -> recognize-audio -> subtitles +
// ad-prompts -> evaluate. The recognize-audio stage first refreshes the voice
// bank with in-movie exemplars, which need the labelled tracks. On failure
// every artifact of this run is removed and a StageFailure is thrown.
inline RunArtifacts run_pipeline(const PipelineConfig& cfg) {
  cfg.check();
  const fs::path out_dir = *cfg.path("out-dir");
  const RunArtifacts art = artifact_paths(out_dir);
  std::string stage = "setup";
  auto require = [&](const std::string& key) -> fs::path {
    auto p = cfg.path(key);
    if (!p) throw Error(ErrorCode::kInvalidArgument, "no '" + key + "' manifest configured", key);
    if (!fs::exists(*p)) throw Error(ErrorCode::kIo, "manifest not found: " + p->string(), p->string());
    return *p;
  };
  auto optional_input = [&](const std::string& key) -> std::optional<fs::path> {
    if (!cfg.path(key)) return std::nullopt;
    return require(key);
  };
  try {
    fs::create_directories(out_dir);

    stage = "build-bank";
    BankBuildInputs bank_in{require("candidates"), optional_input("interviews"), {}, {}, {}};
    {
      auto r = build_bank(bank_in, cfg.bank);
      write_text_atomic(art.bank, to_jsonl(to_manifest(r.bank)));
    }

    stage = "adapt";
    adapt_bank(art.bank, cfg.train, art.projection);

    stage = "recognize-visual";
    recognize_visual(require("tracks"), art.bank, art.projection, cfg.visual, art.tracks_labeled);

    stage = "recognize-audio";
    const fs::path segments = require("segments");
    const auto sync = optional_input("sync");
    if (sync) {
      bank_in.tracks_labeled = art.tracks_labeled;
      bank_in.segments = segments;
      bank_in.sync = sync;
      auto r = build_bank(bank_in, cfg.bank);
      write_text_atomic(art.bank, to_jsonl(to_manifest(r.bank)));
    }
    recognize_audio(segments, art.bank, art.tracks_labeled, sync, {cfg.audio, cfg.fps}, art.segments_labeled);

    stage = "subtitles";
    write_subtitles(art.segments_labeled, art.subtitles);

    stage = "ad-prompts";
    if (auto intervals = optional_input("intervals")) {
      write_ad_prompts(art.tracks_labeled, *intervals, cfg.ad, art.prompts);
    } else {
      write_text_atomic(art.prompts, to_jsonl({json{{"record", "header"}, {"kind", "ad_prompts"}}, {}}));
    }

    stage = "evaluate";
    EvalOptions eval_opts;
    eval_opts.bank = art.bank;
    eval_opts.exclude_singing = cfg.exclude_singing;
    eval_opts.collar_s = cfg.collar_s;
    json results = json::object();
    const std::pair<const char*, std::pair<const char*, fs::path>> tasks[] = {
        {"names", {"gt-names", art.tracks_labeled}},
        {"boxes", {"gt-boxes", art.tracks_labeled}},
        {"speakers", {"gt-speakers", art.segments_labeled}},
        {"der", {"gt-turns", art.segments_labeled}},
    };
    for (const auto& [task, src] : tasks)
      if (auto gt = optional_input(src.first)) results[task] = evaluate_task(task, src.second, *gt, eval_opts);
    write_text_atomic(art.report, dump_json({{"config", cfg.to_json()}, {"results", std::move(results)}}));
  } catch (const Error& e) {
    for (const auto& p : art.all()) {
      std::error_code ec;
      fs::remove(p, ec);
    }
    throw StageFailure(stage, e);
  } catch (const fs::filesystem_error& e) {
    for (const auto& p : art.all()) {
      std::error_code ec;
      fs::remove(p, ec);
    }
    throw StageFailure(stage, Error(ErrorCode::kIo, e.what(), e.path1().string()));
  }
  return art;
}

}  // namespace toonid
