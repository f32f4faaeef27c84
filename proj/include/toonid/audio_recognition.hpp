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

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "toonid/core.hpp"

namespace toonid {

inline constexpr double kDefaultLambda = 1.0;
inline constexpr double kDefaultLowConfidence = 0.35;
inline constexpr const char* kUnknownSpeaker = "unknown";

struct ClusterAssignment {
  std::int64_t cluster_id = 0;
  std::string assigned_character;
  double s_am = 0.0;
  std::map<std::string, double> scores;
};

struct FusionConfig {
  double lambda = kDefaultLambda;
  double low_conf_threshold = kDefaultLowConfidence;

  void check() const {
    if (!(lambda > 0)) throw Error(ErrorCode::kInvalidArgument, "lambda must be > 0");
    if (!(low_conf_threshold >= 0 && low_conf_threshold <= 1))
      throw Error(ErrorCode::kInvalidArgument, "low-confidence threshold must lie in [0, 1]");
  }
};

// Spatial max per time step, averaged over time.
inline double sync_score_reduce(const SimilarityMap& map) {
  if (map.t == 0 || map.h == 0 || map.w == 0 || map.data.size() != map.t * map.h * map.w)
    throw Error(ErrorCode::kEmptyInput, "similarity map must be a non-empty t x h x w grid");
  double total = 0.0;
  for (std::size_t t = 0; t < map.t; ++t) {
    double best = map.at(t, 0, 0);
    for (std::size_t h = 0; h < map.h; ++h)
      for (std::size_t w = 0; w < map.w; ++w) {
        const double v = map.at(t, h, w);
        if (!std::isfinite(v)) throw Error(ErrorCode::kNonFinite, "similarity map has a non-finite entry");
        best = std::max(best, v);
      }
    total += best;
  }
  return total / static_cast<double>(map.t);
}

inline double resolved_sync_score(const SyncObservation& o) {
  if (o.sync_score) return *o.sync_score;
  if (o.similarity_map) return sync_score_reduce(*o.similarity_map);
  throw Error(ErrorCode::kValidation, "sync observation carries neither a score nor a map");
}

inline EmbeddingVector cluster_centroid(std::span<const SpeechSegment> segments) {
  if (segments.empty()) throw Error(ErrorCode::kEmptyInput, "cluster has no segments");
  std::vector<EmbeddingVector> embs;
  embs.reserve(segments.size());
  for (const auto& s : segments) embs.push_back(s.embedding);
  return mean_normalized(embs);
}

// Per character: mean of the top-k cosine similarities between the centroid and
// that character's voice exemplars. Characters without voice exemplars are not
// scored.
inline ClusterAssignment audio_match(const EmbeddingVector& centroid, const CharacterBank& bank,
                                     std::size_t k = kDefaultTopK) {
  if (k < 1) throw Error(ErrorCode::kInvalidArgument, "k must be >= 1");
  ClusterAssignment out;
  for (const auto& ch : bank.characters) {
    if (ch.voice_exemplars.empty()) continue;
    std::vector<double> sims;
    sims.reserve(ch.voice_exemplars.size());
    for (const auto& e : ch.voice_exemplars) sims.push_back(cosine_similarity(centroid, e));
    out.scores[ch.name] = top_k_mean(std::move(sims), k);
  }
  auto best = argmax_score(out.scores);
  if (!best) throw Error(ErrorCode::kEmptyInput, "bank has no voice exemplars");
  out.assigned_character = best->first;
  out.s_am = best->second;
  return out;
}

// c_a = s_am * max(0, cos(segment, centroid)), floored at 0.
inline double segment_confidence(const SpeechSegment& segment, const EmbeddingVector& centroid, double s_am) {
  if (!std::isfinite(s_am)) throw Error(ErrorCode::kNonFinite, "s_am must be finite");
  const double c = std::max(0.0, cosine_similarity(segment.embedding, centroid));
  return std::max(0.0, s_am * c);
}

struct OverlappingTrack {
  const Track* track = nullptr;
  double s_sync = 0.0;
};

// Low-confidence audio labels (c_a below the gate) are replaced by the
// character of the overlapping track with the highest c_v = s_sync * s_vm when
// lambda * c_v > c_a.
inline SpeechSegment visual_enhanced_update(SpeechSegment segment, std::span<const OverlappingTrack> overlapping,
                                            const FusionConfig& cfg = {}) {
  if (!(segment.audio_confidence < cfg.low_conf_threshold)) return segment;
  const Track* best = nullptr;
  double best_cv = 0.0;
  for (const auto& o : overlapping) {
    if (!o.track || !o.track->assigned_character) continue;
    const double cv = o.s_sync * o.track->s_vm();
    if (!best || cv > best_cv) {
      best = o.track;
      best_cv = cv;
    }
  }
  if (best && cfg.lambda * best_cv > segment.audio_confidence) {
    segment.predicted_speaker = *best->assigned_character;
    segment.visual_confidence = best_cv;
    segment.label_source = LabelSource::kVisual;
  }
  return segment;
}

struct DiariseOptions {
  std::size_t k = kDefaultTopK;
  FusionConfig fusion;
  bool enable_fusion = true;
  double fps = 0.0;
};

// Audio-only labelling per cluster followed by per-segment visual correction.
// Output order matches input order.
inline std::vector<SpeechSegment> diarise(std::span<const SpeechSegment> segments, const CharacterBank& bank,
                                          std::span<const Track> tracks, std::span<const SyncObservation> sync_obs,
                                          const DiariseOptions& opts) {
  opts.fusion.check();
  if (opts.enable_fusion && !tracks.empty() && !(opts.fps > 0))
    throw Error(ErrorCode::kInvalidArgument, "fps must be positive for visual fusion");
  bool any_voice = false;
  for (const auto& c : bank.characters) any_voice = any_voice || !c.voice_exemplars.empty();

  std::vector<SpeechSegment> out(segments.begin(), segments.end());
  std::map<std::int64_t, std::vector<std::size_t>> clusters;
  for (std::size_t i = 0; i < out.size(); ++i) clusters[out[i].cluster_id].push_back(i);

  for (const auto& [cid, members] : clusters) {
    if (!any_voice) {
      for (std::size_t i : members) {
        out[i].predicted_speaker = kUnknownSpeaker;
        out[i].audio_confidence = 0.0;
        out[i].visual_confidence.reset();
        out[i].label_source = LabelSource::kAudio;
      }
      continue;
    }
    std::vector<SpeechSegment> member_segs;
    for (std::size_t i : members) member_segs.push_back(out[i]);
    const EmbeddingVector centroid = cluster_centroid(member_segs);
    const ClusterAssignment a = audio_match(centroid, bank, opts.k);
    for (std::size_t i : members) {
      out[i].predicted_speaker = a.assigned_character;
      out[i].audio_confidence = segment_confidence(out[i], centroid, a.s_am);
      out[i].visual_confidence.reset();
      out[i].label_source = LabelSource::kAudio;
    }
  }

  if (!opts.enable_fusion) return out;
  std::map<std::pair<std::string, std::string>, double> sync_lookup;
  for (const auto& o : sync_obs) sync_lookup.try_emplace({o.track_ref, o.segment_ref}, resolved_sync_score(o));
  for (auto& seg : out) {
    std::vector<OverlappingTrack> overlapping;
    for (const auto& t : tracks) {
      auto [t0, t1] = track_time_range(t, opts.fps);
      if (!intervals_intersect(seg.start_s, seg.end_s, t0, t1)) continue;
      auto it = sync_lookup.find({t.track_id, seg.segment_id});
      if (it == sync_lookup.end()) continue;
      overlapping.push_back({&t, it->second});
    }
    seg = visual_enhanced_update(std::move(seg), overlapping, opts.fusion);
  }
  return out;
}

}  // namespace toonid
