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

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "toonid/audio_recognition.hpp"
#include "toonid/core.hpp"

namespace toonid {

struct CandidateImageRecord {
  std::string character_name;
  EmbeddingVector embedding;
  std::string source_tag;  // "profile" or "web"

  friend bool operator==(const CandidateImageRecord&, const CandidateImageRecord&) = default;
};

struct SpeakerCluster {
  std::int64_t cluster_id = 0;
  std::vector<EmbeddingVector> segment_embeddings;
  EmbeddingVector centroid;

  static SpeakerCluster from_segments(std::int64_t id, std::vector<EmbeddingVector> segments) {
    SpeakerCluster c;
    c.cluster_id = id;
    c.centroid = mean_normalized(segments);
    c.segment_embeddings = std::move(segments);
    return c;
  }
};

// Indices into the cluster list passed to merge_speaker_clusters, in the order
// they joined the group.
using ClusterGroup = std::vector<std::size_t>;

inline constexpr double kDefaultFilterThreshold = 0.55;
inline constexpr double kDefaultMergeTau = 0.7;
inline constexpr double kDefaultInMovieVmThreshold = 0.6;
inline constexpr double kDefaultInMovieSyncThreshold = 0.3;

// Keeps the candidates whose cosine similarity to the profile strictly exceeds
// the threshold, in input order.
inline std::vector<CandidateImageRecord> filter_candidates(const EmbeddingVector& profile,
                                                           std::span<const CandidateImageRecord> candidates,
                                                           double threshold) {
  if (!(threshold > -1.0 && threshold <= 1.0))
    throw Error(ErrorCode::kInvalidArgument, "filter threshold must lie in (-1, 1]");
  std::vector<CandidateImageRecord> accepted;
  for (const auto& c : candidates)
    if (cosine_similarity(profile, c.embedding) > threshold) accepted.push_back(c);
  return accepted;
}

// Greedy first-fit merging of speaker-cluster centroids. Each centroid joins the
// first existing group containing a member whose similarity to it exceeds tau;
// otherwise it opens a new group. Iteration follows input order.
inline std::vector<ClusterGroup> merge_speaker_clusters(std::span<const SpeakerCluster> clusters, double tau) {
  if (!(tau > 0.0 && tau <= 1.0)) throw Error(ErrorCode::kInvalidArgument, "merge tau must lie in (0, 1]");
  std::vector<ClusterGroup> groups;
  for (std::size_t z = 0; z < clusters.size(); ++z) {
    bool assigned = false;
    for (auto& group : groups) {
      double max_similarity = -1.0;
      for (std::size_t member : group)
        max_similarity = std::max(max_similarity, cosine_similarity(clusters[z].centroid, clusters[member].centroid));
      if (max_similarity > tau) {
        group.push_back(z);
        assigned = true;
        break;
      }
    }
    if (!assigned) groups.push_back({z});
  }
  return groups;
}

// Segment embeddings of the group holding the most segments; the earliest
// opened group wins ties.
inline std::vector<EmbeddingVector> select_interview_exemplars(std::span<const SpeakerCluster> clusters,
                                                               std::span<const ClusterGroup> groups) {
  if (groups.empty()) throw Error(ErrorCode::kEmptyInput, "no merged cluster groups to select from");
  std::size_t best = 0, best_size = 0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    std::size_t size = 0;
    for (std::size_t m : groups[g]) size += clusters[m].segment_embeddings.size();
    if (g == 0 || size > best_size) {
      best = g;
      best_size = size;
    }
  }
  std::vector<EmbeddingVector> out;
  for (std::size_t m : groups[best])
    out.insert(out.end(), clusters[m].segment_embeddings.begin(), clusters[m].segment_embeddings.end());
  return out;
}

struct InMovieExemplar {
  std::string segment_ref;
  double score = 0.0;  // s_vm * s_sync of the best supporting (track, segment) pair

  friend bool operator==(const InMovieExemplar&, const InMovieExemplar&) = default;
};

struct InMovieGates {
  double vm_threshold = kDefaultInMovieVmThreshold;
  double sync_threshold = kDefaultInMovieSyncThreshold;
};

// A segment becomes an in-movie voice exemplar of X when some track assigned X
// with s_vm > vm_threshold overlaps it in time and their sync score exceeds
// sync_threshold. Per character, exemplars are listed in order of first
// selection; a segment supported by several tracks keeps its best score.
inline std::map<std::string, std::vector<InMovieExemplar>> select_in_movie_exemplars(
    std::span<const Track> tracks, std::span<const SpeechSegment> segments, std::span<const SyncObservation> sync_obs,
    double fps, InMovieGates gates = {}) {
  if (!(fps > 0)) throw Error(ErrorCode::kInvalidArgument, "fps must be positive");
  std::unordered_map<std::string, const Track*> track_by_id;
  std::unordered_map<std::string, const SpeechSegment*> seg_by_id;
  for (const auto& t : tracks) track_by_id[t.track_id] = &t;
  for (const auto& s : segments) seg_by_id[s.segment_id] = &s;

  std::map<std::string, std::vector<InMovieExemplar>> out;
  for (std::size_t i = 0; i < sync_obs.size(); ++i) {
    const auto& o = sync_obs[i];
    auto t_it = track_by_id.find(o.track_ref);
    if (t_it == track_by_id.end())
      throw Error(ErrorCode::kDanglingReference, "sync observation references unknown track '" + o.track_ref + "'",
                  "sync[" + std::to_string(i) + "].track_ref");
    auto s_it = seg_by_id.find(o.segment_ref);
    if (s_it == seg_by_id.end())
      throw Error(ErrorCode::kDanglingReference, "sync observation references unknown segment '" + o.segment_ref + "'",
                  "sync[" + std::to_string(i) + "].segment_ref");
    const Track& track = *t_it->second;
    const SpeechSegment& seg = *s_it->second;
    if (!track.assigned_character) continue;
    const double s_vm = track.s_vm();
    const double s_sync = resolved_sync_score(o);
    if (!(s_vm > gates.vm_threshold) || !(s_sync > gates.sync_threshold)) continue;
    auto [t0, t1] = track_time_range(track, fps);
    if (!intervals_intersect(seg.start_s, seg.end_s, t0, t1)) continue;

    auto& list = out[*track.assigned_character];
    auto existing = std::find_if(list.begin(), list.end(),
                                 [&](const InMovieExemplar& e) { return e.segment_ref == seg.segment_id; });
    const double score = s_vm * s_sync;
    if (existing == list.end()) list.push_back({seg.segment_id, score});
    else existing->score = std::max(existing->score, score);
  }
  return out;
}

struct ScoredVoiceExemplar {
  EmbeddingVector embedding;
  double score = 0.0;
};

struct VoiceBankResult {
  CharacterBank bank;
  std::vector<std::string> warnings;
};

// Per character: the in-movie exemplars ranked by score (stable), truncated to
// the cap, then padded with interview exemplars in input order.
inline VoiceBankResult assemble_voice_bank(CharacterBank bank,
                                           const std::map<std::string, std::vector<ScoredVoiceExemplar>>& in_movie,
                                           const std::map<std::string, std::vector<EmbeddingVector>>& interview,
                                           std::size_t cap = kDefaultVoiceCap) {
  if (cap < 1) throw Error(ErrorCode::kInvalidArgument, "voice cap must be >= 1");
  VoiceBankResult result;
  for (auto& ch : bank.characters) {
    ch.voice_exemplars.clear();
    auto im = in_movie.find(ch.name);
    auto iv = interview.find(ch.name);
    const bool has_im = im != in_movie.end() && !im->second.empty();
    const bool has_iv = iv != interview.end() && !iv->second.empty();
    if (!has_im && !has_iv) {
      result.warnings.push_back("character '" + ch.name + "' has no voice exemplars");
      continue;
    }
    if (has_im) {
      std::vector<const ScoredVoiceExemplar*> ranked;
      for (const auto& e : im->second) ranked.push_back(&e);
      std::stable_sort(ranked.begin(), ranked.end(),
                       [](const ScoredVoiceExemplar* a, const ScoredVoiceExemplar* b) { return a->score > b->score; });
      for (std::size_t i = 0; i < ranked.size() && ch.voice_exemplars.size() < cap; ++i)
        ch.voice_exemplars.push_back(ranked[i]->embedding);
    }
    if (has_iv) {
      for (std::size_t i = 0; i < iv->second.size() && ch.voice_exemplars.size() < cap; ++i)
        ch.voice_exemplars.push_back(iv->second[i]);
    }
  }
  result.bank = std::move(bank);
  return result;
}

// Roster and appearance exemplars from candidate images. Each character is
// introduced by exactly one "profile" record; its profile embedding is the
// first appearance exemplar, followed by the web candidates that pass
// filter_candidates.
inline CharacterBank build_appearance_bank(std::string movie_id, std::size_t visual_dim, std::size_t audio_dim,
                                           std::span<const CandidateImageRecord> candidates, double threshold) {
  CharacterBank bank;
  bank.movie_id = std::move(movie_id);
  bank.visual_dim = visual_dim;
  bank.audio_dim = audio_dim;
  for (const auto& c : candidates) {
    if (c.source_tag != "profile") continue;
    if (bank.find(c.character_name))
      throw Error(ErrorCode::kValidation, "duplicate profile for character '" + c.character_name + "'");
    CharacterEntry e;
    e.name = c.character_name;
    e.profile_embedding = c.embedding;
    bank.characters.push_back(std::move(e));
  }
  if (bank.characters.empty()) throw Error(ErrorCode::kValidation, "candidates contain no profile records");
  std::map<std::string, std::vector<CandidateImageRecord>> web;
  for (const auto& c : candidates) {
    if (c.source_tag == "profile") continue;
    if (!bank.find(c.character_name))
      throw Error(ErrorCode::kValidation, "candidate for character '" + c.character_name + "' not in the roster");
    web[c.character_name].push_back(c);
  }
  for (auto& ch : bank.characters) {
    ch.appearance_exemplars.push_back(ch.profile_embedding);
    for (auto& acc : filter_candidates(ch.profile_embedding, web[ch.name], threshold))
      ch.appearance_exemplars.push_back(std::move(acc.embedding));
  }
  return bank;
}

}  // namespace toonid
