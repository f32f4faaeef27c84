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
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "toonid/error.hpp"

namespace toonid {

// Embedding values are stored as supplied by the extractor. Matching code
// normalizes at the point of use.
struct EmbeddingVector {
  std::vector<double> values;
  bool normalized = false;

  EmbeddingVector() = default;
  explicit EmbeddingVector(std::vector<double> v, bool is_normalized = false)
      : values(std::move(v)), normalized(is_normalized) {}
  EmbeddingVector(std::initializer_list<double> v) : values(v) {}

  std::size_t dim() const noexcept { return values.size(); }
  std::span<const double> view() const noexcept { return values; }

  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double l2_norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline void check_same_dim(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dim() != b.dim() || a.dim() == 0) {
    throw Error(ErrorCode::kDimensionMismatch,
                "embedding dimensions differ: " + std::to_string(a.dim()) + " vs " +
                    std::to_string(b.dim()));
  }
}

// Returns <a,b> / (|a| |b|). Negative values are passed through.
inline double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  check_same_dim(a, b);
  const double na = l2_norm(a.view());
  const double nb = l2_norm(b.view());
  if (na == 0.0 || nb == 0.0) {
    throw Error(ErrorCode::kZeroVector, "cosine similarity of an all-zero vector");
  }
  return std::clamp(dot(a.view(), b.view()) / (na * nb), -1.0, 1.0);
}

inline EmbeddingVector normalized(const EmbeddingVector& v, double min_norm = 0.0) {
  const double n = l2_norm(v.view());
  if (!(n > min_norm)) {
    throw Error(ErrorCode::kZeroVector, "cannot normalize vector with norm " + std::to_string(n));
  }
  EmbeddingVector out;
  out.values.resize(v.dim());
  for (std::size_t i = 0; i < v.dim(); ++i) out.values[i] = v.values[i] / n;
  out.normalized = true;
  return out;
}

// Arithmetic mean of the members followed by L2 normalization.
inline EmbeddingVector mean_normalized(std::span<const EmbeddingVector> members) {
  if (members.empty()) throw Error(ErrorCode::kEmptyInput, "mean of an empty set of embeddings");
  std::vector<double> acc(members.front().dim(), 0.0);
  for (const auto& m : members) {
    check_same_dim(members.front(), m);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += m.values[i];
  }
  for (double& x : acc) x /= static_cast<double>(members.size());
  const double n = l2_norm(acc);
  if (!(n > 1e-12)) throw Error(ErrorCode::kDegenerate, "mean embedding is (numerically) zero");
  for (double& x : acc) x /= n;
  return EmbeddingVector(std::move(acc), true);
}

// Mean of the k largest values (k clipped to the number of values).
inline double top_k_mean(std::vector<double> values, std::size_t k) {
  if (values.empty() || k == 0) throw Error(ErrorCode::kInvalidArgument, "top-k mean needs k >= 1 and values");
  k = std::min(k, values.size());
  std::partial_sort(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(k), values.end(), std::greater<>());
  double s = 0.0;
  for (std::size_t i = 0; i < k; ++i) s += values[i];
  return s / static_cast<double>(k);
}

// Highest-scoring key; std::map order makes ties resolve to the
// lexicographically smallest name.
inline std::optional<std::pair<std::string, double>> argmax_score(const std::map<std::string, double>& scores) {
  std::optional<std::pair<std::string, double>> best;
  for (const auto& [name, s] : scores)
    if (!best || s > best->second) best = {name, s};
  return best;
}

struct BoundingBox {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;
  std::int64_t frame_index = 0;

  double width() const noexcept { return x2 - x1; }
  double height() const noexcept { return y2 - y1; }
  double area() const noexcept { return std::max(0.0, width()) * std::max(0.0, height()); }
  bool valid() const noexcept { return x1 < x2 && y1 < y2 && frame_index >= 0; }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

inline constexpr std::size_t kDefaultVoiceCap = 15;
inline constexpr std::size_t kSampledFeatureCount = 5;
inline constexpr std::size_t kDefaultTopK = 3;

struct CharacterEntry {
  std::string name;
  std::vector<EmbeddingVector> appearance_exemplars;
  std::vector<EmbeddingVector> voice_exemplars;
  EmbeddingVector profile_embedding;

  friend bool operator==(const CharacterEntry&, const CharacterEntry&) = default;
};

struct CharacterBank {
  std::string movie_id;
  std::size_t visual_dim = 0;
  std::size_t audio_dim = 0;
  std::vector<CharacterEntry> characters;

  const CharacterEntry* find(std::string_view name) const {
    for (const auto& c : characters)
      if (c.name == name) return &c;
    return nullptr;
  }
  CharacterEntry* find(std::string_view name) {
    for (auto& c : characters)
      if (c.name == name) return &c;
    return nullptr;
  }

  friend bool operator==(const CharacterBank&, const CharacterBank&) = default;
};

struct Track {
  std::string track_id;
  std::int64_t shot_id = 0;
  int seed_index = 0;
  std::vector<BoundingBox> boxes;  // one per covered frame, ascending frame_index
  std::vector<EmbeddingVector> sampled_features;
  // Optional per-frame features keyed by frame index; used when re-sampling
  // features for a merged track.
  std::map<std::int64_t, EmbeddingVector> frame_features;
  std::map<std::string, double> scores;
  std::optional<std::string> assigned_character;

  std::int64_t first_frame() const { return boxes.empty() ? 0 : boxes.front().frame_index; }
  std::int64_t last_frame() const { return boxes.empty() ? -1 : boxes.back().frame_index; }

  const BoundingBox* box_at(std::int64_t frame) const {
    auto it = std::lower_bound(boxes.begin(), boxes.end(), frame,
                               [](const BoundingBox& b, std::int64_t f) { return b.frame_index < f; });
    if (it == boxes.end() || it->frame_index != frame) return nullptr;
    return &*it;
  }

  // Visual matching score of the assigned character (0 when unassigned).
  double s_vm() const {
    if (!assigned_character) return 0.0;
    auto it = scores.find(*assigned_character);
    return it == scores.end() ? 0.0 : it->second;
  }

  friend bool operator==(const Track&, const Track&) = default;
};

enum class LabelSource { kAudio, kVisual };

struct SpeechSegment {
  std::string segment_id;
  double start_s = 0.0;
  double end_s = 0.0;
  std::string transcript;
  EmbeddingVector embedding;
  std::int64_t cluster_id = 0;
  std::optional<std::string> predicted_speaker;
  double audio_confidence = 0.0;
  std::optional<double> visual_confidence;
  LabelSource label_source = LabelSource::kAudio;

  friend bool operator==(const SpeechSegment&, const SpeechSegment&) = default;
};

// Dense t x h x w grid, row-major with time outermost.
struct SimilarityMap {
  std::size_t t = 0, h = 0, w = 0;
  std::vector<double> data;

  double at(std::size_t ti, std::size_t hi, std::size_t wi) const { return data[(ti * h + hi) * w + wi]; }
  double& at(std::size_t ti, std::size_t hi, std::size_t wi) { return data[(ti * h + hi) * w + wi]; }

  friend bool operator==(const SimilarityMap&, const SimilarityMap&) = default;
};

struct SyncObservation {
  std::string track_ref;
  std::string segment_ref;
  std::optional<double> sync_score;
  std::optional<SimilarityMap> similarity_map;

  friend bool operator==(const SyncObservation&, const SyncObservation&) = default;
};

// Half-open time span [start, end) of a track, in seconds.
inline std::pair<double, double> track_time_range(const Track& t, double fps) {
  return {static_cast<double>(t.first_frame()) / fps, static_cast<double>(t.last_frame() + 1) / fps};
}

inline bool intervals_intersect(double a0, double a1, double b0, double b1) {
  return std::min(a1, b1) > std::max(a0, b0);
}

}  // namespace toonid
