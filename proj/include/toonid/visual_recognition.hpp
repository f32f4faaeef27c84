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
#include <array>
#include <atomic>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "toonid/core.hpp"
#include "toonid/embedding_adapter.hpp"

namespace toonid {

inline constexpr double kDefaultTrackIouThreshold = 0.5;
inline constexpr double kDefaultNmsThreshold = 0.5;
inline constexpr std::size_t kSeedCount = 3;

inline double box_iou(const BoundingBox& a, const BoundingBox& b) {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0 || ih <= 0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return uni > 0 ? inter / uni : 0.0;
}

// Mean per-frame box IoU over the frames both tracks cover; 0 without common
// frames.
inline double track_iou(const Track& a, const Track& b) {
  double sum = 0.0;
  std::size_t common = 0;
  for (const auto& box : a.boxes) {
    if (const BoundingBox* other = b.box_at(box.frame_index)) {
      sum += box_iou(box, *other);
      ++common;
    }
  }
  return common == 0 ? 0.0 : sum / static_cast<double>(common);
}

struct SeedTrackSet {
  int seed_index = 0;
  std::vector<Track> tracks;
};

struct MatchedTrackGroup {
  std::array<Track, kSeedCount> members;  // members[s] comes from seed set s
  double score = 0.0;                     // min pairwise track IoU
};

// Greedy best-first tripartite matching. Every cross-seed triple is scored by its
// minimum pairwise track IoU; triples are accepted in descending score order
// (ties by seed-local indices) while all members are unused and the score
// reaches the threshold. Unmatched tracks are dropped.
inline std::vector<MatchedTrackGroup> tripartite_match(const std::array<SeedTrackSet, kSeedCount>& sets,
                                                       double iou_threshold = kDefaultTrackIouThreshold) {
  if (!(iou_threshold > 0 && iou_threshold <= 1))
    throw Error(ErrorCode::kInvalidArgument, "track IoU threshold must lie in (0, 1]");
  const auto& A = sets[0].tracks;
  const auto& B = sets[1].tracks;
  const auto& C = sets[2].tracks;
  auto pairwise = [](const std::vector<Track>& x, const std::vector<Track>& y) {
    std::vector<std::vector<double>> m(x.size(), std::vector<double>(y.size()));
    for (std::size_t i = 0; i < x.size(); ++i)
      for (std::size_t j = 0; j < y.size(); ++j) m[i][j] = track_iou(x[i], y[j]);
    return m;
  };
  const auto ab = pairwise(A, B), ac = pairwise(A, C), bc = pairwise(B, C);

  struct Triple {
    double score;
    std::size_t i, j, k;
  };
  std::vector<Triple> triples;
  for (std::size_t i = 0; i < A.size(); ++i)
    for (std::size_t j = 0; j < B.size(); ++j)
      for (std::size_t k = 0; k < C.size(); ++k) {
        const double s = std::min({ab[i][j], ac[i][k], bc[j][k]});
        if (s >= iou_threshold) triples.push_back({s, i, j, k});
      }
  std::stable_sort(triples.begin(), triples.end(), [](const Triple& x, const Triple& y) { return x.score > y.score; });

  std::vector<bool> used_a(A.size()), used_b(B.size()), used_c(C.size());
  std::vector<MatchedTrackGroup> groups;
  for (const auto& t : triples) {
    if (used_a[t.i] || used_b[t.j] || used_c[t.k]) continue;
    used_a[t.i] = used_b[t.j] = used_c[t.k] = true;
    groups.push_back({{A[t.i], B[t.j], C[t.k]}, t.score});
  }
  return groups;
}

namespace detail {

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// n indices spread uniformly over [0, m), endpoints included.
inline std::vector<std::size_t> uniform_positions(std::size_t m, std::size_t n) {
  std::vector<std::size_t> out;
  if (m == 0) return out;
  for (std::size_t i = 0; i < n; ++i) {
    const double pos = n == 1 ? 0.5 * static_cast<double>(m - 1)
                              : static_cast<double>(i) * static_cast<double>(m - 1) / static_cast<double>(n - 1);
    out.push_back(static_cast<std::size_t>(std::llround(pos)));
  }
  return out;
}

}  // namespace detail

// One candidate track per matched group: union of frame coverage, per-frame
// coordinate-wise median of the member boxes present, identity and features
// taken from the seed-0 member.
inline Track merge_group(const MatchedTrackGroup& group) {
  const Track& lead = group.members[0];
  std::map<std::int64_t, std::vector<const BoundingBox*>> by_frame;
  for (const auto& m : group.members)
    for (const auto& b : m.boxes) by_frame[b.frame_index].push_back(&b);

  Track merged;
  merged.track_id = lead.track_id;
  merged.shot_id = lead.shot_id;
  merged.seed_index = 0;
  for (const auto& [frame, boxes] : by_frame) {
    std::vector<double> x1, y1, x2, y2;
    for (const BoundingBox* b : boxes) {
      x1.push_back(b->x1);
      y1.push_back(b->y1);
      x2.push_back(b->x2);
      y2.push_back(b->y2);
    }
    merged.boxes.push_back({detail::median(x1), detail::median(y1), detail::median(x2), detail::median(y2), frame});
  }
  merged.frame_features = lead.frame_features;
  if (!lead.frame_features.empty()) {
    std::vector<const EmbeddingVector*> feats;
    for (const auto& [f, e] : lead.frame_features) feats.push_back(&e);
    for (std::size_t p : detail::uniform_positions(feats.size(), kSampledFeatureCount))
      merged.sampled_features.push_back(*feats[p]);
  } else {
    merged.sampled_features = lead.sampled_features;
  }
  return merged;
}

struct VisualMatch {
  std::map<std::string, double> scores;
  std::optional<std::string> assigned;
  double s_vm = 0.0;
};

// s_vm^p = max over sampled features of the mean top-k cosine similarity to
// character p's appearance exemplars. When a projection is given, features and
// exemplars are projected first.
inline VisualMatch visual_match(const Track& track, const CharacterBank& bank, std::size_t k = kDefaultTopK,
                                const ProjectionMatrix* projection = nullptr) {
  if (k < 1) throw Error(ErrorCode::kInvalidArgument, "k must be >= 1");
  if (track.sampled_features.empty())
    throw Error(ErrorCode::kInvalidArgument, "track '" + track.track_id + "' has no sampled features");
  auto prep = [&](const EmbeddingVector& v) { return projection ? apply_projection(*projection, v) : v; };
  std::vector<EmbeddingVector> feats;
  for (const auto& f : track.sampled_features) feats.push_back(prep(f));

  VisualMatch out;
  for (const auto& ch : bank.characters) {
    if (ch.appearance_exemplars.empty()) continue;
    std::vector<EmbeddingVector> ex;
    for (const auto& e : ch.appearance_exemplars) ex.push_back(prep(e));
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& f : feats) {
      std::vector<double> sims;
      for (const auto& e : ex) sims.push_back(cosine_similarity(f, e));
      best = std::max(best, top_k_mean(std::move(sims), k));
    }
    out.scores[ch.name] = best;
  }
  auto best = argmax_score(out.scores);
  if (!best) throw Error(ErrorCode::kEmptyInput, "no character in the bank has appearance exemplars");
  out.assigned = best->first;
  out.s_vm = best->second;
  return out;
}

struct Detection {
  BoundingBox box;
  double score = 0.0;
  std::size_t source = 0;  // caller-defined tag, e.g. index of the owning track
};

// Greedy NMS: highest score first (ties by input order); a box is suppressed
// when its IoU with any retained box reaches the threshold.
inline std::vector<Detection> frame_nms(std::span<const Detection> detections,
                                        double iou_threshold = kDefaultNmsThreshold) {
  std::vector<std::size_t> order(detections.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (!std::isfinite(detections[i].score)) throw Error(ErrorCode::kNonFinite, "detection score is not finite");
    order[i] = i;
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return detections[a].score > detections[b].score; });
  std::vector<Detection> kept;
  for (std::size_t i : order) {
    bool suppressed = false;
    for (const auto& k : kept)
      if (box_iou(k.box, detections[i].box) >= iou_threshold) {
        suppressed = true;
        break;
      }
    if (!suppressed) kept.push_back(detections[i]);
  }
  return kept;
}

struct VisualOptions {
  std::size_t k = kDefaultTopK;
  double track_iou_threshold = kDefaultTrackIouThreshold;
  double nms_threshold = kDefaultNmsThreshold;
  std::size_t jobs = 1;  // worker bound for per-shot matching
};

// Shot-level recognition over raw seed tracks: tripartite matching, merging,
// character identification on the merged tracks, then per-frame NMS across the
// labelled tracks (suppressed boxes are removed; emptied tracks are dropped).
// With a projection, bank exemplars and track features are compared in the
// projected space; output tracks keep their original features.
inline std::vector<Track> recognize_tracks(std::span<const Track> raw, const CharacterBank& bank,
                                           const VisualOptions& opts = {},
                                           const ProjectionMatrix* projection = nullptr) {
  std::map<std::int64_t, std::array<SeedTrackSet, kSeedCount>> shots;
  for (const auto& t : raw) {
    if (t.seed_index < 0 || t.seed_index >= static_cast<int>(kSeedCount))
      throw Error(ErrorCode::kValidation, "track '" + t.track_id + "' has seed_index outside {0,1,2}");
    auto& set = shots[t.shot_id][static_cast<std::size_t>(t.seed_index)];
    set.seed_index = t.seed_index;
    set.tracks.push_back(t);
  }
  const CharacterBank matched_bank = projection ? project_bank(bank, *projection) : bank;

  std::vector<const std::array<SeedTrackSet, kSeedCount>*> shot_list;
  for (const auto& [shot, sets] : shots) shot_list.push_back(&sets);
  std::vector<std::vector<Track>> per_shot(shot_list.size());
  auto work = [&](std::size_t s) {
    for (const auto& g : tripartite_match(*shot_list[s], opts.track_iou_threshold)) {
      Track m = merge_group(g);
      Track probe = m;
      if (projection)
        for (auto& f : probe.sampled_features) f = apply_projection(*projection, f);
      VisualMatch vm = visual_match(probe, matched_bank, opts.k);
      m.scores = std::move(vm.scores);
      m.assigned_character = vm.assigned;
      per_shot[s].push_back(std::move(m));
    }
  };
  const std::size_t jobs = std::max<std::size_t>(1, std::min(opts.jobs, shot_list.size()));
  if (jobs <= 1) {
    for (std::size_t s = 0; s < shot_list.size(); ++s) work(s);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < jobs; ++w) {
      pool.emplace_back([&] {
        for (std::size_t s; (s = next.fetch_add(1)) < shot_list.size();) {
          try {
            work(s);
          } catch (...) {
            std::lock_guard lock(failure_mu);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
  }
  std::vector<Track> labeled;
  for (auto& v : per_shot)
    for (auto& t : v) labeled.push_back(std::move(t));

  std::map<std::int64_t, std::vector<Detection>> per_frame;
  for (std::size_t ti = 0; ti < labeled.size(); ++ti)
    for (const auto& b : labeled[ti].boxes) per_frame[b.frame_index].push_back({b, labeled[ti].s_vm(), ti});
  std::set<std::pair<std::size_t, std::int64_t>> keep;
  for (const auto& [frame, dets] : per_frame)
    for (const auto& d : frame_nms(dets, opts.nms_threshold)) keep.insert({d.source, frame});

  std::vector<Track> out;
  for (std::size_t ti = 0; ti < labeled.size(); ++ti) {
    Track& t = labeled[ti];
    std::erase_if(t.boxes, [&](const BoundingBox& b) { return !keep.contains({ti, b.frame_index}); });
    if (!t.boxes.empty()) out.push_back(std::move(t));
  }
  return out;
}

}  // namespace toonid
