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

// Synthetic movie fixture: four characters with well separated appearance and
// voice embeddings, three jittered seed track sets per shot, speech segments,
// sync evidence and planted ground truth for every evaluation task.

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "toonid/toonid.hpp"

namespace toonid::synth {

struct SyntheticMovieOptions {
  std::uint64_t seed = 7;
  double fps = 24.0;
  int frames_per_shot = 24;
  std::size_t visual_dim = 16;
  std::size_t audio_dim = 16;
  double noise = 0.05;  // per-dimension Gaussian noise on embeddings
};

struct SyntheticMovie {
  std::vector<std::string> characters;
  fs::path config_path;
  json config;
};

class FixtureRng {
 public:
  explicit FixtureRng(std::uint64_t seed) : rng_(seed) {}

  double gauss(double sigma) { return std::normal_distribution<double>(0.0, sigma)(rng_); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }

  // normalize(basis_k + noise)
  EmbeddingVector around(std::size_t dim, std::size_t k, double sigma) {
    std::vector<double> v(dim);
    for (auto& x : v) x = gauss(sigma);
    v[k] += 1.0;
    return EmbeddingVector(normalized(EmbeddingVector(std::move(v))).values, false);
  }

 private:
  std::mt19937_64 rng_;
};

inline void write_doc(const fs::path& p, const ManifestDocument& doc) { write_text_atomic(p, to_jsonl(doc)); }

inline SyntheticMovie write_synthetic_movie(const fs::path& dir, const SyntheticMovieOptions& o = {}) {
  fs::create_directories(dir);
  FixtureRng rng(o.seed);
  SyntheticMovie movie;
  movie.characters = {"Atlas", "Bramble", "Cinder", "Dusk"};
  const std::size_t n_chars = movie.characters.size();

  // Candidates: one profile, seven genuine web images and two impostors each.
  ManifestDocument cand;
  cand.header = {{"record", "header"}, {"kind", "candidates"}, {"movie_id", "synthetic"},
                 {"visual_dim", o.visual_dim}, {"audio_dim", o.audio_dim}};
  for (std::size_t c = 0; c < n_chars; ++c) {
    auto rec = [&](const EmbeddingVector& e, const char* tag) {
      cand.records.push_back({{"record", "candidate"}, {"character_name", movie.characters[c]},
                              {"source_tag", tag}, {"embedding", detail::embedding_json(e)}});
    };
    rec(rng.around(o.visual_dim, c, o.noise), "profile");
    for (int i = 0; i < 7; ++i) rec(rng.around(o.visual_dim, c, o.noise), "web");
    for (int i = 1; i <= 2; ++i) rec(rng.around(o.visual_dim, (c + i) % n_chars, o.noise), "web");
  }
  write_doc(dir / "candidates.jsonl", cand);

  // Interview clusters: per character five videos, each with an actor cluster
  // and a distinct interviewer cluster.
  ManifestDocument interviews;
  interviews.header = {{"record", "header"}, {"kind", "interview_clusters"}, {"audio_dim", o.audio_dim}};
  std::int64_t cluster_id = 0;
  for (std::size_t c = 0; c < n_chars; ++c) {
    for (std::size_t v = 0; v < 5; ++v) {
      auto cluster = [&](std::size_t basis, int n) {
        json embs = json::array();
        for (int i = 0; i < n; ++i) embs.push_back(detail::embedding_json(rng.around(o.audio_dim, basis, o.noise)));
        interviews.records.push_back({{"record", "interview_cluster"}, {"character_name", movie.characters[c]},
                                      {"cluster_id", cluster_id++}, {"segment_embeddings", std::move(embs)}});
      };
      if (v % 2 == 0) {
        cluster(n_chars + (c * 5 + v) % (o.audio_dim - n_chars), 2);
        cluster(c, 3);
      } else {
        cluster(c, 3);
        cluster(n_chars + (c * 5 + v) % (o.audio_dim - n_chars), 2);
      }
    }
  }
  write_doc(dir / "interview_clusters.jsonl", interviews);

  // Shots with their on-screen characters.
  const std::vector<std::vector<std::size_t>> shots = {{0, 1}, {2}, {1, 3}, {0, 2}, {3}, {0, 1, 2}};
  ManifestDocument tracks, segs, sync, gt_boxes, gt_speakers, gt_turns, gt_names;
  tracks.header = {{"record", "header"}, {"kind", "tracks"}, {"fps", o.fps}, {"visual_dim", o.visual_dim}};
  segs.header = {{"record", "header"}, {"kind", "segments"}, {"audio_dim", o.audio_dim}};
  sync.header = {{"record", "header"}, {"kind", "sync"}};
  gt_boxes.header = {{"record", "header"}, {"kind", "gt_boxes"}};
  gt_speakers.header = {{"record", "header"}, {"kind", "gt_speakers"}};
  gt_turns.header = {{"record", "header"}, {"kind", "gt_turns"}};
  gt_names.header = {{"record", "header"}, {"kind", "gt_names"}};

  int segment_no = 0;
  for (std::size_t s = 0; s < shots.size(); ++s) {
    const int f0 = static_cast<int>(s) * o.frames_per_shot;
    const std::string clip = s < 3 ? "clip0" : "clip1";
    std::vector<std::pair<std::string, std::size_t>> seed0_tracks;
    for (std::size_t slot = 0; slot < shots[s].size(); ++slot) {
      const std::size_t c = shots[s][slot];
      std::vector<BoundingBox> gt;
      for (int f = 0; f < o.frames_per_shot; ++f) {
        const double x = 50.0 + 250.0 * static_cast<double>(slot) + f;
        gt.push_back({x, 100.0, x + 120.0, 300.0, f0 + f});
        gt_boxes.records.push_back({{"record", "gt_box"}, {"frame_index", f0 + f}, {"x1", x}, {"y1", 100.0},
                                    {"x2", x + 120.0}, {"y2", 300.0}, {"name", movie.characters[c]}});
      }
      // Seed 0 is exact; seeds 1 and 2 carry mirrored jitter so the
      // coordinate-wise median recovers the ground truth.
      std::vector<std::vector<BoundingBox>> seeds(3, gt);
      for (std::size_t f = 0; f < gt.size(); ++f) {
        double d[4];
        for (double& x : d) x = rng.uniform(0.0, 4.0);
        seeds[1][f] = {gt[f].x1 + d[0], gt[f].y1 + d[1], gt[f].x2 + d[2], gt[f].y2 + d[3], gt[f].frame_index};
        seeds[2][f] = {gt[f].x1 - d[0], gt[f].y1 - d[1], gt[f].x2 - d[2], gt[f].y2 - d[3], gt[f].frame_index};
      }
      for (int seed = 0; seed < 3; ++seed) {
        Track t;
        t.track_id = "shot" + std::to_string(s) + "_seed" + std::to_string(seed) + "_t" + std::to_string(slot);
        t.shot_id = static_cast<std::int64_t>(s);
        t.seed_index = seed;
        t.boxes = seeds[static_cast<std::size_t>(seed)];
        for (std::size_t j = 0; j < kSampledFeatureCount; ++j) t.sampled_features.push_back(rng.around(o.visual_dim, c, o.noise));
        tracks.records.push_back(track_json(t));
        if (seed == 0) seed0_tracks.push_back({t.track_id, c});
      }
    }
    // A spurious proposal in one seed only.
    if (s % 3 == 0) {
      Track t;
      t.track_id = "shot" + std::to_string(s) + "_seed1_spurious";
      t.shot_id = static_cast<std::int64_t>(s);
      t.seed_index = 1;
      for (int f = 0; f < o.frames_per_shot / 2; ++f) t.boxes.push_back({900.0, 50.0, 960.0, 110.0, f0 + f});
      for (std::size_t j = 0; j < kSampledFeatureCount; ++j)
        t.sampled_features.push_back(rng.around(o.visual_dim, n_chars + j, o.noise));
      tracks.records.push_back(track_json(t));
    }

    // Each on-screen character speaks once; segments tile the shot.
    const double shot_start = f0 / o.fps;
    const double shot_len = o.frames_per_shot / o.fps;
    const double slice = shot_len / static_cast<double>(shots[s].size());
    std::set<std::string> names;
    for (std::size_t slot = 0; slot < shots[s].size(); ++slot) {
      const std::size_t c = shots[s][slot];
      names.insert(movie.characters[c]);
      SpeechSegment seg;
      seg.segment_id = "seg" + std::to_string(segment_no++);
      seg.start_s = shot_start + slot * slice + 0.05 * slice;
      seg.end_s = shot_start + (slot + 1) * slice - 0.05 * slice;
      seg.transcript = movie.characters[c] + " says line " + seg.segment_id;
      seg.embedding = rng.around(o.audio_dim, c, o.noise);
      seg.cluster_id = static_cast<std::int64_t>(c);
      json rec = segment_json(seg);
      rec.erase("predicted_speaker");
      segs.records.push_back(std::move(rec));
      gt_speakers.records.push_back({{"record", "gt_speaker"}, {"segment_id", seg.segment_id},
                                     {"speaker", movie.characters[c]}});
      gt_turns.records.push_back({{"record", "gt_turn"}, {"clip_id", clip}, {"start_s", seg.start_s},
                                  {"end_s", seg.end_s}, {"speaker", movie.characters[c]}});
      for (const auto& [tid, tc] : seed0_tracks) {
        const double score = tc == c ? 0.8 : 0.1;
        json ob{{"record", "sync"}, {"track_ref", tid}, {"segment_ref", seg.segment_id}};
        if (s % 2 == 0) {
          // t x h x w map whose spatial maxima average to `score`
          json grid = json::array();
          for (int t = 0; t < 4; ++t) {
            const double peak = score + (t % 2 == 0 ? 0.05 : -0.05);
            grid.push_back({{peak, score * 0.5}, {0.0, peak * 0.25}});
          }
          ob["similarity_map"] = std::move(grid);
        } else {
          ob["sync_score"] = score;
        }
        sync.records.push_back(std::move(ob));
      }
    }
    if (s % 3 == 0) gt_names.records.push_back({{"record", "gt_name"}, {"clip_id", clip}, {"shot_ids", json::array()}, {"names", json::array()}});
    auto& clip_rec = gt_names.records.back();
    clip_rec["shot_ids"].push_back(s);
    for (const auto& n : names)
      if (std::find(clip_rec["names"].begin(), clip_rec["names"].end(), n) == clip_rec["names"].end())
        clip_rec["names"].push_back(n);
  }
  write_doc(dir / "tracks.jsonl", tracks);
  write_doc(dir / "segments.jsonl", segs);
  write_doc(dir / "sync.jsonl", sync);
  write_doc(dir / "gt_boxes.jsonl", gt_boxes);
  write_doc(dir / "gt_speakers.jsonl", gt_speakers);
  write_doc(dir / "gt_turns.jsonl", gt_turns);
  write_doc(dir / "gt_names.jsonl", gt_names);

  ManifestDocument intervals;
  intervals.header = {{"record", "header"}, {"kind", "intervals"}};
  intervals.records.push_back({{"record", "interval"}, {"interval_id", "ad0"}, {"start_s", 0.0}, {"end_s", 2.0}});
  intervals.records.push_back({{"record", "interval"}, {"interval_id", "ad1"}, {"start_s", 3.0}, {"end_s", 4.5}});
  write_doc(dir / "intervals.jsonl", intervals);

  const fs::path abs = fs::absolute(dir);
  movie.config = {{"candidates", (abs / "candidates.jsonl").string()},
                  {"interviews", (abs / "interview_clusters.jsonl").string()},
                  {"tracks", (abs / "tracks.jsonl").string()},
                  {"segments", (abs / "segments.jsonl").string()},
                  {"sync", (abs / "sync.jsonl").string()},
                  {"intervals", (abs / "intervals.jsonl").string()},
                  {"gt-names", (abs / "gt_names.jsonl").string()},
                  {"gt-boxes", (abs / "gt_boxes.jsonl").string()},
                  {"gt-speakers", (abs / "gt_speakers.jsonl").string()},
                  {"gt-turns", (abs / "gt_turns.jsonl").string()},
                  {"out-dir", (abs / "out").string()},
                  {"seed", o.seed}};
  movie.config_path = dir / "config.json";
  write_text_atomic(movie.config_path, movie.config.dump(2) + "\n");
  return movie;
}

}  // namespace toonid::synth
