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

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "test_util.hpp"
#include "toonid/audio_recognition.hpp"

using namespace toonid;
using namespace testutil;

TEST(Centroid, Examples) {
  std::vector<SpeechSegment> one{make_segment("a", 0, 1, {3, 4})};
  auto c = cluster_centroid(one);
  EXPECT_NEAR(c.values[0], 0.6, 1e-15);
  EXPECT_NEAR(c.values[1], 0.8, 1e-15);
  std::vector<SpeechSegment> two{make_segment("a", 0, 1, {1, 0}), make_segment("b", 0, 1, {0, 1})};
  c = cluster_centroid(two);
  EXPECT_NEAR(c.values[0], 0.70711, 1e-5);
  EXPECT_NEAR(c.values[1], 0.70711, 1e-5);
  std::vector<SpeechSegment> anti{make_segment("a", 0, 1, {1, 0}), make_segment("b", 0, 1, {-1, 0})};
  EXPECT_THROW(cluster_centroid(anti), Error);
  EXPECT_THROW(cluster_centroid(std::vector<SpeechSegment>{}), Error);
}

TEST(AudioMatch, Examples) {
  auto bank = bank_of({entry("A", {}, {{1, 0, 0}}), entry("B", {}, {{0, 1, 0}})}, 0, 3);
  auto a = audio_match({0, 1, 0}, bank);
  EXPECT_EQ(a.assigned_character, "B");
  EXPECT_DOUBLE_EQ(a.s_am, 1.0);
  EXPECT_DOUBLE_EQ(a.scores.at("A"), 0.0);
  EXPECT_EQ(kDefaultTopK, 3u);
}

TEST(AudioMatch, BruteForceTopThree) {
  oracle::Gen g(50);
  for (int i = 0; i < 300; ++i) {
    CharacterBank bank = bank_of({entry("A", {}, {g.vec(3), g.vec(3), g.vec(3)}), entry("B", {}, {g.vec(3), g.vec(3), g.vec(3)})}, 0, 3);
    auto c = g.vec(3);
    auto m = audio_match(c, bank, 3);
    std::map<std::string, double> ref;
    for (const auto& ch : bank.characters) {
      double s = 0;
      for (const auto& v : ch.voice_exemplars) s += cosine_similarity(c, v);
      ref[ch.name] = s / 3;
    }
    EXPECT_NEAR(m.scores.at("A"), ref["A"], 1e-12);
    EXPECT_NEAR(m.scores.at("B"), ref["B"], 1e-12);
    EXPECT_EQ(m.assigned_character, ref["A"] >= ref["B"] ? "A" : "B");
    EXPECT_DOUBLE_EQ(m.s_am, m.scores.at(m.assigned_character));
  }
}

TEST(AudioMatch, TopKPicksLargest) {
  auto bank = bank_of({entry("A", {}, {{1, 0}, {0, 1}, {-1, 0}, {1, 1}})}, 0, 2);
  auto m = audio_match({1, 0}, bank, 2);
  EXPECT_NEAR(m.s_am, (1.0 + std::sqrt(0.5)) / 2, 1e-12);
}

TEST(AudioMatch, ScaleInvariance) {
  oracle::Gen g(51);
  for (int i = 0; i < 200; ++i) {
    auto bank = bank_of({entry("A", {}, {g.vec(4), g.vec(4)}), entry("B", {}, {g.vec(4), g.vec(4), g.vec(4), g.vec(4)})}, 0, 4);
    auto c = g.vec(4);
    auto m = audio_match(c, bank);
    auto scaled = bank;
    for (auto& ch : scaled.characters)
      for (auto& v : ch.voice_exemplars) {
        const double k = g.real(0.01, 100);
        for (auto& x : v.values) x *= k;
      }
    for (auto& x : c.values) x *= 3.0;
    auto ms = audio_match(c, scaled);
    EXPECT_EQ(ms.assigned_character, m.assigned_character);
    EXPECT_NEAR(ms.s_am, m.s_am, 1e-12);
  }
}

TEST(AudioMatch, SkipsSilentCharactersAndErrors) {
  auto bank = bank_of({entry("A", {}, {}), entry("B", {}, {{0, 1}})}, 0, 2);
  auto m = audio_match({1, 0}, bank);
  EXPECT_EQ(m.assigned_character, "B");
  EXPECT_FALSE(m.scores.contains("A"));
  auto none = bank_of({entry("A", {}, {})}, 0, 2);
  EXPECT_THROW(audio_match({1, 0}, none), Error);
  EXPECT_THROW(audio_match({1, 0}, bank, 0), Error);
}

TEST(Confidence, Examples) {
  auto s = make_segment("a", 0, 1, {1, 0});
  EXPECT_DOUBLE_EQ(segment_confidence(s, {1, 0}, 0.8), 0.8);
  EXPECT_DOUBLE_EQ(segment_confidence(s, {0, 1}, 0.8), 0.0);
  EXPECT_DOUBLE_EQ(segment_confidence(s, {-1, 0}, 0.8), 0.0);
  // cos = 0.5
  EXPECT_NEAR(segment_confidence(s, {0.5, std::sqrt(0.75)}, 0.8), 0.4, 1e-15);
  EXPECT_DOUBLE_EQ(segment_confidence(s, {1, 0}, -0.3), 0.0);
  EXPECT_THROW(segment_confidence(s, {1, 0}, std::nan("")), Error);
}

TEST(SyncReduce, Examples) {
  EXPECT_DOUBLE_EQ(sync_score_reduce({2, 2, 2, std::vector<double>(8, 0.7)}), 0.7);
  EXPECT_DOUBLE_EQ(sync_score_reduce({2, 1, 2, {1.0, 0.2, 0.0, -0.5}}), 0.5);
  EXPECT_DOUBLE_EQ(sync_score_reduce({1, 1, 1, {0.3}}), 0.3);
  EXPECT_DOUBLE_EQ(sync_score_reduce({2, 1, 1, {-0.2, -0.4}}), -0.3);
  EXPECT_THROW(sync_score_reduce({0, 1, 1, {}}), Error);
  EXPECT_THROW(sync_score_reduce({1, 2, 2, {0.1, 0.2}}), Error);
  EXPECT_THROW(sync_score_reduce({1, 1, 1, {std::nan("")}}), Error);
}

TEST(SyncReduce, MatchesDefinitionAndMonotone) {
  oracle::Gen g(52);
  for (int i = 0; i < 1000; ++i) {
    SimilarityMap m{static_cast<std::size_t>(g.integer(1, 5)), static_cast<std::size_t>(g.integer(1, 4)),
                    static_cast<std::size_t>(g.integer(1, 4)), {}};
    for (std::size_t k = 0; k < m.t * m.h * m.w; ++k) m.data.push_back(g.real(-1, 1));
    double ref = 0;
    for (std::size_t t = 0; t < m.t; ++t) {
      double best = -10;
      for (std::size_t k = 0; k < m.h * m.w; ++k) best = std::max(best, m.data[t * m.h * m.w + k]);
      ref += best;
    }
    const double s = sync_score_reduce(m);
    EXPECT_NEAR(s, ref / static_cast<double>(m.t), 1e-12);
    auto up = m;
    up.data[static_cast<std::size_t>(g.integer(0, static_cast<int>(m.data.size()) - 1))] += g.real(0, 1);
    EXPECT_GE(sync_score_reduce(up), s);
  }
}

namespace {

SpeechSegment with_confidence(double ca, std::string speaker = "Audio") {
  auto s = make_segment("s", 0, 1, {1, 0});
  s.predicted_speaker = std::move(speaker);
  s.audio_confidence = ca;
  return s;
}

}  // namespace

TEST(Fusion, Examples) {
  auto track = labeled(make_track("t", 0, 0, 0, 23, {0, 0, 1, 1, 0}), "Vis", 0.8);
  std::vector<OverlappingTrack> ov{{&track, 0.5}};
  auto out = visual_enhanced_update(with_confidence(0.2), ov, {1.0, 0.35});
  EXPECT_EQ(out.predicted_speaker, "Vis");
  EXPECT_NEAR(*out.visual_confidence, 0.4, 1e-15);
  EXPECT_EQ(out.label_source, LabelSource::kVisual);

  auto skipped = visual_enhanced_update(with_confidence(0.5), ov, {1.0, 0.35});
  EXPECT_EQ(skipped.predicted_speaker, "Audio");
  EXPECT_FALSE(skipped.visual_confidence);

  auto lone = visual_enhanced_update(with_confidence(0.1), std::vector<OverlappingTrack>{}, {});
  EXPECT_EQ(lone, with_confidence(0.1));

  // gate is strict: c_a equal to the threshold is left alone
  EXPECT_EQ(visual_enhanced_update(with_confidence(0.35), ov, {1.0, 0.35}).predicted_speaker, "Audio");
  // comparison is strict: lambda * c_v == c_a keeps the audio label
  EXPECT_EQ(visual_enhanced_update(with_confidence(0.2), ov, {0.5, 0.35}).predicted_speaker, "Audio");
}

TEST(Fusion, BestTrackWins) {
  auto a = labeled(make_track("a", 0, 0, 0, 23, {0, 0, 1, 1, 0}), "A", 0.9);
  auto b = labeled(make_track("b", 0, 0, 0, 23, {0, 0, 1, 1, 0}), "B", 0.6);
  auto u = make_track("u", 0, 0, 0, 23, {0, 0, 1, 1, 0});
  std::vector<OverlappingTrack> ov{{&a, 0.3}, {&b, 0.8}, {&u, 1.0}};
  auto out = visual_enhanced_update(with_confidence(0.1), ov, {});
  EXPECT_EQ(out.predicted_speaker, "B");
  EXPECT_NEAR(*out.visual_confidence, 0.48, 1e-15);
}

TEST(Fusion, ExactRuleFuzz) {
  oracle::Gen g(53);
  for (int i = 0; i < 2000; ++i) {
    const double gate = g.real(0, 1), lambda = g.coin(0.1) ? 1e-12 : g.real(0.01, 3);
    const double ca = g.coin(0.1) ? 0.0 : g.real(0, 1);
    std::vector<Track> ts;
    for (int k = 0, n = g.integer(0, 4); k < n; ++k)
      ts.push_back(labeled(make_track("t" + std::to_string(k), 0, 0, 0, 1, {0, 0, 1, 1, 0}), "V" + std::to_string(k), g.real(0, 1)));
    std::vector<OverlappingTrack> ov;
    double best = 0;
    int best_k = -1;
    for (std::size_t k = 0; k < ts.size(); ++k) {
      ov.push_back({&ts[k], g.real(0, 1)});
      const double cv = ov.back().s_sync * ts[k].s_vm();
      if (best_k < 0 || cv > best) {
        best = cv;
        best_k = static_cast<int>(k);
      }
    }
    auto out = visual_enhanced_update(with_confidence(ca), ov, {lambda, gate});
    const bool should_flip = ca < gate && best_k >= 0 && lambda * best > ca;
    EXPECT_EQ(out.label_source == LabelSource::kVisual, should_flip);
    if (should_flip) {
      EXPECT_EQ(out.predicted_speaker, "V" + std::to_string(best_k));
    }
    if (ca >= gate) {
      EXPECT_EQ(out, with_confidence(ca));
    }
  }
}

TEST(FusionConfig, Checks) {
  EXPECT_THROW((FusionConfig{0.0, 0.35}).check(), Error);
  EXPECT_THROW((FusionConfig{1.0, 1.5}).check(), Error);
  EXPECT_NO_THROW((FusionConfig{}).check());
  EXPECT_DOUBLE_EQ(FusionConfig{}.lambda, 1.0);
  EXPECT_DOUBLE_EQ(FusionConfig{}.low_conf_threshold, 0.35);
}

namespace {

CharacterBank voice_bank() {
  return bank_of({entry("A", {{1, 0}}, {{1, 0, 0}, {0.9, 0.1, 0}}), entry("B", {{0, 1}}, {{0, 1, 0}, {0.1, 0.9, 0}})}, 2, 3);
}

}  // namespace

TEST(Diarise, CleanClusterAudioOnly) {
  std::vector<SpeechSegment> segs{make_segment("s0", 0, 1, {1, 0.05, 0}, 4), make_segment("s1", 1, 2, {1, -0.05, 0}, 4)};
  auto out = diarise(segs, voice_bank(), {}, {}, {});
  ASSERT_EQ(out.size(), 2u);
  for (const auto& s : out) {
    EXPECT_EQ(s.predicted_speaker, "A");
    EXPECT_EQ(s.label_source, LabelSource::kAudio);
    EXPECT_GT(s.audio_confidence, 0.9);
    EXPECT_LE(s.audio_confidence, 1.0);
  }
}

TEST(Diarise, UnknownWithoutVoiceBank) {
  auto bank = bank_of({entry("A", {{1, 0}})}, 2, 3);
  std::vector<SpeechSegment> segs{make_segment("s0", 0, 1, {1, 0, 0}, 0), make_segment("s1", 1, 2, {0, 1, 0}, 1)};
  auto out = diarise(segs, bank, {}, {}, {});
  for (const auto& s : out) EXPECT_EQ(s.predicted_speaker, kUnknownSpeaker);
}

TEST(Diarise, CorruptedClusterFlipsThroughSync) {
  // cluster 7 mixes a B-like and an ambiguous segment; centroid lands nearer A
  // at low confidence while sync evidence points at B's track.
  std::vector<SpeechSegment> segs{make_segment("s0", 0.0, 0.9, {1, 0, 0}, 1),
                                  make_segment("s1", 1.0, 1.9, {0, 0, 1}, 7),
                                  make_segment("s2", 2.0, 2.9, {0.2, 0.1, 0.2}, 7)};
  std::vector<Track> tracks{labeled(make_track("tb", 0, 0, 24, 47, {0, 0, 1, 1, 0}), "B", 0.9),
                            labeled(make_track("ta", 0, 0, 0, 23, {0, 0, 1, 1, 0}), "A", 0.9)};
  std::vector<SyncObservation> sync{sync_obs("tb", "s1", 0.8), sync_obs("ta", "s0", 0.8)};
  DiariseOptions opts;
  opts.fps = 24.0;
  auto out = diarise(segs, voice_bank(), tracks, sync, opts);
  EXPECT_EQ(out[0].predicted_speaker, "A");
  EXPECT_EQ(out[0].label_source, LabelSource::kAudio);
  EXPECT_LT(out[1].audio_confidence, 0.35);
  EXPECT_EQ(out[1].predicted_speaker, "B");
  EXPECT_EQ(out[1].label_source, LabelSource::kVisual);
  EXPECT_NEAR(*out[1].visual_confidence, 0.72, 1e-12);
  // s2 overlaps no track with sync evidence
  EXPECT_EQ(out[2].label_source, LabelSource::kAudio);

  opts.enable_fusion = false;
  auto plain = diarise(segs, voice_bank(), tracks, sync, opts);
  EXPECT_EQ(plain[1].label_source, LabelSource::kAudio);
  EXPECT_EQ(plain[1].predicted_speaker, out[2].predicted_speaker);

  opts.enable_fusion = true;
  opts.fps = 0;
  EXPECT_THROW(diarise(segs, voice_bank(), tracks, sync, opts), Error);
}
