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

using namespace toonid;
using namespace testutil;

TEST(Cosine, Examples) {
  EXPECT_DOUBLE_EQ(cosine_similarity({1, 0, 0}, {1, 0, 0}), 1.0);
  EXPECT_DOUBLE_EQ(cosine_similarity({1, 0}, {0, 1}), 0.0);
  EXPECT_NEAR(cosine_similarity({1, 1}, {1, 0}), 1.0 / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(cosine_similarity({1, 1}, {1, 0}), 0.70711, 1e-5);
  EXPECT_DOUBLE_EQ(cosine_similarity({1, 0}, {-1, 0}), -1.0);
}

TEST(Cosine, Errors) {
  try {
    cosine_similarity({1, 0}, {1, 0, 0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDimensionMismatch);
  }
  try {
    cosine_similarity({0, 0}, {1, 0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kZeroVector);
  }
  EXPECT_THROW(cosine_similarity(EmbeddingVector{}, EmbeddingVector{}), Error);
}

TEST(Cosine, SelfScaleAndSymmetry) {
  oracle::Gen g(11);
  for (int i = 0; i < 500; ++i) {
    const auto d = static_cast<std::size_t>(g.integer(1, 32));
    auto a = g.vec(d), b = g.vec(d);
    EXPECT_NEAR(cosine_similarity(a, a), 1.0, 1e-9);
    EXPECT_DOUBLE_EQ(cosine_similarity(a, b), cosine_similarity(b, a));
    const double s = g.real(1e-3, 1e3);
    auto as = a;
    for (auto& x : as.values) x *= s;
    EXPECT_NEAR(cosine_similarity(as, b), cosine_similarity(a, b), 1e-12);
    const double c = cosine_similarity(a, b);
    EXPECT_GE(c, -1.0);
    EXPECT_LE(c, 1.0);
  }
}

TEST(Core, TopKAndArgmax) {
  EXPECT_DOUBLE_EQ(top_k_mean({0.1, 0.9, 0.5, 0.7}, 3), (0.9 + 0.7 + 0.5) / 3);
  EXPECT_DOUBLE_EQ(top_k_mean({0.2, 0.4}, 3), 0.3);
  EXPECT_THROW(top_k_mean({}, 3), Error);
  auto best = argmax_score({{"b", 0.5}, {"a", 0.5}, {"c", 0.1}});
  ASSERT_TRUE(best);
  EXPECT_EQ(best->first, "a");
}

TEST(Core, MeanNormalized) {
  std::vector<EmbeddingVector> v{{1, 0}, {0, 1}};
  auto m = mean_normalized(v);
  EXPECT_NEAR(m.values[0], std::sqrt(0.5), 1e-12);
  EXPECT_NEAR(m.values[1], std::sqrt(0.5), 1e-12);
  EXPECT_TRUE(m.normalized);
  std::vector<EmbeddingVector> anti{{1, 0}, {-1, 0}};
  try {
    mean_normalized(anti);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerate);
  }
}

namespace {

json bank_doc_json(int voice_count) {
  json voice = json::array();
  for (int i = 0; i < voice_count; ++i) voice.push_back({{"values", {1.0, 0.5 * i}}, {"normalized", false}});
  return json{{"name", "Po"},
              {"record", "character"},
              {"appearance_exemplars", {{{"values", {1.0, 0.0, 0.0}}, {"normalized", true}}}},
              {"voice_exemplars", voice},
              {"profile_embedding", {{"values", {1.0, 0.0, 0.0}}, {"normalized", true}}}};
}

ManifestDocument bank_doc(int voice_count) {
  ManifestDocument d;
  d.header = {{"record", "header"}, {"kind", "bank"}, {"movie_id", "m"}, {"visual_dim", 3}, {"audio_dim", 2}};
  d.records.push_back(bank_doc_json(voice_count));
  return d;
}

ManifestDocument track_doc(json box) {
  ManifestDocument d;
  d.header = {{"record", "header"}, {"kind", "tracks"}, {"fps", 24.0}, {"visual_dim", 2}};
  json feats = json::array();
  for (int i = 0; i < 5; ++i) feats.push_back({{"values", {1.0, 0.0}}});
  d.records.push_back({{"track_id", "t0"},
                       {"shot_id", 0},
                       {"boxes", {{{"x1", 0.0}, {"y1", 0.0}, {"x2", 5.0}, {"y2", 5.0}, {"frame_index", 0}}, box}},
                       {"sampled_features", feats}});
  return d;
}

}  // namespace

TEST(Manifest, WellFormedBank) {
  auto v = validate_manifest<CharacterBank>(bank_doc(3));
  EXPECT_TRUE(v.ok());
  EXPECT_TRUE(v.issues.empty());
  ASSERT_EQ(v.value.characters.size(), 1u);
  EXPECT_EQ(v.value.characters[0].voice_exemplars.size(), 3u);
  EXPECT_EQ(v.value.visual_dim, 3u);
}

TEST(Manifest, VoiceCapViolation) {
  EXPECT_TRUE(validate_manifest<CharacterBank>(bank_doc(15)).ok());
  auto v = validate_manifest<CharacterBank>(bank_doc(16));
  EXPECT_FALSE(v.ok());
  EXPECT_TRUE(has_issue(v.issues, "records[0].voice_exemplars", "cap"));
}

TEST(Manifest, BankInvariants) {
  auto doc = bank_doc(1);
  doc.records.push_back(bank_doc_json(1));
  EXPECT_TRUE(has_issue(validate_bank(doc).issues, "records[1].name", "duplicate"));

  doc = bank_doc(1);
  doc.records[0]["appearance_exemplars"][0]["values"] = {1.0, 0.0};
  EXPECT_TRUE(has_issue(validate_bank(doc).issues, "records[0].appearance_exemplars[0]", "dimension"));

  doc = bank_doc(1);
  doc.records[0]["profile_embedding"] = {{"values", {2.0, 0.0, 0.0}}, {"normalized", true}};
  EXPECT_TRUE(has_issue(validate_bank(doc).issues, "records[0].profile_embedding", "norm"));

  doc = bank_doc(1);
  doc.records.clear();
  EXPECT_TRUE(has_issue(validate_bank(doc).issues, "records", "at least one"));

  doc = bank_doc(1);
  doc.records[0]["name"] = "";
  EXPECT_TRUE(has_issue(validate_bank(doc).issues, "records[0].name", "non-empty"));
}

TEST(Manifest, BoxWithSwappedCorners) {
  auto v = validate_manifest<TrackManifest>(
      track_doc({{"x1", 9.0}, {"y1", 0.0}, {"x2", 5.0}, {"y2", 5.0}, {"frame_index", 1}}));
  EXPECT_FALSE(v.ok());
  EXPECT_TRUE(has_issue(v.issues, "records[0].boxes[1]", "x1"));
}

TEST(Manifest, TrackRules) {
  auto gap = track_doc({{"x1", 0.0}, {"y1", 0.0}, {"x2", 5.0}, {"y2", 5.0}, {"frame_index", 3}});
  EXPECT_TRUE(has_issue(validate_tracks(gap).issues, "records[0].boxes[1]", "contiguous"));
  EXPECT_TRUE(validate_tracks(gap, {.require_contiguous = false}).ok());

  auto back = track_doc({{"x1", 0.0}, {"y1", 0.0}, {"x2", 5.0}, {"y2", 5.0}, {"frame_index", 0}});
  EXPECT_TRUE(has_issue(validate_tracks(back, {false}).issues, "records[0].boxes[1]", "increasing"));

  auto four = track_doc({{"x1", 0.0}, {"y1", 0.0}, {"x2", 5.0}, {"y2", 5.0}, {"frame_index", 1}});
  EXPECT_TRUE(validate_tracks(four).ok());
  four.records[0]["sampled_features"].erase(0);
  EXPECT_TRUE(has_issue(validate_tracks(four).issues, "records[0].sampled_features", "5"));

  auto arg = track_doc({{"x1", 0.0}, {"y1", 0.0}, {"x2", 5.0}, {"y2", 5.0}, {"frame_index", 1}});
  arg.records[0]["scores"] = {{"A", 0.2}, {"B", 0.9}};
  arg.records[0]["assigned_character"] = "A";
  EXPECT_TRUE(has_issue(validate_tracks(arg).issues, "records[0].assigned_character", "argmax"));
  arg.records[0]["assigned_character"] = "B";
  EXPECT_TRUE(validate_tracks(arg).ok());
}

TEST(Manifest, SyncExactlyOne) {
  ManifestDocument d;
  d.header = {{"record", "header"}, {"kind", "sync"}};
  d.records.push_back({{"track_ref", "t"}, {"segment_ref", "s"}, {"sync_score", 0.4}});
  d.records.push_back({{"track_ref", "t"}, {"segment_ref", "s"}, {"similarity_map", {{{0.1, 0.3}}, {{0.5, 0.2}}}}});
  d.records.push_back({{"track_ref", "t"}, {"segment_ref", "s"}});
  d.records.push_back({{"track_ref", "t"}, {"segment_ref", "s"}, {"sync_score", 0.4}, {"similarity_map", {{{0.1}}}}});
  d.records.push_back({{"track_ref", "t"}, {"segment_ref", "s"}, {"similarity_map", {{{0.1, 0.3}}, {{0.5}}}}});
  auto v = validate_manifest<SyncManifest>(d);
  EXPECT_FALSE(has_issue(v.issues, "records[0]"));
  EXPECT_FALSE(has_issue(v.issues, "records[1]"));
  EXPECT_TRUE(has_issue(v.issues, "records[2]", "exactly one"));
  EXPECT_TRUE(has_issue(v.issues, "records[3]", "exactly one"));
  EXPECT_TRUE(has_issue(v.issues, "records[4].similarity_map"));
  ASSERT_TRUE(v.value.observations[1].similarity_map);
  const auto& m = *v.value.observations[1].similarity_map;
  EXPECT_EQ(m.t, 2u);
  EXPECT_EQ(m.h, 1u);
  EXPECT_EQ(m.w, 2u);
  EXPECT_DOUBLE_EQ(m.at(1, 0, 0), 0.5);
}

TEST(Manifest, SegmentInvariants) {
  ManifestDocument d;
  d.header = {{"record", "header"}, {"kind", "segments"}, {"audio_dim", 2}};
  d.records.push_back({{"segment_id", "a"}, {"start_s", 2.0}, {"end_s", 1.0}, {"cluster_id", 0},
                       {"embedding", {{"values", {1.0, 0.0}}}}});
  d.records.push_back({{"segment_id", "a"}, {"start_s", 0.0}, {"end_s", 1.0}, {"cluster_id", 0},
                       {"embedding", {{"values", {1.0}}}}, {"audio_confidence", 1.5}});
  auto v = validate_manifest<SegmentManifest>(d);
  EXPECT_TRUE(has_issue(v.issues, "records[0]", "start_s"));
  EXPECT_TRUE(has_issue(v.issues, "records[1].segment_id", "duplicate"));
  EXPECT_TRUE(has_issue(v.issues, "records[1].embedding", "dimension"));
  EXPECT_TRUE(has_issue(v.issues, "records[1].audio_confidence"));
}

TEST(Manifest, ParseErrors) {
  try {
    parse_jsonl("{\"record\":\"header\",\"kind\":\"bank\"}\n{not json\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParse);
  }
  EXPECT_THROW(parse_jsonl(""), Error);
  EXPECT_THROW(parse_jsonl("{\"name\":\"x\"}\n"), Error);
  auto doc = parse_jsonl("{\"record\":\"header\",\"kind\":\"sync\"}\n\n{\"track_ref\":\"a\"}\n");
  EXPECT_EQ(doc.records.size(), 1u);
}

TEST(Manifest, WrongKind) {
  auto doc = bank_doc(1);
  doc.header["kind"] = "tracks";
  EXPECT_TRUE(has_issue(validate_bank(doc).issues, "header.kind"));
}

TEST(Manifest, RequireValidListsEveryIssue) {
  auto doc = bank_doc(16);
  doc.records[0]["name"] = "";
  try {
    require_valid(validate_bank(doc), "bank.jsonl");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kValidation);
    const std::string msg = e.what();
    EXPECT_NE(msg.find("records[0].name"), std::string::npos);
    EXPECT_NE(msg.find("records[0].voice_exemplars"), std::string::npos);
  }
}

// serialize(validate(parse(x))) == canonical(x), and a second trip is a fixed point.
TEST(Manifest, RoundTripProperty) {
  oracle::Gen g(5);
  for (int iter = 0; iter < 200; ++iter) {
    const auto vd = static_cast<std::size_t>(g.integer(1, 6)), ad = static_cast<std::size_t>(g.integer(1, 6));
    CharacterBank bank;
    bank.movie_id = "m" + std::to_string(iter);
    bank.visual_dim = vd;
    bank.audio_dim = ad;
    for (int c = 0, n = g.integer(1, 4); c < n; ++c) {
      CharacterEntry e;
      e.name = "char" + std::to_string(c);
      for (int k = 0, m = g.integer(0, 4); k < m; ++k) e.appearance_exemplars.push_back(g.vec(vd));
      for (int k = 0, m = g.integer(0, 15); k < m; ++k)
        e.voice_exemplars.push_back(g.coin() ? normalized(g.vec(ad)) : g.vec(ad));
      e.profile_embedding = g.vec(vd);
      bank.characters.push_back(std::move(e));
    }
    const std::string text = to_jsonl(to_manifest(bank));
    auto back = require_valid(validate_bank(parse_jsonl(text)), "rt");
    EXPECT_EQ(back, bank);
    EXPECT_EQ(to_jsonl(to_manifest(back)), text);

    TrackManifest tm{g.real(1, 60), vd, {}};
    for (int t = 0, n = g.integer(0, 3); t < n; ++t) {
      Track tr = make_track("t" + std::to_string(t), g.integer(0, 3), g.integer(0, 2), g.integer(0, 5),
                            g.integer(6, 9), {g.real(0, 5), g.real(0, 5), g.real(6, 9), g.real(6, 9), 0});
      for (auto& f : tr.sampled_features) f = g.vec(vd);
      if (g.coin()) {
        tr.scores = {{"a", g.real(0, 0.5)}, {"b", g.real(0.5, 1)}};
        tr.assigned_character = "b";
      }
      if (g.coin()) tr.frame_features[tr.first_frame()] = g.vec(vd);
      tm.tracks.push_back(std::move(tr));
    }
    const std::string ttext = to_jsonl(to_manifest(tm));
    auto tback = require_valid(validate_tracks(parse_jsonl(ttext)), "rt");
    EXPECT_EQ(tback.tracks, tm.tracks);
    EXPECT_EQ(tback.fps, tm.fps);
    EXPECT_EQ(to_jsonl(to_manifest(tback)), ttext);

    SegmentManifest sm{ad, {}};
    for (int s = 0, n = g.integer(0, 4); s < n; ++s) {
      auto seg = make_segment("s" + std::to_string(s), s, s + g.real(0.1, 1), g.vec(ad), g.integer(0, 2));
      if (g.coin()) {
        seg.predicted_speaker = "char0";
        seg.audio_confidence = g.real(0, 1);
        if (g.coin()) {
          seg.visual_confidence = g.real(0, 1);
          seg.label_source = LabelSource::kVisual;
        }
      }
      sm.segments.push_back(std::move(seg));
    }
    const std::string stext = to_jsonl(to_manifest(sm));
    auto sback = require_valid(validate_manifest<SegmentManifest>(parse_jsonl(stext)), "rt");
    EXPECT_EQ(sback.segments, sm.segments);
    EXPECT_EQ(to_jsonl(to_manifest(sback)), stext);

    SyncManifest ym;
    for (int s = 0, n = g.integer(0, 4); s < n; ++s) {
      SyncObservation o{"t" + std::to_string(s), "s" + std::to_string(s), std::nullopt, std::nullopt};
      if (g.coin()) {
        o.sync_score = g.real(-1, 1);
      } else {
        SimilarityMap m{static_cast<std::size_t>(g.integer(1, 3)), static_cast<std::size_t>(g.integer(1, 3)),
                        static_cast<std::size_t>(g.integer(1, 3)), {}};
        for (std::size_t k = 0; k < m.t * m.h * m.w; ++k) m.data.push_back(g.real(-1, 1));
        o.similarity_map = std::move(m);
      }
      ym.observations.push_back(std::move(o));
    }
    const std::string ytext = to_jsonl(to_manifest(ym));
    auto yback = require_valid(validate_manifest<SyncManifest>(parse_jsonl(ytext)), "rt");
    EXPECT_EQ(yback.observations, ym.observations);
  }
}

TEST(Manifest, AtomicWriteAndLoad) {
  TempDir dir("core");
  const auto p = dir.path() / "bank.jsonl";
  write_text_atomic(p, to_jsonl(bank_doc(2)));
  EXPECT_FALSE(std::filesystem::exists(p.string() + ".tmp"));
  auto bank = load_bank(p);
  EXPECT_EQ(bank.characters.at(0).name, "Po");
  try {
    load_bank(dir.path() / "missing.jsonl");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIo);
    EXPECT_NE(std::string(e.what()).find("missing.jsonl"), std::string::npos);
  }
}

TEST(Core, TrackTimeRange) {
  auto t = make_track("t", 0, 0, 24, 47, {0, 0, 1, 1, 0});
  auto [a, b] = track_time_range(t, 24.0);
  EXPECT_DOUBLE_EQ(a, 1.0);
  EXPECT_DOUBLE_EQ(b, 2.0);
  EXPECT_TRUE(intervals_intersect(1.5, 2.5, a, b));
  EXPECT_FALSE(intervals_intersect(2.0, 2.5, a, b));
}
