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

// JSON Lines manifests. Every file starts with a header record
// {"record": "header", "kind": ...} carrying the embedding dimensions; each
// following line is one record.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "toonid/core.hpp"

namespace toonid {

using json = nlohmann::json;

struct ManifestDocument {
  json header;
  std::vector<json> records;
};

struct ValidationIssue {
  std::string path;
  std::string message;
};

template <class T>
struct Validated {
  T value;
  std::vector<ValidationIssue> issues;

  bool ok() const noexcept { return issues.empty(); }
};

struct TrackManifest {
  double fps = 0.0;
  std::size_t visual_dim = 0;
  std::vector<Track> tracks;

  friend bool operator==(const TrackManifest&, const TrackManifest&) = default;
};

struct SegmentManifest {
  std::size_t audio_dim = 0;
  std::vector<SpeechSegment> segments;

  friend bool operator==(const SegmentManifest&, const SegmentManifest&) = default;
};

struct SyncManifest {
  std::vector<SyncObservation> observations;

  friend bool operator==(const SyncManifest&, const SyncManifest&) = default;
};

inline ManifestDocument parse_jsonl(std::string_view text, std::string_view source = "<input>") {
  ManifestDocument doc;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool have_header = false;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) {
      if (nl == text.size()) break;
      continue;
    }
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::kParse, std::string(source) + ":" + std::to_string(line_no) + ": " + e.what(),
                  std::string(source));
    }
    if (!j.is_object()) {
      throw Error(ErrorCode::kParse, std::string(source) + ":" + std::to_string(line_no) + ": record is not an object",
                  std::string(source));
    }
    if (!have_header) {
      if (j.value("record", "") != "header") {
        throw Error(ErrorCode::kParse, std::string(source) + ": first line must be a header record",
                    std::string(source));
      }
      doc.header = std::move(j);
      have_header = true;
    } else {
      doc.records.push_back(std::move(j));
    }
    if (nl == text.size()) break;
  }
  if (!have_header) throw Error(ErrorCode::kParse, std::string(source) + ": missing header record", std::string(source));
  return doc;
}

inline std::string to_jsonl(const ManifestDocument& doc) {
  std::string out = doc.header.dump();
  out += '\n';
  for (const auto& r : doc.records) {
    out += r.dump();
    out += '\n';
  }
  return out;
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string(), path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Writes to a sibling temporary and renames over the target.
inline void write_text_atomic(const std::filesystem::path& path, std::string_view content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + tmp.string(), path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) {
      out.close();
      std::filesystem::remove(tmp);
      throw Error(ErrorCode::kIo, "short write to " + tmp.string(), path.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw Error(ErrorCode::kIo, "cannot rename onto " + path.string() + ": " + ec.message(), path.string());
  }
}

inline ManifestDocument read_manifest(const std::filesystem::path& path) {
  return parse_jsonl(read_text_file(path), path.string());
}

namespace detail {

class Checker {
 public:
  explicit Checker(std::vector<ValidationIssue>& issues) : issues_(issues) {}

  void fail(std::string path, std::string message) { issues_.push_back({std::move(path), std::move(message)}); }

  const json* field(const json& obj, const char* key, const std::string& path, bool required = true) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) {
      if (required) fail(path + "." + key, "missing field");
      return nullptr;
    }
    return &*it;
  }

  std::optional<double> number(const json& obj, const char* key, const std::string& path, bool required = true) {
    const json* f = field(obj, key, path, required);
    if (!f) return std::nullopt;
    if (!f->is_number()) {
      fail(path + "." + key, "expected a number");
      return std::nullopt;
    }
    double v = f->get<double>();
    if (!std::isfinite(v)) {
      fail(path + "." + key, "non-finite number");
      return std::nullopt;
    }
    return v;
  }

  std::optional<std::int64_t> integer(const json& obj, const char* key, const std::string& path,
                                      bool required = true) {
    const json* f = field(obj, key, path, required);
    if (!f) return std::nullopt;
    if (!f->is_number_integer()) {
      fail(path + "." + key, "expected an integer");
      return std::nullopt;
    }
    return f->get<std::int64_t>();
  }

  std::optional<std::string> string(const json& obj, const char* key, const std::string& path,
                                    bool required = true) {
    const json* f = field(obj, key, path, required);
    if (!f) return std::nullopt;
    if (!f->is_string()) {
      fail(path + "." + key, "expected a string");
      return std::nullopt;
    }
    return f->get<std::string>();
  }

  std::optional<EmbeddingVector> embedding(const json& j, const std::string& path, std::size_t expected_dim) {
    if (!j.is_object()) {
      fail(path, "embedding must be an object with 'values'");
      return std::nullopt;
    }
    const json* values = field(j, "values", path);
    if (!values) return std::nullopt;
    if (!values->is_array() || values->empty()) {
      fail(path + ".values", "expected a non-empty array");
      return std::nullopt;
    }
    EmbeddingVector v;
    v.values.reserve(values->size());
    for (const auto& x : *values) {
      if (!x.is_number() || !std::isfinite(x.get<double>())) {
        fail(path + ".values", "entries must be finite numbers");
        return std::nullopt;
      }
      v.values.push_back(x.get<double>());
    }
    if (auto it = j.find("normalized"); it != j.end()) {
      if (!it->is_boolean()) fail(path + ".normalized", "expected a boolean");
      else v.normalized = it->get<bool>();
    }
    if (expected_dim != 0 && v.dim() != expected_dim) {
      fail(path, "dimension " + std::to_string(v.dim()) + " does not match header dimension " +
                     std::to_string(expected_dim));
    }
    if (v.normalized && std::abs(l2_norm(v.view()) - 1.0) > 1e-6) {
      fail(path, "flagged normalized but L2 norm is " + std::to_string(l2_norm(v.view())));
    }
    return v;
  }

  std::optional<BoundingBox> box(const json& j, const std::string& path) {
    if (!j.is_object()) {
      fail(path, "box must be an object");
      return std::nullopt;
    }
    auto x1 = number(j, "x1", path), y1 = number(j, "y1", path), x2 = number(j, "x2", path),
         y2 = number(j, "y2", path);
    auto f = integer(j, "frame_index", path);
    if (!x1 || !y1 || !x2 || !y2 || !f) return std::nullopt;
    BoundingBox b{*x1, *y1, *x2, *y2, *f};
    if (!(b.x1 < b.x2)) fail(path, "x1 must be < x2");
    if (!(b.y1 < b.y2)) fail(path, "y1 must be < y2");
    if (b.frame_index < 0) fail(path, "frame_index must be >= 0");
    return b;
  }

  std::size_t header_dim(const json& header, const char* key) {
    auto d = integer(header, key, "header");
    if (!d) return 0;
    if (*d <= 0) {
      fail(std::string("header.") + key, "dimension must be positive");
      return 0;
    }
    return static_cast<std::size_t>(*d);
  }

  void expect_kind(const json& header, std::string_view kind) {
    auto k = string(header, "kind", "header");
    if (k && *k != kind) fail("header.kind", "expected '" + std::string(kind) + "', got '" + *k + "'");
  }

 private:
  std::vector<ValidationIssue>& issues_;
};

inline std::string rec_path(std::size_t i) { return "records[" + std::to_string(i) + "]"; }

inline json embedding_json(const EmbeddingVector& v) {
  return json{{"values", v.values}, {"normalized", v.normalized}};
}

inline json box_json(const BoundingBox& b) {
  return json{{"x1", b.x1}, {"y1", b.y1}, {"x2", b.x2}, {"y2", b.y2}, {"frame_index", b.frame_index}};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Validation. Each specialization parses what it can and reports every
// invariant violation with its field path; `ok()` is false when any issue was
// found. Unparseable input is rejected earlier, by parse_jsonl.

template <class T>
Validated<T> validate_manifest(const ManifestDocument& doc);

struct BankLimits {
  std::size_t voice_cap = kDefaultVoiceCap;
};

inline Validated<CharacterBank> validate_bank(const ManifestDocument& doc, BankLimits limits = {}) {
  Validated<CharacterBank> out;
  detail::Checker c(out.issues);
  c.expect_kind(doc.header, "bank");
  if (auto id = c.string(doc.header, "movie_id", "header")) out.value.movie_id = *id;
  out.value.visual_dim = c.header_dim(doc.header, "visual_dim");
  out.value.audio_dim = c.header_dim(doc.header, "audio_dim");
  std::set<std::string> names;
  for (std::size_t i = 0; i < doc.records.size(); ++i) {
    const json& r = doc.records[i];
    const std::string p = detail::rec_path(i);
    CharacterEntry e;
    if (auto n = c.string(r, "name", p)) {
      e.name = *n;
      if (e.name.empty()) c.fail(p + ".name", "name must be non-empty");
      if (!names.insert(e.name).second) c.fail(p + ".name", "duplicate character name '" + e.name + "'");
    }
    auto read_list = [&](const char* key, std::size_t dim, std::vector<EmbeddingVector>& dst) {
      const json* arr = c.field(r, key, p);
      if (!arr) return;
      if (!arr->is_array()) {
        c.fail(p + "." + key, "expected an array");
        return;
      }
      for (std::size_t k = 0; k < arr->size(); ++k) {
        if (auto v = c.embedding((*arr)[k], p + "." + key + "[" + std::to_string(k) + "]", dim))
          dst.push_back(std::move(*v));
      }
    };
    read_list("appearance_exemplars", out.value.visual_dim, e.appearance_exemplars);
    read_list("voice_exemplars", out.value.audio_dim, e.voice_exemplars);
    if (e.voice_exemplars.size() > limits.voice_cap) {
      c.fail(p + ".voice_exemplars", "voice exemplar cap exceeded: " + std::to_string(e.voice_exemplars.size()) +
                                         " > " + std::to_string(limits.voice_cap));
    }
    if (const json* pe = c.field(r, "profile_embedding", p)) {
      if (auto v = c.embedding(*pe, p + ".profile_embedding", out.value.visual_dim)) e.profile_embedding = *v;
    }
    out.value.characters.push_back(std::move(e));
  }
  if (out.value.characters.empty()) c.fail("records", "bank must contain at least one character");
  return out;
}

template <>
inline Validated<CharacterBank> validate_manifest<CharacterBank>(const ManifestDocument& doc) {
  return validate_bank(doc);
}

struct TrackRules {
  // Raw seed tracks cover a contiguous frame range; labeled tracks may have
  // frames removed by NMS.
  bool require_contiguous = true;
};

inline Validated<TrackManifest> validate_tracks(const ManifestDocument& doc, TrackRules rules = {}) {
  Validated<TrackManifest> out;
  detail::Checker c(out.issues);
  c.expect_kind(doc.header, "tracks");
  if (auto fps = c.number(doc.header, "fps", "header")) {
    if (*fps <= 0) c.fail("header.fps", "fps must be positive");
    out.value.fps = *fps;
  }
  out.value.visual_dim = c.header_dim(doc.header, "visual_dim");
  std::set<std::string> ids;
  for (std::size_t i = 0; i < doc.records.size(); ++i) {
    const json& r = doc.records[i];
    const std::string p = detail::rec_path(i);
    Track t;
    if (auto id = c.string(r, "track_id", p)) {
      t.track_id = *id;
      if (!ids.insert(t.track_id).second) c.fail(p + ".track_id", "duplicate track id '" + t.track_id + "'");
    }
    if (auto s = c.integer(r, "shot_id", p)) t.shot_id = *s;
    if (auto s = c.integer(r, "seed_index", p, false)) {
      if (*s < 0 || *s > 2) c.fail(p + ".seed_index", "seed_index must be in {0,1,2}");
      t.seed_index = static_cast<int>(*s);
    }
    if (const json* boxes = c.field(r, "boxes", p)) {
      if (!boxes->is_array() || boxes->empty()) {
        c.fail(p + ".boxes", "expected a non-empty array");
      } else {
        for (std::size_t k = 0; k < boxes->size(); ++k) {
          const std::string bp = p + ".boxes[" + std::to_string(k) + "]";
          if (auto b = c.box((*boxes)[k], bp)) {
            if (!t.boxes.empty()) {
              const auto prev = t.boxes.back().frame_index;
              if (b->frame_index <= prev) c.fail(bp, "frame_index must be strictly increasing");
              else if (rules.require_contiguous && b->frame_index != prev + 1)
                c.fail(bp, "track frames must be contiguous");
            }
            t.boxes.push_back(*b);
          }
        }
      }
    }
    if (const json* feats = c.field(r, "sampled_features", p)) {
      if (!feats->is_array() || feats->size() != kSampledFeatureCount) {
        c.fail(p + ".sampled_features", "expected exactly 5 sampled features");
      }
      if (feats->is_array()) {
        for (std::size_t k = 0; k < feats->size(); ++k) {
          if (auto v = c.embedding((*feats)[k], p + ".sampled_features[" + std::to_string(k) + "]",
                                   out.value.visual_dim))
            t.sampled_features.push_back(std::move(*v));
        }
      }
    }
    if (const json* ff = c.field(r, "frame_features", p, false)) {
      if (!ff->is_array()) {
        c.fail(p + ".frame_features", "expected an array");
      } else {
        for (std::size_t k = 0; k < ff->size(); ++k) {
          const std::string fp = p + ".frame_features[" + std::to_string(k) + "]";
          auto f = c.integer((*ff)[k], "frame_index", fp);
          const json* e = c.field((*ff)[k], "embedding", fp);
          if (!f || !e) continue;
          if (auto v = c.embedding(*e, fp + ".embedding", out.value.visual_dim)) t.frame_features[*f] = *v;
        }
      }
    }
    if (const json* sc = c.field(r, "scores", p, false)) {
      if (!sc->is_object()) {
        c.fail(p + ".scores", "expected an object");
      } else {
        for (auto it = sc->begin(); it != sc->end(); ++it) {
          if (!it->is_number() || !std::isfinite(it->get<double>())) c.fail(p + ".scores." + it.key(), "expected a number");
          else t.scores[it.key()] = it->get<double>();
        }
      }
    }
    if (auto a = c.string(r, "assigned_character", p, false)) {
      t.assigned_character = *a;
      auto it = t.scores.find(*a);
      if (it == t.scores.end()) {
        c.fail(p + ".assigned_character", "assigned character has no score");
      } else {
        for (const auto& [name, s] : t.scores)
          if (s > it->second) {
            c.fail(p + ".assigned_character", "assigned character is not the argmax of scores");
            break;
          }
      }
    }
    out.value.tracks.push_back(std::move(t));
  }
  return out;
}

template <>
inline Validated<TrackManifest> validate_manifest<TrackManifest>(const ManifestDocument& doc) {
  return validate_tracks(doc);
}

inline std::string_view to_string(LabelSource s) { return s == LabelSource::kVisual ? "visual" : "audio"; }

template <>
inline Validated<SegmentManifest> validate_manifest<SegmentManifest>(const ManifestDocument& doc) {
  Validated<SegmentManifest> out;
  detail::Checker c(out.issues);
  c.expect_kind(doc.header, "segments");
  out.value.audio_dim = c.header_dim(doc.header, "audio_dim");
  std::set<std::string> ids;
  for (std::size_t i = 0; i < doc.records.size(); ++i) {
    const json& r = doc.records[i];
    const std::string p = detail::rec_path(i);
    SpeechSegment s;
    if (auto id = c.string(r, "segment_id", p)) {
      s.segment_id = *id;
      if (!ids.insert(s.segment_id).second) c.fail(p + ".segment_id", "duplicate segment id '" + s.segment_id + "'");
    }
    auto st = c.number(r, "start_s", p), en = c.number(r, "end_s", p);
    if (st && en) {
      s.start_s = *st;
      s.end_s = *en;
      if (!(s.start_s < s.end_s)) c.fail(p, "start_s must be < end_s");
    }
    if (auto t = c.string(r, "transcript", p, false)) s.transcript = *t;
    if (const json* e = c.field(r, "embedding", p)) {
      if (auto v = c.embedding(*e, p + ".embedding", out.value.audio_dim)) s.embedding = *v;
    }
    if (auto cid = c.integer(r, "cluster_id", p)) s.cluster_id = *cid;
    if (auto ps = c.string(r, "predicted_speaker", p, false)) s.predicted_speaker = *ps;
    if (auto ca = c.number(r, "audio_confidence", p, false)) {
      if (*ca < 0.0 || *ca > 1.0) c.fail(p + ".audio_confidence", "audio_confidence must be in [0,1]");
      s.audio_confidence = *ca;
    }
    if (auto cv = c.number(r, "visual_confidence", p, false)) s.visual_confidence = *cv;
    if (auto ls = c.string(r, "label_source", p, false)) {
      if (*ls == "visual") s.label_source = LabelSource::kVisual;
      else if (*ls != "audio") c.fail(p + ".label_source", "label_source must be 'audio' or 'visual'");
    }
    out.value.segments.push_back(std::move(s));
  }
  return out;
}

template <>
inline Validated<SyncManifest> validate_manifest<SyncManifest>(const ManifestDocument& doc) {
  Validated<SyncManifest> out;
  detail::Checker c(out.issues);
  c.expect_kind(doc.header, "sync");
  for (std::size_t i = 0; i < doc.records.size(); ++i) {
    const json& r = doc.records[i];
    const std::string p = detail::rec_path(i);
    SyncObservation o;
    if (auto t = c.string(r, "track_ref", p)) o.track_ref = *t;
    if (auto s = c.string(r, "segment_ref", p)) o.segment_ref = *s;
    o.sync_score = c.number(r, "sync_score", p, false);
    if (const json* m = c.field(r, "similarity_map", p, false)) {
      SimilarityMap grid;
      bool good = m->is_array() && !m->empty();
      if (good) {
        grid.t = m->size();
        for (const auto& frame : *m) {
          if (!frame.is_array() || frame.empty()) { good = false; break; }
          if (grid.h == 0) grid.h = frame.size();
          if (frame.size() != grid.h) { good = false; break; }
          for (const auto& row : frame) {
            if (!row.is_array() || row.empty()) { good = false; break; }
            if (grid.w == 0) grid.w = row.size();
            if (row.size() != grid.w) { good = false; break; }
            for (const auto& x : row) {
              if (!x.is_number() || !std::isfinite(x.get<double>())) { good = false; break; }
              grid.data.push_back(x.get<double>());
            }
          }
          if (!good) break;
        }
      }
      if (!good) c.fail(p + ".similarity_map", "expected a non-empty t x h x w array of finite numbers");
      else o.similarity_map = std::move(grid);
    }
    const bool has_score = r.contains("sync_score") && !r["sync_score"].is_null();
    const bool has_map = r.contains("similarity_map") && !r["similarity_map"].is_null();
    if (has_score == has_map) c.fail(p, "exactly one of sync_score / similarity_map must be present");
    out.value.observations.push_back(std::move(o));
  }
  return out;
}

// Throws a validation error that lists every issue.
template <class T>
T require_valid(Validated<T> v, std::string_view source) {
  if (!v.ok()) {
    std::string msg = std::string(source) + ": " + std::to_string(v.issues.size()) + " validation issue(s)";
    for (const auto& i : v.issues) msg += "\n  " + i.path + ": " + i.message;
    throw Error(ErrorCode::kValidation, msg, std::string(source));
  }
  return std::move(v.value);
}

// ---------------------------------------------------------------------------
// Serialization.

inline ManifestDocument to_manifest(const CharacterBank& bank) {
  ManifestDocument doc;
  doc.header = json{{"record", "header"}, {"kind", "bank"}, {"movie_id", bank.movie_id},
                    {"visual_dim", bank.visual_dim}, {"audio_dim", bank.audio_dim}};
  for (const auto& c : bank.characters) {
    json app = json::array(), voice = json::array();
    for (const auto& v : c.appearance_exemplars) app.push_back(detail::embedding_json(v));
    for (const auto& v : c.voice_exemplars) voice.push_back(detail::embedding_json(v));
    doc.records.push_back(json{{"record", "character"},
                               {"name", c.name},
                               {"appearance_exemplars", std::move(app)},
                               {"voice_exemplars", std::move(voice)},
                               {"profile_embedding", detail::embedding_json(c.profile_embedding)}});
  }
  return doc;
}

inline json track_json(const Track& t) {
  json boxes = json::array(), feats = json::array();
  for (const auto& b : t.boxes) boxes.push_back(detail::box_json(b));
  for (const auto& f : t.sampled_features) feats.push_back(detail::embedding_json(f));
  json r{{"record", "track"}, {"track_id", t.track_id}, {"shot_id", t.shot_id}, {"seed_index", t.seed_index},
         {"boxes", std::move(boxes)}, {"sampled_features", std::move(feats)}};
  if (!t.frame_features.empty()) {
    json ff = json::array();
    for (const auto& [f, e] : t.frame_features) ff.push_back(json{{"frame_index", f}, {"embedding", detail::embedding_json(e)}});
    r["frame_features"] = std::move(ff);
  }
  if (!t.scores.empty()) r["scores"] = t.scores;
  if (t.assigned_character) r["assigned_character"] = *t.assigned_character;
  return r;
}

inline ManifestDocument to_manifest(const TrackManifest& m) {
  ManifestDocument doc;
  doc.header = json{{"record", "header"}, {"kind", "tracks"}, {"fps", m.fps}, {"visual_dim", m.visual_dim}};
  for (const auto& t : m.tracks) doc.records.push_back(track_json(t));
  return doc;
}

inline json segment_json(const SpeechSegment& s) {
  json r{{"record", "segment"},
         {"segment_id", s.segment_id},
         {"start_s", s.start_s},
         {"end_s", s.end_s},
         {"transcript", s.transcript},
         {"embedding", detail::embedding_json(s.embedding)},
         {"cluster_id", s.cluster_id},
         {"audio_confidence", s.audio_confidence},
         {"label_source", std::string(to_string(s.label_source))}};
  if (s.predicted_speaker) r["predicted_speaker"] = *s.predicted_speaker;
  if (s.visual_confidence) r["visual_confidence"] = *s.visual_confidence;
  return r;
}

inline ManifestDocument to_manifest(const SegmentManifest& m) {
  ManifestDocument doc;
  doc.header = json{{"record", "header"}, {"kind", "segments"}, {"audio_dim", m.audio_dim}};
  for (const auto& s : m.segments) doc.records.push_back(segment_json(s));
  return doc;
}

inline ManifestDocument to_manifest(const SyncManifest& m) {
  ManifestDocument doc;
  doc.header = json{{"record", "header"}, {"kind", "sync"}};
  for (const auto& o : m.observations) {
    json r{{"record", "sync"}, {"track_ref", o.track_ref}, {"segment_ref", o.segment_ref}};
    if (o.sync_score) r["sync_score"] = *o.sync_score;
    if (o.similarity_map) {
      const auto& g = *o.similarity_map;
      json grid = json::array();
      for (std::size_t t = 0; t < g.t; ++t) {
        json frame = json::array();
        for (std::size_t h = 0; h < g.h; ++h) {
          json row = json::array();
          for (std::size_t w = 0; w < g.w; ++w) row.push_back(g.at(t, h, w));
          frame.push_back(std::move(row));
        }
        grid.push_back(std::move(frame));
      }
      r["similarity_map"] = std::move(grid);
    }
    doc.records.push_back(std::move(r));
  }
  return doc;
}

template <class T>
T load_manifest(const std::filesystem::path& path) {
  return require_valid(validate_manifest<T>(read_manifest(path)), path.string());
}

inline CharacterBank load_bank(const std::filesystem::path& path, BankLimits limits = {}) {
  return require_valid(validate_bank(read_manifest(path), limits), path.string());
}

inline TrackManifest load_tracks(const std::filesystem::path& path, TrackRules rules = {}) {
  return require_valid(validate_tracks(read_manifest(path), rules), path.string());
}

}  // namespace toonid
