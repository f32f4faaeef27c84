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
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "toonid/audio_recognition.hpp"
#include "toonid/core.hpp"
#include "toonid/visual_recognition.hpp"

namespace toonid {

// Average precision is uninterpolated throughout: the mean, over relevant
// items, of precision at the rank where each is retrieved.

// ---------------------------------------------------------------------------
// Character-name AP

struct NamePrediction {
  std::string name;
  double score = 0.0;
};

inline double name_list_ap(std::span<const NamePrediction> predictions, const std::set<std::string>& gt_names) {
  if (gt_names.empty()) throw Error(ErrorCode::kEmptyInput, "ground-truth name list is empty");
  std::map<std::string, double> best;
  for (const auto& p : predictions) {
    if (!std::isfinite(p.score)) throw Error(ErrorCode::kNonFinite, "name prediction score is not finite");
    auto [it, inserted] = best.try_emplace(p.name, p.score);
    if (!inserted) it->second = std::max(it->second, p.score);
  }
  std::vector<std::pair<std::string, double>> ranked(best.begin(), best.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < ranked.size(); ++r) {
    if (!gt_names.contains(ranked[r].first)) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(r + 1);
  }
  return sum / static_cast<double>(gt_names.size());
}

// Max s_vm per assigned name over the tracks of the given shots.
inline std::vector<NamePrediction> names_from_tracks(std::span<const Track> tracks, const std::set<std::int64_t>& shots) {
  std::map<std::string, double> best;
  for (const auto& t : tracks) {
    if (!t.assigned_character || !shots.contains(t.shot_id)) continue;
    auto [it, inserted] = best.try_emplace(*t.assigned_character, t.s_vm());
    if (!inserted) it->second = std::max(it->second, t.s_vm());
  }
  std::vector<NamePrediction> out;
  for (const auto& [n, s] : best) out.push_back({n, s});
  return out;
}

// ---------------------------------------------------------------------------
// Detection mAP over an IoU sweep

struct ScoredBox {
  BoundingBox box;  // box.frame_index locates the frame
  std::string name;
  double score = 0.0;
};

struct GtBox {
  BoundingBox box;
  std::string name;
};

// 0.50, 0.55, ..., 0.95
inline std::vector<double> default_iou_sweep() {
  std::vector<double> t;
  for (int i = 0; i < 10; ++i) t.push_back(static_cast<double>(50 + 5 * i) / 100.0);
  return t;
}

struct DetectionMapResult {
  std::vector<double> thresholds;
  std::vector<double> per_threshold_ap;  // class-averaged AP at each threshold
  double mean_ap = 0.0;
  std::vector<std::string> classes;      // classes with at least one GT box
};

// AP of one class at one IoU threshold. Predictions are visited by descending
// score (ties in input order); each takes the unmatched GT box of its frame with
// the highest IoU, provided that IoU reaches the threshold.
inline double class_ap(std::span<const ScoredBox* const> preds, std::span<const GtBox* const> gts, double threshold) {
  if (gts.empty()) return 0.0;
  std::vector<const ScoredBox*> order(preds.begin(), preds.end());
  std::stable_sort(order.begin(), order.end(), [](const ScoredBox* a, const ScoredBox* b) { return a->score > b->score; });
  std::vector<bool> matched(gts.size(), false);
  double sum = 0.0;
  std::size_t tp = 0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    const ScoredBox& p = *order[r];
    double best_iou = -1.0;
    std::size_t best = gts.size();
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (matched[g] || gts[g]->box.frame_index != p.box.frame_index) continue;
      const double iou = box_iou(p.box, gts[g]->box);
      if (iou > best_iou) {
        best_iou = iou;
        best = g;
      }
    }
    if (best < gts.size() && best_iou >= threshold) {
      matched[best] = true;
      ++tp;
      sum += static_cast<double>(tp) / static_cast<double>(r + 1);
    }
  }
  return sum / static_cast<double>(gts.size());
}

inline DetectionMapResult detection_map(std::span<const ScoredBox> preds, std::span<const GtBox> gt,
                                        std::vector<double> thresholds = default_iou_sweep()) {
  if (thresholds.empty()) throw Error(ErrorCode::kInvalidArgument, "IoU threshold list is empty");
  for (std::size_t i = 1; i < thresholds.size(); ++i)
    if (!(thresholds[i] > thresholds[i - 1]))
      throw Error(ErrorCode::kInvalidArgument, "IoU thresholds must be strictly increasing");
  std::map<std::string, std::pair<std::vector<const ScoredBox*>, std::vector<const GtBox*>>> by_class;
  for (const auto& g : gt) by_class[g.name].second.push_back(&g);
  for (const auto& p : preds) {
    if (!std::isfinite(p.score)) throw Error(ErrorCode::kNonFinite, "detection score is not finite");
    auto it = by_class.find(p.name);
    if (it != by_class.end()) it->second.first.push_back(&p);
  }
  DetectionMapResult out;
  out.thresholds = thresholds;
  for (const auto& [name, _] : by_class) out.classes.push_back(name);
  for (double th : thresholds) {
    double s = 0.0;
    for (const auto& [name, pg] : by_class) s += class_ap(pg.first, pg.second, th);
    out.per_threshold_ap.push_back(by_class.empty() ? 0.0 : s / static_cast<double>(by_class.size()));
  }
  double m = 0.0;
  for (double a : out.per_threshold_ap) m += a;
  out.mean_ap = m / static_cast<double>(out.per_threshold_ap.size());
  return out;
}

inline std::vector<ScoredBox> boxes_from_tracks(std::span<const Track> tracks) {
  std::vector<ScoredBox> out;
  for (const auto& t : tracks) {
    if (!t.assigned_character) continue;
    for (const auto& b : t.boxes) out.push_back({b, *t.assigned_character, t.s_vm()});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sentence-level speaker AP

struct SpeakerPrediction {
  std::string segment_id;
  std::optional<std::string> speaker;
  double confidence = 0.0;
};

// Predictions ranked by confidence (ties in input order); a prediction is
// relevant iff it names the segment's ground-truth speaker. AP is averaged over
// the relevant predictions, so a ranking with no correct label scores 0.
inline double speaker_sentence_ap(std::span<const SpeakerPrediction> preds,
                                  const std::map<std::string, std::string>& gt) {
  std::set<std::string> seen;
  for (const auto& p : preds) {
    if (!gt.contains(p.segment_id))
      throw Error(ErrorCode::kValidation, "prediction for segment '" + p.segment_id + "' has no ground truth");
    if (!seen.insert(p.segment_id).second)
      throw Error(ErrorCode::kValidation, "duplicate prediction for segment '" + p.segment_id + "'");
  }
  for (const auto& [id, _] : gt)
    if (!seen.contains(id)) throw Error(ErrorCode::kValidation, "ground-truth segment '" + id + "' has no prediction");
  std::vector<const SpeakerPrediction*> order;
  for (const auto& p : preds) order.push_back(&p);
  std::stable_sort(order.begin(), order.end(), [](const SpeakerPrediction* a, const SpeakerPrediction* b) {
    return a->confidence > b->confidence;
  });
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    const auto& p = *order[r];
    if (!p.speaker || *p.speaker != gt.at(p.segment_id)) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(r + 1);
  }
  return hits == 0 ? 0.0 : sum / static_cast<double>(hits);
}

// Confidence of the path that produced the label.
inline std::vector<SpeakerPrediction> speaker_predictions(std::span<const SpeechSegment> segments) {
  std::vector<SpeakerPrediction> out;
  for (const auto& s : segments) {
    const double conf = s.label_source == LabelSource::kVisual && s.visual_confidence ? *s.visual_confidence
                                                                                        : s.audio_confidence;
    out.push_back({s.segment_id, s.predicted_speaker, conf});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Diarisation error rate

struct SpeakerTurn {
  double start_s = 0.0;
  double end_s = 0.0;
  std::string speaker;
  bool singing = false;
};

struct DerBreakdown {
  double missed = 0.0;
  double false_alarm = 0.0;
  double confusion = 0.0;
  double reference = 0.0;  // scored reference speech time (speaker-weighted)
  double der = 0.0;
};

// Speaker labels are compared by identity (no optimal mapping). Per elementary
// time span with R reference and S system speakers of which C agree:
// missed += max(0, R-S), false alarm += max(0, S-R), confusion += min(R,S) - C,
// reference += R. Spans within +-collar of a reference boundary are not
// scored; without include_overlap neither are spans where R >= 2.
inline DerBreakdown der(std::span<const SpeakerTurn> pred, std::span<const SpeakerTurn> gt, bool include_overlap = true,
                        double collar_s = 0.0) {
  if (!(collar_s >= 0)) throw Error(ErrorCode::kInvalidArgument, "collar must be >= 0");
  enum Kind { kRef, kSys, kCollar };
  struct Event {
    double t;
    Kind kind;
    int delta;
    const std::string* speaker;
  };
  std::vector<Event> events;
  auto add_turns = [&](std::span<const SpeakerTurn> turns, Kind kind) {
    for (const auto& tr : turns) {
      if (!(tr.start_s < tr.end_s)) throw Error(ErrorCode::kValidation, "speaker turn with start_s >= end_s");
      events.push_back({tr.start_s, kind, +1, &tr.speaker});
      events.push_back({tr.end_s, kind, -1, &tr.speaker});
    }
  };
  add_turns(gt, kRef);
  add_turns(pred, kSys);
  if (collar_s > 0) {
    for (const auto& tr : gt)
      for (double b : {tr.start_s, tr.end_s}) {
        events.push_back({b - collar_s, kCollar, +1, nullptr});
        events.push_back({b + collar_s, kCollar, -1, nullptr});
      }
  }
  std::stable_sort(events.begin(), events.end(), [](const Event& a, const Event& b) { return a.t < b.t; });

  std::map<std::string, int> ref_active, sys_active;
  int collar_depth = 0;
  DerBreakdown out;
  for (std::size_t i = 0; i < events.size();) {
    const double t = events[i].t;
    for (; i < events.size() && events[i].t == t; ++i) {
      const Event& e = events[i];
      if (e.kind == kCollar) collar_depth += e.delta;
      else {
        auto& m = e.kind == kRef ? ref_active : sys_active;
        if ((m[*e.speaker] += e.delta) == 0) m.erase(*e.speaker);
      }
    }
    if (i == events.size()) break;
    const double dt = events[i].t - t;
    if (dt <= 0 || collar_depth > 0) continue;
    const double R = static_cast<double>(ref_active.size());
    const double S = static_cast<double>(sys_active.size());
    if (!include_overlap && ref_active.size() >= 2) continue;
    double agree = 0.0;
    for (const auto& [spk, _] : ref_active) agree += sys_active.contains(spk) ? 1.0 : 0.0;
    out.reference += R * dt;
    out.missed += std::max(0.0, R - S) * dt;
    out.false_alarm += std::max(0.0, S - R) * dt;
    out.confusion += (std::min(R, S) - agree) * dt;
  }
  if (!(out.reference > 0)) throw Error(ErrorCode::kEmptyInput, "no scored reference speech");
  out.der = (out.missed + out.false_alarm + out.confusion) / out.reference;
  return out;
}

// Closed-set preprocessing: drops reference turns whose speaker is not in the
// roster and, optionally, singing turns.
inline std::vector<SpeakerTurn> closed_set_filter(std::span<const SpeakerTurn> gt, const std::set<std::string>& roster,
                                                  bool drop_singing) {
  std::vector<SpeakerTurn> out;
  for (const auto& t : gt) {
    if (!roster.contains(t.speaker)) continue;
    if (drop_singing && t.singing) continue;
    out.push_back(t);
  }
  return out;
}

// Segments without a named speaker make no claim and are left out.
inline std::vector<SpeakerTurn> timeline_from_segments(std::span<const SpeechSegment> segments) {
  std::vector<SpeakerTurn> out;
  for (const auto& s : segments)
    if (s.predicted_speaker && *s.predicted_speaker != kUnknownSpeaker)
      out.push_back({s.start_s, s.end_s, *s.predicted_speaker, false});
  return out;
}

}  // namespace toonid
