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
#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "toonid/audio_recognition.hpp"
#include "toonid/core.hpp"

namespace toonid {

inline constexpr double kDefaultVmRetention = 0.45;
inline constexpr std::size_t kDefaultAdFrames = 8;

// ---------------------------------------------------------------------------
// Subtitles

struct SubtitleEntry {
  std::size_t index = 0;
  double start_s = 0.0;
  double end_s = 0.0;
  std::string speaker;
  std::string text;

  friend bool operator==(const SubtitleEntry&, const SubtitleEntry&) = default;
};

// One cue per segment, sorted by start time (stable), numbered from 1.
inline std::vector<SubtitleEntry> build_subtitles(std::span<const SpeechSegment> segments) {
  std::vector<const SpeechSegment*> order;
  for (const auto& s : segments) {
    if (!(s.start_s < s.end_s))
      throw Error(ErrorCode::kValidation, "segment '" + s.segment_id + "' has start_s >= end_s");
    order.push_back(&s);
  }
  std::stable_sort(order.begin(), order.end(),
                   [](const SpeechSegment* a, const SpeechSegment* b) { return a->start_s < b->start_s; });
  std::vector<SubtitleEntry> out;
  out.reserve(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& s = *order[i];
    out.push_back({i + 1, s.start_s, s.end_s, s.predicted_speaker.value_or(kUnknownSpeaker), s.transcript});
  }
  return out;
}

inline std::string srt_timestamp(double seconds) {
  long long ms = std::llround(std::max(0.0, seconds) * 1000.0);
  const long long h = ms / 3600000;
  ms %= 3600000;
  const long long m = ms / 60000;
  ms %= 60000;
  const long long s = ms / 1000;
  ms %= 1000;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%02lld:%02lld:%02lld,%03lld", h, m, s, ms);
  return buf;
}

// SRT layout with a "[Speaker] " prefix on each cue's text.
inline std::string render_srt(std::span<const SubtitleEntry> entries) {
  std::string out;
  for (const auto& e : entries) {
    out += std::to_string(e.index) + "\n";
    out += srt_timestamp(e.start_s) + " --> " + srt_timestamp(e.end_s) + "\n";
    out += "[" + e.speaker + "] " + e.text + "\n\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// AD prompt packages

struct PaletteColour {
  const char* name;
  std::array<int, 3> rgb;
};

// Overlay palette indexed by colour_id. Ids past the end keep unique ids and
// reuse the palette cyclically for rendering.
inline constexpr std::array<PaletteColour, 10> kOverlayPalette{{
    {"red", {230, 25, 75}},
    {"green", {60, 180, 75}},
    {"blue", {0, 130, 200}},
    {"yellow", {255, 225, 25}},
    {"orange", {245, 130, 48}},
    {"purple", {145, 30, 180}},
    {"cyan", {70, 240, 240}},
    {"magenta", {240, 50, 230}},
    {"lime", {210, 245, 60}},
    {"pink", {250, 190, 212}},
}};

inline std::string colour_name(std::size_t colour_id) {
  std::string n = kOverlayPalette[colour_id % kOverlayPalette.size()].name;
  if (colour_id >= kOverlayPalette.size()) n += "-" + std::to_string(colour_id / kOverlayPalette.size() + 1);
  return n;
}

struct AdInterval {
  std::string interval_id;
  double start_s = 0.0;
  double end_s = 0.0;
};

struct Overlay {
  std::int64_t frame_ref = 0;
  BoundingBox box;
  std::size_t colour_id = 0;

  friend bool operator==(const Overlay&, const Overlay&) = default;
};

struct ADPromptPackage {
  AdInterval interval;
  std::vector<std::int64_t> frame_refs;
  std::vector<Overlay> overlays;
  std::map<std::size_t, std::string> colour_legend;  // colour_id -> character name
  std::string prompt_text;
};

// `frame_count` frames spread uniformly over the frames covered by the
// interval, both endpoints included when frame_count > 1.
inline std::vector<std::int64_t> sample_interval_frames(const AdInterval& interval, double fps, std::size_t frame_count) {
  if (!(interval.start_s < interval.end_s)) throw Error(ErrorCode::kInvalidArgument, "AD interval is empty");
  if (frame_count < 1) throw Error(ErrorCode::kInvalidArgument, "frame count must be >= 1");
  if (!(fps > 0)) throw Error(ErrorCode::kInvalidArgument, "fps must be positive");
  const auto first = static_cast<std::int64_t>(std::floor(interval.start_s * fps + 1e-9));
  const auto last = std::max(first, static_cast<std::int64_t>(std::ceil(interval.end_s * fps - 1e-9)) - 1);
  std::vector<std::int64_t> out;
  const double span = static_cast<double>(last - first);
  for (std::size_t i = 0; i < frame_count; ++i) {
    const double pos = frame_count == 1 ? 0.5 * span : span * static_cast<double>(i) / static_cast<double>(frame_count - 1);
    out.push_back(first + static_cast<std::int64_t>(std::llround(pos)));
  }
  return out;
}

inline std::string ad_prompt_text(const ADPromptPackage& p) {
  if (p.colour_legend.empty()) {
    return "No identified characters are marked in these frames. Describe the visual content of the frames "
           "without naming characters.";
  }
  std::string text = "Each identified character is outlined by a coloured box: ";
  bool first = true;
  for (const auto& [id, name] : p.colour_legend) {
    if (!first) text += "; ";
    text += colour_name(id) + " box = " + name;
    first = false;
  }
  text += ". Describe the visual content of the frames and refer to the outlined characters by name.";
  return text;
}

// Tracks count as retained when assigned with s_vm above the retention gate.
// Colours follow the order in which characters first appear in the overlays
// (frames in order, tracks in input order).
inline ADPromptPackage assemble_ad_prompt(const AdInterval& interval, std::span<const Track> tracks, double fps,
                                          double vm_retention = kDefaultVmRetention,
                                          std::size_t frame_count = kDefaultAdFrames) {
  ADPromptPackage p;
  p.interval = interval;
  p.frame_refs = sample_interval_frames(interval, fps, frame_count);
  std::map<std::string, std::size_t> colour_of;
  for (std::int64_t f : p.frame_refs) {
    for (const auto& t : tracks) {
      if (!t.assigned_character || !(t.s_vm() > vm_retention)) continue;
      const BoundingBox* b = t.box_at(f);
      if (!b) continue;
      auto [it, inserted] = colour_of.try_emplace(*t.assigned_character, colour_of.size());
      if (inserted) p.colour_legend[it->second] = it->first;
      p.overlays.push_back({f, *b, it->second});
    }
  }
  p.prompt_text = ad_prompt_text(p);
  return p;
}

inline nlohmann::json package_to_json(const ADPromptPackage& p) {
  nlohmann::json overlays = nlohmann::json::array(), legend = nlohmann::json::array();
  for (const auto& o : p.overlays) {
    overlays.push_back({{"frame_ref", o.frame_ref},
                        {"box", {{"x1", o.box.x1}, {"y1", o.box.y1}, {"x2", o.box.x2}, {"y2", o.box.y2},
                                 {"frame_index", o.box.frame_index}}},
                        {"colour_id", o.colour_id}});
  }
  for (const auto& [id, name] : p.colour_legend) {
    const auto& c = kOverlayPalette[id % kOverlayPalette.size()];
    legend.push_back({{"colour_id", id}, {"colour", colour_name(id)}, {"rgb", c.rgb}, {"name", name}});
  }
  return {{"record", "ad_prompt"},
          {"interval_id", p.interval.interval_id},
          {"interval", {{"start_s", p.interval.start_s}, {"end_s", p.interval.end_s}}},
          {"frame_refs", p.frame_refs},
          {"overlays", std::move(overlays)},
          {"colour_legend", std::move(legend)},
          {"prompt_text", p.prompt_text}};
}

inline ADPromptPackage package_from_json(const nlohmann::json& j) {
  try {
    ADPromptPackage p;
    p.interval.interval_id = j.value("interval_id", "");
    p.interval.start_s = j.at("interval").at("start_s").get<double>();
    p.interval.end_s = j.at("interval").at("end_s").get<double>();
    p.frame_refs = j.at("frame_refs").get<std::vector<std::int64_t>>();
    for (const auto& o : j.at("overlays")) {
      const auto& b = o.at("box");
      p.overlays.push_back({o.at("frame_ref").get<std::int64_t>(),
                            {b.at("x1").get<double>(), b.at("y1").get<double>(), b.at("x2").get<double>(),
                             b.at("y2").get<double>(), b.at("frame_index").get<std::int64_t>()},
                            o.at("colour_id").get<std::size_t>()});
    }
    for (const auto& l : j.at("colour_legend"))
      p.colour_legend[l.at("colour_id").get<std::size_t>()] = l.at("name").get<std::string>();
    p.prompt_text = j.at("prompt_text").get<std::string>();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("malformed AD prompt package: ") + e.what());
  }
}

}  // namespace toonid
