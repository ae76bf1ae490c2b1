// Copyright 2026 The vidpriv Authors
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

// Per-frame privacy annotation files.
//
// One JSON object per line:
//
//   {"video_id": "brush_hair_01", "action": "brush_hair", "num_frames": 40,
//    "attributes": [{"attribute": "face", "value": 2, "start_frame": 0, "end_frame": 9}, ...]}
//
// Ranges are inclusive. Ranges of one attribute may not overlap. A frame covered
// by no range is a frame without a person; attributes missing from a covered
// frame read as 0. "num_frames" is optional and defaults to the last covered
// frame + 1.

#ifndef VIDPRIV_ANNOTATIONS_HPP_
#define VIDPRIV_ANNOTATIONS_HPP_

#include <algorithm>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "vidpriv/common.hpp"
#include "vidpriv/data.hpp"

namespace vidpriv {

struct AttributeRange {
  Attribute attribute;
  int value = 0;
  int start_frame = 0;
  int end_frame = 0;  // inclusive
};

struct VideoAnnotation {
  std::string video_id;
  std::string action;
  std::vector<AttributeRange> ranges;
  std::vector<PrivacyAttributeFrameLabel> frames;
};

namespace detail {

inline VideoAnnotation parse_annotation_record(const nlohmann::json& j, std::size_t record) {
  auto fail = [&](const std::string& what) {
    throw SchemaError(concat("annotation record ", record, ": ", what));
  };
  if (!j.is_object()) fail("not an object");
  for (const char* key : {"video_id", "action", "attributes"})
    if (!j.contains(key)) fail(concat("missing field '", key, "'"));
  if (!j["video_id"].is_string() || !j["action"].is_string()) fail("video_id/action must be strings");
  if (!j["attributes"].is_array()) fail("attributes must be a list");

  VideoAnnotation v;
  v.video_id = j["video_id"].get<std::string>();
  v.action = j["action"].get<std::string>();
  int last = -1;
  for (std::size_t k = 0; k < j["attributes"].size(); ++k) {
    const auto& e = j["attributes"][k];
    const std::string where = concat("attribute entry ", k);
    if (!e.is_object()) fail(where + " is not an object");
    for (const char* key : {"attribute", "value", "start_frame", "end_frame"})
      if (!e.contains(key)) fail(concat(where, " missing '", key, "'"));
    if (!e["attribute"].is_string()) fail(where + ": attribute must be a string");
    for (const char* key : {"value", "start_frame", "end_frame"})
      if (!e[key].is_number_integer()) fail(concat(where, ": '", key, "' must be an integer"));
    auto attr = attribute_from_name(e["attribute"].get<std::string>());
    if (!attr) fail(concat(where, ": unknown attribute '", e["attribute"].get<std::string>(), "'"));
    AttributeRange r{*attr, e["value"].get<int>(), e["start_frame"].get<int>(),
                     e["end_frame"].get<int>()};
    const int card = kAttributeCardinality[static_cast<int>(r.attribute)];
    if (r.value < 0 || r.value >= card)
      fail(concat(where, ": ", kAttributeNames[static_cast<int>(r.attribute)], " value ", r.value,
                  " outside 0..", card - 1));
    if (r.start_frame < 0 || r.end_frame < r.start_frame)
      fail(concat(where, ": bad frame range [", r.start_frame, ",", r.end_frame, "]"));
    for (const auto& o : v.ranges) {
      if (o.attribute == r.attribute && r.start_frame <= o.end_frame && o.start_frame <= r.end_frame)
        fail(concat(where, ": ", kAttributeNames[static_cast<int>(r.attribute)], " range [",
                    r.start_frame, ",", r.end_frame, "] overlaps [", o.start_frame, ",",
                    o.end_frame, "]"));
    }
    last = std::max(last, r.end_frame);
    v.ranges.push_back(r);
  }
  int n = last + 1;
  if (j.contains("num_frames")) {
    if (!j["num_frames"].is_number_integer()) fail("num_frames must be an integer");
    n = j["num_frames"].get<int>();
    if (n <= last) fail(concat("num_frames ", n, " does not cover frame ", last));
  }
  if (n <= 0) fail("record has no frames");
  std::vector<bool> covered(n, false);
  v.frames.assign(n, PrivacyAttributeFrameLabel{});
  for (const auto& r : v.ranges) {
    for (int f = r.start_frame; f <= r.end_frame; ++f) {
      v.frames[f].set(r.attribute, r.value);
      covered[f] = true;
    }
  }
  for (int f = 0; f < n; ++f) v.frames[f].present = covered[f];
  return v;
}

}  // namespace detail

inline std::vector<VideoAnnotation> parse_privacy_annotations(std::istream& in) {
  std::vector<VideoAnnotation> out;
  std::string line;
  std::size_t record = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw SchemaError(detail::concat("annotation record ", record, ": ", e.what()));
    }
    out.push_back(detail::parse_annotation_record(j, record));
    ++record;
  }
  return out;
}

inline std::vector<VideoAnnotation> load_privacy_annotations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open annotation file " + path);
  return parse_privacy_annotations(in);
}

inline std::string to_json_line(const VideoAnnotation& v) {
  nlohmann::json j;
  j["video_id"] = v.video_id;
  j["action"] = v.action;
  j["num_frames"] = v.frames.size();
  j["attributes"] = nlohmann::json::array();
  for (const auto& r : v.ranges) {
    j["attributes"].push_back({{"attribute", kAttributeNames[static_cast<int>(r.attribute)]},
                               {"value", r.value},
                               {"start_frame", r.start_frame},
                               {"end_frame", r.end_frame}});
  }
  return j.dump();
}

inline std::vector<LabeledFrames<std::string>> as_labeled_frames(
    const std::vector<VideoAnnotation>& videos) {
  std::vector<LabeledFrames<std::string>> out;
  out.reserve(videos.size());
  for (const auto& v : videos) out.push_back({v.action, v.frames});
  return out;
}

inline std::map<std::string, std::size_t> action_distribution(
    const std::vector<VideoAnnotation>& videos) {
  std::vector<std::string> actions;
  for (const auto& v : videos) actions.push_back(v.action);
  return action_distribution<std::string>(actions);
}

inline ActionAttributeCorrelation<std::string> action_attribute_correlation(
    const std::vector<VideoAnnotation>& videos) {
  auto lf = as_labeled_frames(videos);
  return action_attribute_correlation<std::string>(
      std::span<const LabeledFrames<std::string>>(lf));
}

}  // namespace vidpriv

#endif  // VIDPRIV_ANNOTATIONS_HPP_
