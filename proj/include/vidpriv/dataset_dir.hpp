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

// On-disk dataset directories.
//
//   <root>/labels.csv          header "id,target,budget"; budget is a class id,
//                              or "-" when annotations.jsonl supplies attributes
//   <root>/clips/<id>.clip     "VPCL", u32 T W H C, then T*W*H*C float32 values,
//                              channel-major (c, t, y, x), little-endian
//   <root>/masks/<id>.face     optional "VPMK", u32 T W H, then T*H*W bytes (0/1)
//   <root>/masks/<id>.body     optional, same format
//   <root>/annotations.jsonl   optional per-frame attribute records keyed by id
//
// Loading checks shapes and value ranges only; there is no decoding of real video.

#ifndef VIDPRIV_DATASET_DIR_HPP_
#define VIDPRIV_DATASET_DIR_HPP_

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "vidpriv/annotations.hpp"
#include "vidpriv/common.hpp"
#include "vidpriv/data.hpp"
#include "vidpriv/io.hpp"

namespace vidpriv {

namespace detail {

inline std::string encode_clip(const ClipTensor& c) {
  ByteWriter w;
  w.put_raw("VPCL");
  for (int d : {c.frames(), c.width(), c.height(), c.channels()}) w.put(static_cast<std::uint32_t>(d));
  for (float v : c.values()) w.put(std::bit_cast<std::uint32_t>(v));
  return w.bytes();
}

inline ClipTensor decode_clip(std::string bytes, const std::string& what) {
  ByteReader r(std::move(bytes), what);
  if (r.get_raw(4) != "VPCL") throw SchemaError(what + ": not a clip file");
  const int t = static_cast<int>(r.get<std::uint32_t>()), w = static_cast<int>(r.get<std::uint32_t>());
  const int h = static_cast<int>(r.get<std::uint32_t>()), c = static_cast<int>(r.get<std::uint32_t>());
  if (t < 1 || w < 1 || h < 1 || (c != 1 && c != 3)) throw SchemaError(what + ": bad clip shape");
  std::vector<float> v(static_cast<std::size_t>(t) * w * h * c);
  for (auto& x : v) x = std::bit_cast<float>(r.get<std::uint32_t>());
  if (!r.done()) throw SchemaError(what + ": trailing bytes");
  try {
    return ClipTensor(t, w, h, c, std::move(v));
  } catch (const ArgumentError& e) {
    throw SchemaError(what + ": " + e.what());
  }
}

inline std::string encode_mask(const FrameMask& m) {
  ByteWriter w;
  w.put_raw("VPMK");
  for (int d : {m.frames(), m.width(), m.height()}) w.put(static_cast<std::uint32_t>(d));
  for (int t = 0; t < m.frames(); ++t)
    for (int y = 0; y < m.height(); ++y)
      for (int x = 0; x < m.width(); ++x) w.put(static_cast<std::uint8_t>(m.at(t, x, y)));
  return w.bytes();
}

inline FrameMask decode_mask(std::string bytes, const std::string& what) {
  ByteReader r(std::move(bytes), what);
  if (r.get_raw(4) != "VPMK") throw SchemaError(what + ": not a mask file");
  const int t = static_cast<int>(r.get<std::uint32_t>()), w = static_cast<int>(r.get<std::uint32_t>());
  const int h = static_cast<int>(r.get<std::uint32_t>());
  if (t < 1 || w < 1 || h < 1) throw SchemaError(what + ": bad mask shape");
  FrameMask m(t, w, h);
  for (int f = 0; f < t; ++f)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const auto b = r.get<std::uint8_t>();
        if (b > 1) throw SchemaError(what + ": mask values must be 0 or 1");
        m.set(f, x, y, b != 0);
      }
  if (!r.done()) throw SchemaError(what + ": trailing bytes");
  return m;
}

inline int parse_label(const std::string& s, std::size_t line, const char* col) {
  int v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || v < 0)
    throw SchemaError(concat("labels.csv line ", line, ": bad ", col, " '", s, "'"));
  return v;
}

}  // namespace detail

/// Writes a dataset in the directory layout above. Attribute-mode datasets
/// get an annotations.jsonl with one record per clip.
inline void save_dataset_dir(const Dataset& d, const std::filesystem::path& root) {
  validate(d);
  namespace fs = std::filesystem;
  fs::create_directories(root / "clips");
  if (!d.masks.empty()) fs::create_directories(root / "masks");
  std::ofstream labels(root / "labels.csv");
  if (!labels) throw IoError("cannot write " + (root / "labels.csv").string());
  labels << "id,target,budget\n";
  std::ofstream ann;
  if (d.budget_mode == BudgetMode::kMultiAttribute) ann.open(root / "annotations.jsonl");
  for (std::size_t i = 0; i < d.size(); ++i) {
    const std::string id = detail::concat("clip", i);
    const auto& c = d.clips[i];
    labels << id << ',' << c.target_label << ',';
    if (d.budget_mode == BudgetMode::kSingleClass) {
      labels << budget_class(c) << '\n';
    } else {
      labels << "-\n";
      VideoAnnotation v{id, std::to_string(c.target_label), {}, {}};
      const auto& frames = std::get<std::vector<PrivacyAttributeFrameLabel>>(c.budget_label);
      for (int a = 0; a < kNumAttributes; ++a)
        for (int f = 0; f < static_cast<int>(frames.size()); ++f)
          if (frames[f].present) v.ranges.push_back({static_cast<Attribute>(a), frames[f].get(static_cast<Attribute>(a)), f, f});
      v.frames = frames;
      nlohmann::json j = nlohmann::json::parse(to_json_line(v));
      j["num_frames"] = frames.size();
      ann << j.dump() << '\n';
    }
    detail::write_file(root / "clips" / (id + ".clip"), detail::encode_clip(c.clip));
    if (!d.masks.empty()) {
      if (d.masks[i].face) detail::write_file(root / "masks" / (id + ".face"), detail::encode_mask(*d.masks[i].face));
      if (d.masks[i].body) detail::write_file(root / "masks" / (id + ".body"), detail::encode_mask(*d.masks[i].body));
    }
  }
}

/// Loads a dataset directory. Class counts are the largest label + 1.
inline Dataset load_dataset_dir(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  std::ifstream labels(root / "labels.csv");
  if (!labels) throw IoError("cannot open " + (root / "labels.csv").string());
  std::map<std::string, VideoAnnotation> ann;
  const bool attributes = fs::exists(root / "annotations.jsonl");
  if (attributes)
    for (auto& v : load_privacy_annotations((root / "annotations.jsonl").string())) ann[v.video_id] = std::move(v);

  Dataset d;
  d.budget_mode = attributes ? BudgetMode::kMultiAttribute : BudgetMode::kSingleClass;
  std::string line;
  std::size_t no = 0;
  bool any_mask = false;
  while (std::getline(labels, line)) {
    ++no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (no == 1) {
      if (line != "id,target,budget") throw SchemaError("labels.csv line 1: expected header 'id,target,budget'");
      continue;
    }
    const auto f = detail::split_csv(line);
    if (f.size() != 3) throw SchemaError(detail::concat("labels.csv line ", no, ": expected 3 fields"));
    const std::string& id = f[0];
    const auto clip_path = root / "clips" / (id + ".clip");
    AnnotatedClip c{detail::decode_clip(detail::read_file(clip_path), clip_path.string()),
                    detail::parse_label(f[1], no, "target"), 0};
    if (attributes) {
      auto it = ann.find(id);
      if (it == ann.end()) throw SchemaError(detail::concat("labels.csv line ", no, ": no annotation for '", id, "'"));
      if (static_cast<int>(it->second.frames.size()) != c.clip.frames())
        throw SchemaError(detail::concat("annotation for '", id, "' has ", it->second.frames.size(),
                                         " frames, clip has ", c.clip.frames()));
      c.budget_label = it->second.frames;
    } else {
      c.budget_label = detail::parse_label(f[2], no, "budget");
      d.num_budget_outputs = std::max(d.num_budget_outputs, std::get<int>(c.budget_label) + 1);
    }
    d.num_target_classes = std::max(d.num_target_classes, c.target_label + 1);
    RegionMasks m;
    for (auto [ext, slot] : {std::pair{".face", &m.face}, std::pair{".body", &m.body}}) {
      const auto p = root / "masks" / (id + ext);
      if (fs::exists(p)) {
        *slot = detail::decode_mask(detail::read_file(p), p.string());
        any_mask = true;
      }
    }
    d.masks.push_back(std::move(m));
    d.clips.push_back(std::move(c));
  }
  require<SchemaError>(!d.empty(), root.string(), ": dataset has no clips");
  if (!any_mask) d.masks.clear();
  if (attributes) d.num_budget_outputs = kNumAttributes;
  try {
    validate(d);
  } catch (const ArgumentError& e) {
    throw SchemaError(root.string() + ": " + e.what());
  }
  return d;
}

}  // namespace vidpriv

#endif  // VIDPRIV_DATASET_DIR_HPP_
