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

// Experiment configuration: profiles, flat key=value files and overrides.
//
// Resolution order: profile defaults, then the config file, then flags.
// The profile itself may be chosen in either the file or a flag (flag wins).

#ifndef VIDPRIV_CONFIG_HPP_
#define VIDPRIV_CONFIG_HPP_

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vidpriv/baselines.hpp"
#include "vidpriv/common.hpp"
#include "vidpriv/evaluation.hpp"
#include "vidpriv/train.hpp"

namespace vidpriv {

enum class BaselineKind { kNone, kDownsample, kObfuscation };

struct DataConfig {
  std::string source = "toy";  // "toy" or a dataset directory
  std::uint64_t data_seed = 0;
  int n_clips = 120;
  int frames = 8;
  int side = 16;
};

struct ExperimentConfig {
  std::string profile = "sbu";
  TrainConfig train;
  EvalConfig eval;
  DataConfig data;
  bool method_set = false;  // "method" given explicitly
  BaselineKind baseline = BaselineKind::kNone;
  int downsample_r = 1;
  ObfuscationSpec obfuscation;
  BlurParams blur;
  std::string out_dir;  // relative paths resolve against VIDPRIV_OUT
  std::string table = "tradeoff.csv";
};

using KeyValues = std::vector<std::pair<std::string, std::string>>;

inline const std::vector<std::string>& profile_names() {
  static const std::vector<std::string> names = {"sbu", "ucf", "toy"};
  return names;
}

/// Defaults of a named profile. sbu: thresholds 0.85/0.99, gamma 2.
/// ucf: th_T 0.70, gamma 0.5. toy: sbu with desk-scale steps and budgets.
inline ExperimentConfig profile_defaults(const std::string& name) {
  ExperimentConfig c;
  c.profile = name;
  if (name == "sbu") return c;
  if (name == "ucf") {
    c.train.th_T = 0.70;
    c.train.gamma = 0.5;
    return c;
  }
  if (name == "toy") {
    TrainConfig& t = c.train;
    t.alpha_A = 3e-3;
    t.alpha_T = 1e-3;
    t.alpha_B = 1e-2;
    t.max_iter = 100;
    t.rstrt_iter = 5;
    t.d_iter = 5;
    t.inner_cap = 30;
    t.gate_samples = 128;
    c.eval.min_delta = 1e-3;
    return c;
  }
  throw ConfigError("profile: unknown profile '" + name + "' (expected sbu, ucf or toy)");
}

namespace detail {

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const char* b = v.data();
  const char* e = v.data() + v.size();
  std::from_chars_result res;
  if constexpr (std::is_floating_point_v<T>) {
    res = std::from_chars(b, e, out);
    if (res.ec == std::errc() && res.ptr == e && !std::isfinite(out)) res.ec = std::errc::invalid_argument;
  } else {
    res = std::from_chars(b, e, out);
  }
  if (res.ec != std::errc() || res.ptr != e || v.empty())
    throw ConfigError(key + ": expected " + (std::is_floating_point_v<T> ? "a number" : "an integer") +
                      ", got '" + v + "'");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

using Setter = std::function<void(ExperimentConfig&, const std::string& key, const std::string& value)>;

template <typename T, typename Get>
Setter number_key(Get get) {
  return [get](ExperimentConfig& c, const std::string& k, const std::string& v) { get(c) = parse_number<T>(k, v); };
}

template <typename Get>
Setter bool_key(Get get) {
  return [get](ExperimentConfig& c, const std::string& k, const std::string& v) { get(c) = parse_bool(k, v); };
}

inline const std::map<std::string, Setter>& config_keys() {
  static const std::map<std::string, Setter> keys = [] {
    std::map<std::string, Setter> m;
#define VP_NUM(name, T, expr) m[name] = number_key<T>([](ExperimentConfig& c) -> T& { return expr; })
#define VP_BOOL(name, expr) m[name] = bool_key([](ExperimentConfig& c) -> bool& { return expr; })
    VP_NUM("alpha_A", double, c.train.alpha_A);
    VP_NUM("alpha_T", double, c.train.alpha_T);
    VP_NUM("alpha_B", double, c.train.alpha_B);
    VP_NUM("th_T", double, c.train.th_T);
    VP_NUM("th_B", double, c.train.th_B);
    VP_NUM("gamma", double, c.train.gamma);
    VP_NUM("max_iter", int, c.train.max_iter);
    VP_NUM("d_iter", int, c.train.d_iter);
    VP_NUM("rstrt_iter", int, c.train.rstrt_iter);
    VP_NUM("inner_cap", int, c.train.inner_cap);
    VP_NUM("K", int, c.train.K);
    VP_NUM("M", int, c.train.M);
    VP_NUM("seed", std::uint64_t, c.train.seed);
    VP_BOOL("restarting", c.train.restarting);
    VP_NUM("batch_size", int, c.train.batch_size);
    VP_NUM("gate_every", int, c.train.gate_every);
    VP_NUM("gate_samples", int, c.train.gate_samples);
    VP_NUM("a_steps", int, c.train.a_steps);
    VP_BOOL("post_restart_warmup", c.train.post_restart_warmup);
    VP_NUM("ckpt_every", int, c.train.ckpt_every);
    VP_NUM("n_attackers", int, c.eval.n_attackers);
    VP_NUM("atk_iters", int, c.eval.atk_iters);
    VP_NUM("plateau", int, c.eval.plateau);
    VP_NUM("smooth", int, c.eval.smooth);
    VP_NUM("min_delta", double, c.eval.min_delta);
    VP_NUM("alpha_atk", double, c.eval.alpha_atk);
    VP_NUM("eval_batch_size", int, c.eval.batch_size);
    VP_NUM("target_iters", int, c.eval.target_iters);
    VP_NUM("alpha_tgt", double, c.eval.alpha_tgt);
    VP_NUM("data_seed", std::uint64_t, c.data.data_seed);
    VP_NUM("n_clips", int, c.data.n_clips);
    VP_NUM("frames", int, c.data.frames);
    VP_NUM("side", int, c.data.side);
    VP_NUM("downsample", int, c.downsample_r);
    VP_NUM("blur_min_sigma", double, c.blur.min_sigma);
    VP_NUM("blur_divisor", double, c.blur.diameter_divisor);
#undef VP_NUM
#undef VP_BOOL
    m["method"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
      auto mth = parse_method(v);
      if (!mth) throw ConfigError(k + ": unknown method '" + v + "' (expected grl, kbeam or entropy)");
      c.train.method = *mth;
      c.method_set = true;
    };
    m["update_rule"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
      if (v == "adam") c.train.update_rule = c.eval.update_rule = UpdateRule::kAdam;
      else if (v == "sgd") c.train.update_rule = c.eval.update_rule = UpdateRule::kSgd;
      else throw ConfigError(k + ": expected adam or sgd, got '" + v + "'");
    };
    m["baseline"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
      if (v == "none") c.baseline = BaselineKind::kNone;
      else if (v == "downsample") c.baseline = BaselineKind::kDownsample;
      else if (v == "obfuscation") c.baseline = BaselineKind::kObfuscation;
      else throw ConfigError(k + ": expected none, downsample or obfuscation, got '" + v + "'");
    };
    m["obfuscation"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
      try {
        c.obfuscation = ObfuscationSpec::parse(v);
      } catch (const ArgumentError& e) {
        throw ConfigError(k + ": " + e.what());
      }
    };
    m["dataset"] = [](ExperimentConfig& c, const std::string&, const std::string& v) { c.data.source = v; };
    m["out_dir"] = [](ExperimentConfig& c, const std::string&, const std::string& v) { c.out_dir = v; };
    m["table"] = [](ExperimentConfig& c, const std::string&, const std::string& v) { c.table = v; };
    m["profile"] = [](ExperimentConfig&, const std::string&, const std::string&) {};  // resolved first
    return m;
  }();
  return keys;
}

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

/// Reads "key = value" lines; '#' starts a comment. Errors name the line.
inline KeyValues parse_key_values(std::istream& in, const std::string& what = "config") {
  KeyValues kv;
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(detail::concat(what, " line ", no, ": expected key = value"));
    std::string key = detail::trim(line.substr(0, eq)), value = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(detail::concat(what, " line ", no, ": empty key"));
    kv.emplace_back(std::move(key), std::move(value));
  }
  return kv;
}

inline KeyValues read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  return parse_key_values(in, path.string());
}

/// Cross-field checks; each failure names a key.
inline void validate(const ExperimentConfig& c) {
  validate(c.train);
  validate(c.eval);
  if (c.method_set && c.baseline != BaselineKind::kNone)
    throw ConfigError("baseline: a run sets either method or baseline, not both");
  if (c.baseline == BaselineKind::kDownsample &&
      std::find(kDownsampleRates.begin(), kDownsampleRates.end(), c.downsample_r) == kDownsampleRates.end())
    throw ConfigError("downsample: rate must be one of 1, 2, 4, 8, 16");
  if (c.blur.min_sigma <= 0) throw ConfigError("blur_min_sigma: must be > 0");
  if (c.blur.diameter_divisor <= 0) throw ConfigError("blur_divisor: must be > 0");
  if (c.data.source == "toy") {
    if (c.data.n_clips < 1) throw ConfigError("n_clips: must be >= 1");
    if (c.data.frames < 2) throw ConfigError("frames: must be >= 2");
    if (c.data.side < 16) throw ConfigError("side: must be >= 16");
  }
}

/// Builds a configuration from file values and flag values (flags win).
/// Unknown keys and malformed values throw ConfigError naming the key.
inline ExperimentConfig resolve_config(const KeyValues& file, const KeyValues& flags) {
  std::string profile = "sbu";
  for (const auto* src : {&file, &flags})
    for (const auto& [k, v] : *src)
      if (k == "profile") profile = v;
  ExperimentConfig c = profile_defaults(profile);
  const auto& keys = detail::config_keys();
  for (const auto* src : {&file, &flags})
    for (const auto& [k, v] : *src) {
      auto it = keys.find(k);
      if (it == keys.end()) throw ConfigError(k + ": unknown configuration key");
      it->second(c, k, v);
    }
  c.eval.seed = c.train.seed;
  validate(c);
  return c;
}

inline std::vector<std::string> config_key_names() {
  std::vector<std::string> out;
  for (const auto& [k, _] : detail::config_keys()) out.push_back(k);
  return out;
}

}  // namespace vidpriv

#endif  // VIDPRIV_CONFIG_HPP_
