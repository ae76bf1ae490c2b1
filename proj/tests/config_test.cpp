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

#include <gtest/gtest.h>

#include <sstream>

#include "vidpriv/config.hpp"
#include "vidpriv/runner.hpp"

namespace vidpriv {
namespace {

KeyValues kv(const std::string& text) {
  std::istringstream in(text);
  return parse_key_values(in);
}

TEST(Profiles, SbuDefaults) {
  const auto c = resolve_config({}, {});
  EXPECT_EQ(c.profile, "sbu");
  EXPECT_EQ(c.train.alpha_A, 1e-4);
  EXPECT_EQ(c.train.alpha_T, 1e-5);
  EXPECT_EQ(c.train.alpha_B, 1e-2);
  EXPECT_EQ(c.train.th_T, 0.85);
  EXPECT_EQ(c.train.th_B, 0.99);
  EXPECT_EQ(c.train.gamma, 2.0);
  EXPECT_EQ(c.train.max_iter, 800);
  EXPECT_EQ(c.train.d_iter, 30);
  EXPECT_EQ(c.train.rstrt_iter, 100);
}

TEST(Profiles, UcfOverridesThresholdAndGamma) {
  const auto c = resolve_config(kv("profile = ucf\n"), {});
  EXPECT_EQ(c.train.th_T, 0.70);
  EXPECT_EQ(c.train.gamma, 0.5);
  EXPECT_EQ(c.train.th_B, 0.99);
  EXPECT_THROW(resolve_config(kv("profile = imagenet\n"), {}), ConfigError);
}

TEST(Resolve, FlagsBeatFileBeatsProfile) {
  const auto file = kv("profile = ucf\ngamma = 1.0  # from file\nM = 4\nmethod = entropy\n");
  EXPECT_EQ(resolve_config(file, {}).train.gamma, 1.0);
  const auto c = resolve_config(file, {{"gamma", "3"}});
  EXPECT_EQ(c.train.gamma, 3.0);
  EXPECT_EQ(c.train.M, 4);
  EXPECT_EQ(c.train.th_T, 0.70);
  EXPECT_EQ(resolve_config(file, {{"profile", "sbu"}}).train.th_T, 0.85);
}

TEST(Resolve, SeedFlowsIntoEvaluation) {
  EXPECT_EQ(resolve_config({{"seed", "17"}}, {}).eval.seed, 17u);
}

TEST(Resolve, ErrorsNameTheKey) {
  auto msg = [](const KeyValues& f) {
    try {
      resolve_config(f, {});
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  EXPECT_EQ(msg({{"alpha_X", "1"}}).rfind("alpha_X:", 0), 0u);
  EXPECT_EQ(msg({{"gamma", "abc"}}).rfind("gamma:", 0), 0u);
  EXPECT_EQ(msg({{"gamma", "-1"}}).rfind("gamma:", 0), 0u);
  EXPECT_EQ(msg({{"th_T", "1.5"}}).rfind("th_T:", 0), 0u);
  EXPECT_EQ(msg({{"restarting", "maybe"}}).rfind("restarting:", 0), 0u);
  EXPECT_EQ(msg({{"method", "entropy"}, {"baseline", "downsample"}}).rfind("baseline:", 0), 0u);
  EXPECT_EQ(msg({{"baseline", "downsample"}, {"downsample", "3"}}).rfind("downsample:", 0), 0u);
  EXPECT_EQ(msg({{"method", "grl"}, {"M", "2"}}).rfind("M:", 0), 0u);
}

TEST(KeyValues, CommentsBlankLinesAndErrors) {
  const auto v = kv("# header\n\n  a = 1 # note\nb=two words\n");
  ASSERT_EQ(v.size(), 2u);
  EXPECT_EQ(v[0], (std::pair<std::string, std::string>{"a", "1"}));
  EXPECT_EQ(v[1].second, "two words");
  try {
    kv("a = 1\nno equals here\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(Describe, ResolvedConfigRoundTrips) {
  const auto c = resolve_config(kv("profile = toy\nmethod = entropy\nM = 2\nrestarting = true\ngamma = 0.3\n"), {});
  // The dump is itself a valid configuration file describing the same run.
  const auto again = resolve_config(kv(describe(c)), {});
  EXPECT_EQ(describe(again), describe(c));
}

TEST(RowIdentity, TagsPerKind) {
  auto tag = [](const KeyValues& f) {
    const auto [m, v] = row_identity(resolve_config(f, {}));
    return m + "," + v.tag();
  };
  EXPECT_EQ(tag({{"method", "entropy"}, {"M", "2"}, {"restarting", "true"}}), "entropy,M=2+");
  EXPECT_EQ(tag({{"method", "kbeam"}, {"K", "4"}}), "kbeam,K=4");
  EXPECT_EQ(tag({{"method", "grl"}, {"restarting", "true"}}), "grl,GRL+");
  EXPECT_EQ(tag({{"baseline", "downsample"}, {"downsample", "4"}}), "downsample,r=4");
  EXPECT_EQ(tag({{"baseline", "obfuscation"}, {"obfuscation", "SBF"}}), "obfuscation,SBF");
  EXPECT_EQ(default_run_name(resolve_config({{"method", "entropy"}, {"M", "2"}, {"restarting", "true"}}, {})),
            "entropy_M=2+_seed0");
}

}  // namespace
}  // namespace vidpriv
