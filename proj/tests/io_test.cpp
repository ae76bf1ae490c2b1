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
#include <sys/wait.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "vidpriv/io.hpp"

namespace vidpriv {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("vidpriv_io_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

TEST(Checkpoint, BitExactRoundTrip) {
  const ArchSpec arch = default_budget_arch(3);
  for (std::uint64_t seed : {1u, 2u, 99u}) {
    const auto p = init_params<float>(arch, seed);
    const auto bytes = encode_checkpoint(p, 1234);
    const auto back = decode_checkpoint<float>(bytes);
    EXPECT_EQ(back.step, 1234u);
    EXPECT_EQ(back.params.arch, arch);
    ASSERT_EQ(back.params.weights.size(), p.weights.size());
    for (std::size_t i = 0; i < p.weights.size(); ++i) {
      EXPECT_EQ(back.params.weights[i].name, p.weights[i].name);
      EXPECT_EQ(back.params.weights[i].shape, p.weights[i].shape);
      EXPECT_EQ(back.params.weights[i].values, p.weights[i].values);
    }
    EXPECT_EQ(parameter_hash(back.params), parameter_hash(p));
    EXPECT_EQ(encode_checkpoint(back.params, 1234), bytes);
  }
}

TEST(Checkpoint, FileRoundTripAndPrecisionCrossing) {
  const auto dir = scratch("ckpt");
  const auto p = init_params<double>(default_anonymizer_arch(3), 5);
  save_checkpoint(dir / "a.ckpt", p, 7);
  const auto back = load_checkpoint<double>(dir / "a.ckpt");
  EXPECT_EQ(parameter_hash(back.params), parameter_hash(p));
  // Stored as f64, so a float set survives a double load unchanged.
  const auto f = init_params<float>(default_anonymizer_arch(3), 5);
  save_checkpoint(dir / "f.ckpt", f, 0);
  EXPECT_EQ(parameter_hash(cast_params<float>(load_checkpoint<double>(dir / "f.ckpt").params)), parameter_hash(f));
  fs::remove_all(dir);
}

TEST(Checkpoint, CorruptionIsRejected) {
  const auto p = init_params<float>(default_target_arch(4, 3), 3);
  const std::string good = encode_checkpoint(p, 0);
  EXPECT_THROW(decode_checkpoint<float>(good.substr(0, good.size() - 3)), IoError);
  std::string magic = good;
  magic[0] = 'X';
  EXPECT_THROW(decode_checkpoint<float>(magic), IoError);
  auto bad = p;
  bad.weights[0].values[0] = std::numeric_limits<float>::quiet_NaN();
  EXPECT_THROW(decode_checkpoint<float>(encode_checkpoint(bad, 0)), IoError);
  EXPECT_THROW(load_checkpoint<float>("/nonexistent/x.ckpt"), IoError);
}

TradeoffPoint pt(const std::string& m, const std::string& tag, double at, double ab, int n) {
  return {m, Variant::parse(m, tag), at, ab, n};
}

TEST(Table, PercentRoundTripIsTextuallyExact) {
  const std::string text =
      "method,variant,A_T,A_B,n_attackers\n"
      "downsample,r=1,88.8,99.5,10\n"
      "kbeam,K=2+,86.4,76.5,10\n"
      "obfuscation,SBD,70.2,60.0,10\n"
      "grl,GRL,84.0,67.1,4\n";
  std::istringstream in(text);
  const auto rows = parse_table(in, TablePrecision::kPercent);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_NEAR(rows[0].A_T, 0.888, 1e-12);
  EXPECT_EQ(rows[1].variant.K, 2);
  EXPECT_TRUE(rows[1].variant.restarting);
  EXPECT_EQ(format_table(rows, TablePrecision::kPercent), text);
}

TEST(Table, FullPrecisionRoundTripsDoublesExactly) {
  const std::vector<TradeoffPoint> rows = {pt("entropy", "M=2+", 0.1 + 0.2, 1.0 / 3.0, 4),
                                           pt("downsample", "r=16", 0.25, 0.3333333333333333, 4)};
  std::istringstream in(format_table(rows, TablePrecision::kFull));
  EXPECT_EQ(parse_table(in, TablePrecision::kFull), rows);
}

TEST(Table, SchemaErrorsNameTheLine) {
  auto expect_line = [](const std::string& text, const std::string& where) {
    std::istringstream in(text);
    try {
      parse_table(in, TablePrecision::kPercent);
      FAIL() << text;
    } catch (const SchemaError& e) {
      EXPECT_NE(std::string(e.what()).find(where), std::string::npos) << e.what();
    }
  };
  expect_line("wrong,header\n", "line 1");
  expect_line(std::string(kTableHeader) + "\ngrl,GRL,1,2\n", "line 2");
  expect_line(std::string(kTableHeader) + "\n\ngrl,GRL,50,x,4\n", "line 3");
  expect_line(std::string(kTableHeader) + "\nkbeam,M=2,50,50,4\n", "line 2");
  expect_line(std::string(kTableHeader) + "\ngrl,GRL,150,50,4\n", "line 2");
}

TEST(Table, AppendWritesHeaderOnceAndCompanion) {
  const auto dir = scratch("append");
  const auto table = dir / "t.csv";
  record_point(table, pt("entropy", "M=2+", 0.9, 0.5, 4));
  record_point(table, pt("downsample", "r=4", 0.75, 0.4, 4));
  EXPECT_EQ(detail::read_file(table), std::string(kTableHeader) +
                                          "\nentropy,M=2+,90.0,50.0,4\ndownsample,r=4,75.0,40.0,4\n");
  EXPECT_EQ(full_precision_path(table), dir / "t.full.csv");
  const auto full = read_table(full_precision_path(table), TablePrecision::kFull);
  ASSERT_EQ(full.size(), 2u);
  EXPECT_EQ(full[1].A_B, 0.4);
  fs::remove_all(dir);
}

// Forked writers append to one table; every row survives whole.
TEST(Table, ConcurrentAppendsDoNotInterleave) {
  const auto dir = scratch("flock");
  const auto table = dir / "t.csv";
  constexpr int kProcs = 4, kRows = 50;
  std::vector<pid_t> kids;
  for (int k = 0; k < kProcs; ++k) {
    const pid_t pid = ::fork();
    ASSERT_GE(pid, 0);
    if (pid == 0) {
      for (int i = 0; i < kRows; ++i) append_row(table, pt("entropy", "M=" + std::to_string(k + 1), 0.5, 0.25, i), TablePrecision::kPercent);
      ::_exit(0);
    }
    kids.push_back(pid);
  }
  for (pid_t pid : kids) {
    int status = 0;
    ::waitpid(pid, &status, 0);
    EXPECT_TRUE(WIFEXITED(status) && WEXITSTATUS(status) == 0);
  }
  const auto rows = read_table(table, TablePrecision::kPercent);
  EXPECT_EQ(rows.size(), static_cast<std::size_t>(kProcs * kRows));
  fs::remove_all(dir);
}

TEST(PlotData, ReferenceLinesAndRows) {
  const std::vector<TradeoffPoint> rows = {pt("entropy", "M=8+", 0.822, 0.477, 10),
                                           pt("downsample", "r=1", 0.888, 0.995, 10)};
  EXPECT_EQ(plotdata(rows),
            "# ref_A_T=88.8\n# ref_A_B=99.5\n"
            "A_B,A_T,method,variant,marker_size\n"
            "47.7,82.2,entropy,M=8+,8\n"
            "99.5,88.8,downsample,r=1,1\n");
  EXPECT_EQ(plotdata({}), "");
  const std::string no_ref = plotdata({pt("grl", "GRL", 0.5, 0.5, 1)});
  EXPECT_EQ(no_ref.rfind("A_B,A_T", 0), 0u);
}

// Published reference tables ship as samples; each must round-trip as text.
TEST(Samples, ReferenceTablesRoundTrip) {
  for (const char* name : {"sbu", "ucf101", "hmdb51"}) {
    const fs::path p = fs::path(VIDPRIV_SAMPLES_DIR) / "reference" / (std::string(name) + ".csv");
    const auto rows = read_table(p, TablePrecision::kPercent);
    EXPECT_EQ(rows.size(), 31u) << name;
    EXPECT_EQ(format_table(rows, TablePrecision::kPercent), detail::read_file(p)) << name;
  }
  const auto sbu = read_table(fs::path(VIDPRIV_SAMPLES_DIR) / "reference" / "sbu.csv", TablePrecision::kPercent);
  EXPECT_EQ(format_row(sbu[0], TablePrecision::kPercent), "downsample,r=1,88.8,99.5,10");
}

}  // namespace
}  // namespace vidpriv
