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

// vidpriv: train, baseline, evaluate, stats, plotdata.
//
// Exit status: 0 ok, 1 usage/config error, 2 I/O or data error, 3 numeric abort.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "vidpriv/annotations.hpp"
#include "vidpriv/config.hpp"
#include "vidpriv/io.hpp"
#include "vidpriv/runner.hpp"

namespace {

using vidpriv::KeyValues;

struct CommonOptions {
  std::string config_file;
  std::vector<std::string> sets;  // raw key=value overrides
  std::string profile, dataset, out, table;
  std::optional<double> gamma;
  std::optional<std::uint64_t> seed;
  std::optional<int> n_attackers;
  bool force = false;
  bool quiet = false;

  void attach(CLI::App* app) {
    app->add_option("-c,--config", config_file, "key = value configuration file")->check(CLI::ExistingFile);
    app->add_option("--profile", profile, "sbu (default), ucf or toy");
    app->add_option("--dataset", dataset, "'toy' or a dataset directory");
    app->add_option("--gamma", gamma, "budget term weight");
    app->add_option("--seed", seed, "run seed");
    app->add_option("--n-attackers", n_attackers, "evaluation attackers");
    app->add_option("-o,--out", out, "run directory (relative to $VIDPRIV_OUT)");
    app->add_option("--table", table, "trade-off table (relative to $VIDPRIV_OUT)");
    app->add_option("--set", sets, "extra key=value override, repeatable");
    app->add_flag("--force", force, "overwrite a non-empty run directory");
    app->add_flag("-q,--quiet", quiet, "no progress output");
  }

  KeyValues flag_values() const {
    KeyValues kv;
    if (!profile.empty()) kv.emplace_back("profile", profile);
    if (!dataset.empty()) kv.emplace_back("dataset", dataset);
    if (gamma) kv.emplace_back("gamma", format(*gamma));
    if (seed) kv.emplace_back("seed", std::to_string(*seed));
    if (n_attackers) kv.emplace_back("n_attackers", std::to_string(*n_attackers));
    if (!out.empty()) kv.emplace_back("out_dir", out);
    if (!table.empty()) kv.emplace_back("table", table);
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw vidpriv::ConfigError("--set expects key=value, got '" + s + "'");
      kv.emplace_back(s.substr(0, eq), s.substr(eq + 1));
    }
    return kv;
  }

  static std::string format(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
  }

  vidpriv::ExperimentConfig resolve(KeyValues extra) const {
    KeyValues file;
    if (!config_file.empty()) file = vidpriv::read_key_values(config_file);
    KeyValues flags = flag_values();
    // Dedicated flags come before --set so explicit --set entries win.
    extra.insert(extra.end(), flags.begin(), flags.end());
    return vidpriv::resolve_config(file, extra);
  }
};

void print_point(const vidpriv::RunResult& r) {
  std::cout << vidpriv::kTableHeader << "\n" << vidpriv::format_row(r.point, vidpriv::TablePrecision::kPercent) << "\n";
}

int run(int argc, char** argv) {
  CLI::App app{"Adversarial video anonymization: training, baselines and trade-off evaluation"};
  app.require_subcommand(1);

  // train
  CommonOptions train_opts;
  std::string method;
  std::optional<int> ensemble, beams;
  bool restart = false;
  auto* train = app.add_subcommand("train", "train an anonymizer, evaluate it, append a table row");
  train_opts.attach(train);
  train->add_option("--method", method, "grl, kbeam or entropy")->required();
  train->add_option("--ensemble", ensemble, "budget ensemble size M (entropy)");
  train->add_option("--beams", beams, "beam count K (kbeam)");
  train->add_flag("--restart", restart, "periodically restart budget models");

  // baseline
  CommonOptions base_opts;
  std::optional<int> rate;
  std::string code;
  auto* baseline = app.add_subcommand("baseline", "evaluate a fixed downsampling or obfuscation transform");
  base_opts.attach(baseline);
  auto* rate_opt = baseline->add_option("--downsample", rate, "downsample rate r in {1,2,4,8,16}");
  auto* code_opt = baseline->add_option("--obfuscation", code, "obfuscation code, e.g. XKF or SBD");
  rate_opt->excludes(code_opt);
  baseline->callback([&] {
    if (!rate && code.empty()) throw CLI::ValidationError("baseline", "need --downsample or --obfuscation");
  });

  // evaluate
  CommonOptions eval_opts;
  std::string run_dir, anon_ckpt, target_ckpt, eval_method;
  bool append = false;
  auto* evaluate = app.add_subcommand("evaluate", "two-step evaluation of saved checkpoints");
  eval_opts.attach(evaluate);
  evaluate->add_option("--run", run_dir, "run directory holding ckpt/anonymizer.ckpt and ckpt/target.ckpt");
  evaluate->add_option("--anonymizer", anon_ckpt, "anonymizer checkpoint");
  evaluate->add_option("--target", target_ckpt, "target checkpoint");
  evaluate->add_option("--method", eval_method, "method recorded in the row (default grl)");
  evaluate->add_flag("--append", append, "append the row to the table");

  // stats
  std::string stats_dataset = "toy", annotations;
  std::uint64_t stats_seed = 0;
  int stats_clips = 120, stats_frames = 8, stats_side = 16;
  auto* stats = app.add_subcommand("stats", "dataset statistics as JSON");
  stats->add_option("--dataset", stats_dataset, "'toy' or a dataset directory");
  stats->add_option("--annotations", annotations, "privacy annotation file (one JSON record per line)");
  stats->add_option("--data-seed", stats_seed, "toy dataset seed");
  stats->add_option("--n-clips", stats_clips, "toy dataset size");
  stats->add_option("--frames", stats_frames, "toy clip length");
  stats->add_option("--side", stats_side, "toy frame side");

  // plotdata
  std::string plot_table, plot_out;
  auto* plot = app.add_subcommand("plotdata", "scatter-ready data from a trade-off table");
  plot->add_option("table", plot_table, "trade-off table")->required()->check(CLI::ExistingFile);
  plot->add_option("-o,--out", plot_out, "output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  if (train->parsed()) {
    KeyValues kv{{"method", method}};
    if (ensemble) kv.emplace_back("M", std::to_string(*ensemble));
    if (beams) kv.emplace_back("K", std::to_string(*beams));
    if (restart) kv.emplace_back("restarting", "true");
    const auto cfg = train_opts.resolve(kv);
    const auto r = vidpriv::run_experiment(cfg, train_opts.force, train_opts.quiet ? nullptr : &std::cerr);
    print_point(r);
    return 0;
  }
  if (baseline->parsed()) {
    KeyValues kv;
    if (rate) {
      kv = {{"baseline", "downsample"}, {"downsample", std::to_string(*rate)}};
    } else {
      kv = {{"baseline", "obfuscation"}, {"obfuscation", code}};
    }
    const auto cfg = base_opts.resolve(kv);
    const auto r = vidpriv::run_experiment(cfg, base_opts.force, base_opts.quiet ? nullptr : &std::cerr);
    print_point(r);
    return 0;
  }
  if (evaluate->parsed()) {
    std::filesystem::path a = anon_ckpt, t = target_ckpt;
    if (!run_dir.empty()) {
      const auto dir = vidpriv::resolve_output(run_dir);
      if (a.empty()) a = dir / "ckpt" / "anonymizer.ckpt";
      if (t.empty()) t = dir / "ckpt" / "target.ckpt";
    }
    if (a.empty() || t.empty()) throw vidpriv::ConfigError("evaluate: need --run or both --anonymizer and --target");
    KeyValues kv;
    if (!eval_method.empty()) kv.emplace_back("method", eval_method);
    const auto cfg = eval_opts.resolve(kv);
    const auto r = vidpriv::evaluate_checkpoints(cfg, a, t);
    print_point(r);
    if (append) vidpriv::record_point(vidpriv::resolve_output(cfg.table), r.point);
    return 0;
  }
  if (stats->parsed()) {
    nlohmann::json j;
    if (!annotations.empty()) {
      const auto videos = vidpriv::load_privacy_annotations(annotations);
      j["videos"] = videos.size();
      for (const auto& [action, n] : vidpriv::action_distribution(videos)) j["action_distribution"][action] = n;
      const auto corr = vidpriv::action_attribute_correlation(videos);
      for (std::size_t r = 0; r < corr.actions.size(); ++r)
        for (std::size_t c = 0; c < corr.columns.size(); ++c) {
          const auto& col = corr.columns[c];
          const std::string key = std::string(vidpriv::kAttributeNames[static_cast<int>(col.attribute)]) + "=" +
                                  std::to_string(col.value);
          j["action_attribute_correlation"][corr.actions[r]][key] =
              corr.ratio[r][c] ? nlohmann::json(*corr.ratio[r][c]) : nlohmann::json(nullptr);
        }
    } else {
      vidpriv::DataConfig dc{stats_dataset, stats_seed, stats_clips, stats_frames, stats_side};
      const auto d = vidpriv::load_experiment_data(dc);
      j["clips"] = d.size();
      for (const auto& [cls, n] : vidpriv::action_distribution(d)) j["action_distribution"][std::to_string(cls)] = n;
    }
    std::cout << j.dump(2) << "\n";
    return 0;
  }
  if (plot->parsed()) {
    const auto rows = vidpriv::read_table(plot_table, vidpriv::TablePrecision::kPercent);
    const std::string text = vidpriv::plotdata(rows);
    if (plot_out.empty()) {
      std::cout << text;
    } else {
      std::ofstream out(plot_out);
      if (!out) throw vidpriv::IoError("cannot write " + plot_out);
      out << text;
    }
    return 0;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const vidpriv::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const vidpriv::ArgumentError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const vidpriv::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << " (trace flushed)\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
