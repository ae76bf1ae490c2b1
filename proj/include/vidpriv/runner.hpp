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

// Experiment orchestration: one run trains (or applies a fixed baseline),
// evaluates, and appends one trade-off row.
//
// Run directory contents:
//   config.txt         resolved configuration
//   trace.jsonl        one record per outer iteration (training runs)
//   ckpt/*.ckpt        final parameters, plus iter<N>_* every ckpt_every iterations
//   point.json         the trade-off point with per-attacker scores

#ifndef VIDPRIV_RUNNER_HPP_
#define VIDPRIV_RUNNER_HPP_

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>

#include "json.hpp"
#include "vidpriv/baselines.hpp"
#include "vidpriv/config.hpp"
#include "vidpriv/data.hpp"
#include "vidpriv/dataset_dir.hpp"
#include "vidpriv/evaluation.hpp"
#include "vidpriv/io.hpp"
#include "vidpriv/train.hpp"

namespace vidpriv {

inline constexpr const char* kOutputRootEnv = "VIDPRIV_OUT";

/// Output root: $VIDPRIV_OUT, or the working directory.
inline std::filesystem::path output_root() {
  const char* env = std::getenv(kOutputRootEnv);
  return env && *env ? std::filesystem::path(env) : std::filesystem::current_path();
}

inline std::filesystem::path resolve_output(const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : output_root() / path;
}

inline Dataset load_experiment_data(const DataConfig& d) {
  if (d.source == "toy") return generate_toy_dataset(d.data_seed, d.n_clips, d.frames, d.side);
  return load_dataset_dir(d.source);
}

/// Method name and variant of the row a configuration produces.
inline std::pair<std::string, Variant> row_identity(const ExperimentConfig& c) {
  Variant v;
  switch (c.baseline) {
    case BaselineKind::kDownsample:
      v.r = c.downsample_r;
      return {"downsample", v};
    case BaselineKind::kObfuscation:
      v.code = c.obfuscation.code();
      return {"obfuscation", v};
    case BaselineKind::kNone:
      break;
  }
  v.restarting = c.train.restarting;
  if (c.train.method == Method::kKBeam) v.K = c.train.K;
  if (c.train.method == Method::kEntropy) v.M = c.train.M;
  return {method_name(c.train.method), v};
}

/// Default run directory name, e.g. "entropy_M=2+_seed0".
inline std::string default_run_name(const ExperimentConfig& c) {
  const auto [m, v] = row_identity(c);
  return m + "_" + v.tag() + "_seed" + std::to_string(c.train.seed);
}

inline std::string describe(const ExperimentConfig& c) {
  std::ostringstream os;
  const TrainConfig& t = c.train;
  const EvalConfig& e = c.eval;
  os << "profile = " << c.profile << "\n";
  if (c.baseline == BaselineKind::kNone) {
    os << "method = " << method_name(t.method) << "\n";
  } else if (c.baseline == BaselineKind::kDownsample) {
    os << "baseline = downsample\ndownsample = " << c.downsample_r << "\n";
  } else {
    os << "baseline = obfuscation\nobfuscation = " << c.obfuscation.code() << "\n"
       << "blur_min_sigma = " << c.blur.min_sigma << "\nblur_divisor = " << c.blur.diameter_divisor << "\n";
  }
  os.precision(17);
  os << "alpha_A = " << t.alpha_A << "\nalpha_T = " << t.alpha_T << "\nalpha_B = " << t.alpha_B
     << "\nth_T = " << t.th_T << "\nth_B = " << t.th_B << "\ngamma = " << t.gamma << "\nmax_iter = " << t.max_iter
     << "\nd_iter = " << t.d_iter << "\nrstrt_iter = " << t.rstrt_iter << "\ninner_cap = " << t.inner_cap
     << "\nK = " << t.K << "\nM = " << t.M << "\nseed = " << t.seed
     << "\nrestarting = " << (t.restarting ? "true" : "false") << "\nbatch_size = " << t.batch_size
     << "\ngate_every = " << t.gate_every << "\ngate_samples = " << t.gate_samples << "\na_steps = " << t.a_steps
     << "\npost_restart_warmup = " << (t.post_restart_warmup ? "true" : "false")
     << "\nupdate_rule = " << (t.update_rule == UpdateRule::kAdam ? "adam" : "sgd")
     << "\nckpt_every = " << t.ckpt_every << "\nn_attackers = " << e.n_attackers << "\natk_iters = " << e.atk_iters
     << "\nplateau = " << e.plateau << "\nsmooth = " << e.smooth << "\nmin_delta = " << e.min_delta
     << "\nalpha_atk = " << e.alpha_atk << "\neval_batch_size = " << e.batch_size
     << "\ntarget_iters = " << e.target_iters << "\nalpha_tgt = " << e.alpha_tgt << "\ndataset = " << c.data.source
     << "\ndata_seed = " << c.data.data_seed << "\nn_clips = " << c.data.n_clips << "\nframes = " << c.data.frames
     << "\nside = " << c.data.side << "\ntable = " << c.table << "\n";
  return os.str();
}

struct RunResult {
  TradeoffPoint point;
  TwoStepReport report;
  std::filesystem::path run_dir;
};

inline nlohmann::json point_json(const TradeoffPoint& p, const TwoStepReport& r) {
  nlohmann::json j;
  j["method"] = p.method;
  j["variant"] = p.variant.tag();
  j["A_T"] = p.A_T;
  j["A_B"] = p.A_B;
  j["n_attackers"] = p.n_attackers;
  j["attackers"] = nlohmann::json::array();
  for (const auto& a : r.attackers)
    j["attackers"].push_back({{"depth", a.arch.depth}, {"width", a.arch.width_multiplier}, {"score", a.score},
                              {"steps", a.steps}});
  return j;
}

/// Fails unless dir is absent or empty (or force is set). Touches nothing.
inline void check_run_dir(const std::filesystem::path& dir, bool force) {
  namespace fs = std::filesystem;
  if (force || !fs::exists(dir)) return;
  if (!fs::is_directory(dir)) throw IoError(dir.string() + " exists and is not a directory");
  if (!fs::is_empty(dir))
    throw IoError("output directory " + dir.string() + " is not empty; pass --force to overwrite");
}

/// Runs one experiment: train or baseline, then the two-step evaluation, then
/// one appended table row. Progress lines go to log when given.
inline RunResult run_experiment(const ExperimentConfig& cfg, bool force, std::ostream* log = nullptr) {
  namespace fs = std::filesystem;
  validate(cfg);
  RunResult res;
  res.run_dir = resolve_output(cfg.out_dir.empty() ? default_run_name(cfg) : cfg.out_dir);
  const fs::path table = resolve_output(cfg.table);
  check_run_dir(res.run_dir, force);

  const Dataset all = load_experiment_data(cfg.data);
  const Splits sp = split_dataset(all, cfg.data.data_seed);
  require<ConfigError>(!sp.train.empty() && !sp.val.empty() && !sp.eval.empty(), "n_clips: dataset of ", all.size(),
                       " clips leaves an empty train, val or eval split");

  if (force && fs::exists(res.run_dir)) fs::remove_all(res.run_dir);
  fs::create_directories(res.run_dir / "ckpt");
  {
    std::ofstream out(res.run_dir / "config.txt");
    out << describe(cfg);
  }
  auto [method, variant] = row_identity(cfg);
  res.point.method = method;
  res.point.variant = variant;

  if (cfg.baseline == BaselineKind::kNone) {
    std::ofstream trace(res.run_dir / "trace.jsonl");
    MinimaxTrainer<float> trainer(sp.train, sp.val, cfg.train);
    trainer.trace_sink = &trace;
    trainer.log = log;
    const int every = cfg.train.ckpt_every;
    trainer.iteration_hook = [&](const TraceRecord& r, const MinimaxTrainer<float>& t) {
      if (log)
        *log << "iter " << r.iter << " L_T=" << r.L_T << " val_acc_T=" << r.val_acc_T
             << (r.restart ? " restart" : "") << "\n";
      if (every > 0 && r.iter % every == 0) {
        const std::string pre = "iter" + std::to_string(r.iter) + "_";
        save_checkpoint(res.run_dir / "ckpt" / (pre + "anonymizer.ckpt"), t.anonymizer(), r.iter);
        save_checkpoint(res.run_dir / "ckpt" / (pre + "target.ckpt"), t.target(), r.iter);
      }
    };
    const TrainResult<float> tr = trainer.run();
    const auto steps = static_cast<std::uint64_t>(cfg.train.max_iter);
    save_checkpoint(res.run_dir / "ckpt" / "anonymizer.ckpt", tr.anonymizer, steps);
    save_checkpoint(res.run_dir / "ckpt" / "target.ckpt", tr.target, steps);
    for (std::size_t i = 0; i < tr.members.size(); ++i)
      save_checkpoint(res.run_dir / "ckpt" / ("budget" + std::to_string(i) + ".ckpt"), tr.members[i], steps);
    if (log) *log << "evaluating with " << cfg.eval.n_attackers << " attackers\n";
    res.report = evaluate_two_step(tr.anonymizer, tr.target, sp.train, sp.eval, cfg.eval);
  } else {
    ClipTransform f;
    if (cfg.baseline == BaselineKind::kDownsample) {
      const int r = cfg.downsample_r;
      f = [r](const Dataset& d, std::size_t i) { return downsample(d.clips[i].clip, r); };
    } else {
      require(!all.masks.empty(), "obfuscation baselines need a dataset with region masks");
      const ObfuscationSpec spec = cfg.obfuscation;
      const BlurParams blur = cfg.blur;
      f = [spec, blur](const Dataset& d, std::size_t i) { return obfuscate(d.clips[i].clip, d.masks[i], spec, blur); };
    }
    ParameterSet<float> target;
    if (log) *log << "training target model on the transformed split\n";
    res.report = run_baseline_point<float>(f, sp.train, sp.eval, cfg.eval, &target);
    save_checkpoint(res.run_dir / "ckpt" / "target.ckpt", target, static_cast<std::uint64_t>(cfg.eval.target_iters));
  }
  res.point.A_T = res.report.A_T;
  res.point.A_B = res.report.A_B;
  res.point.n_attackers = cfg.eval.n_attackers;
  {
    std::ofstream out(res.run_dir / "point.json");
    out << point_json(res.point, res.report).dump(2) << "\n";
  }
  if (table.has_parent_path()) fs::create_directories(table.parent_path());
  record_point(table, res.point);
  return res;
}

/// Re-evaluates saved anonymizer and target checkpoints on the configured data.
inline RunResult evaluate_checkpoints(const ExperimentConfig& cfg, const std::filesystem::path& anonymizer,
                                      const std::filesystem::path& target) {
  validate(cfg);
  const Dataset all = load_experiment_data(cfg.data);
  const Splits sp = split_dataset(all, cfg.data.data_seed);
  require<ConfigError>(!sp.train.empty() && !sp.val.empty() && !sp.eval.empty(), "n_clips: dataset of ", all.size(),
                       " clips leaves an empty train, val or eval split");
  const auto a = load_checkpoint<float>(anonymizer);
  const auto t = load_checkpoint<float>(target);
  require(a.params.arch.role == Role::kAnonymizer, anonymizer.string(), " is not an anonymizer checkpoint");
  require(t.params.arch.role == Role::kTarget, target.string(), " is not a target checkpoint");
  RunResult res;
  res.report = evaluate_two_step(a.params, t.params, sp.train, sp.eval, cfg.eval);
  auto [method, variant] = row_identity(cfg);
  res.point = {method, variant, res.report.A_T, res.report.A_B, cfg.eval.n_attackers};
  return res;
}

}  // namespace vidpriv

#endif  // VIDPRIV_RUNNER_HPP_
