// moelab command line: train/evaluate the language-guided MoE lab, run
// component ablations, generate corpora, and self-check the numerics.
//
// Exit codes: 0 success, 1 invalid config, 2 runtime failure,
// 3 selftest/check failure.

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "moelab/config.hpp"
#include "moelab/fsutil.hpp"
#include "moelab/gradcheck.hpp"
#include "moelab/harness.hpp"
#include "moelab/matching.hpp"
#include "moelab/report.hpp"
#include "moelab/scenegen.hpp"

namespace {

using namespace moelab;

ExperimentConfig load_or_default(const std::string& config_path) {
  if (config_path.empty()) return default_experiment_config();
  return load_experiment_config(config_path);
}

void apply_seed_override(ExperimentConfig& cfg, long long seed) {
  if (seed < 0) return;
  cfg.train.model_seed = static_cast<std::uint64_t>(seed);
  cfg.train.data_seed = static_cast<std::uint64_t>(seed) + 9973;
}

int cmd_run(const std::string& config_path, const std::string& out_dir, long long seed) {
  ExperimentConfig cfg = load_or_default(config_path);
  apply_seed_override(cfg, seed);
  cfg.validate();
  std::cout << "training: " << cfg.train.steps << " steps x " << cfg.train.batch_scenes
            << " scenes, " << cfg.scene.vocab.size() << " classes, "
            << (cfg.model.use_moe ? router_mode_name(cfg.model.router_mode) : "plain ffn")
            << "\n";
  const RunResult result = run_experiment(cfg);
  emit_reports(result, out_dir);
  std::cout << "matched " << result.eval.matched << " objects, overall accuracy "
            << result.eval.overall_accuracy << " (Many " << result.eval.many.accuracy()
            << ", Medium " << result.eval.medium.accuracy() << ", Few "
            << result.eval.few.accuracy() << "), center L1 " << result.eval.mean_center_l1
            << "\n";
  if (result.eval.routing_purity > 0.0)
    std::cout << "routing purity " << result.eval.routing_purity << "\n";
  std::cout << "reports written to " << out_dir << "\n";
  return 0;
}

int cmd_ablate(const std::string& config_path, const std::string& toggles,
               const std::string& out_dir, long long seed) {
  ExperimentConfig cfg = load_or_default(config_path);
  apply_seed_override(cfg, seed);
  cfg.validate();

  std::vector<std::string> rows;
  if (toggles == "table") {
    rows = component_sweep_rows();
  } else if (!toggles.empty()) {
    std::string cur;
    for (char c : toggles + ";") {
      if (c == ';') {
        if (!cur.empty()) rows.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
  }
  const std::vector<AblationRow> result = ablation_run(cfg, rows);
  emit_ablation_reports(result, out_dir);
  for (std::size_t i = 0; i < result.size(); ++i) {
    std::cout << "row " << i << " [" << result[i].label << "]: overall "
              << result[i].result.eval.overall_accuracy << ", Few "
              << result[i].result.eval.few.accuracy() << "\n";
  }
  std::cout << "ablation reports written to " << out_dir << "\n";
  return 0;
}

int cmd_gen_corpus(const std::string& config_path, const std::string& out_file,
                   std::size_t scenes, long long seed) {
  ExperimentConfig cfg = load_or_default(config_path);
  apply_seed_override(cfg, seed);
  const SceneGenerator gen(cfg.scene);
  const std::uint64_t base = cfg.train.data_seed;
  CorpusStats stats;
  const std::vector<Scene> corpus = generate_corpus(gen, scenes, base, &stats);
  save_corpus(out_file, cfg.scene, corpus, base);
  std::cout << "wrote " << scenes << " scenes (" << stats.instances << " instances) to "
            << out_file << "\n";
  for (std::size_t c = 0; c < stats.class_counts.size(); ++c) {
    std::cout << "  " << cfg.scene.vocab.entry(c).name << ": " << stats.class_counts[c] << " ("
              << frequency_group_name(stats.groups[c]) << ")\n";
  }
  return 0;
}

int cmd_check_grads(std::size_t seeds, double tolerance) {
  bool all_pass = true;
  for (const auto& check : builtin_gradient_checks()) {
    double worst = 0.0;
    bool pass = true;
    for (std::size_t s = 0; s < seeds; ++s) {
      const GradCheckReport report = check.run(s);
      worst = std::max(worst, report.worst());
      pass = pass && report.worst() <= tolerance;
    }
    std::printf("%-28s %s  (max rel err %.3e over %zu seeds)\n", check.name.c_str(),
                pass ? "ok" : "FAIL", worst, seeds);
    all_pass = all_pass && pass;
  }
  return all_pass ? 0 : 3;
}

int cmd_selftest() {
  bool ok = true;
  auto report = [&ok](const char* name, bool pass) {
    std::printf("%-32s %s\n", name, pass ? "ok" : "FAIL");
    ok = ok && pass;
  };

  {
    bool pass = true;
    for (const auto& check : builtin_gradient_checks()) {
      for (std::size_t s = 0; s < 3; ++s) pass = pass && check.run(s).pass;
    }
    report("gradient checks", pass);
  }
  {
    Rng rng(4242);
    bool pass = true;
    for (int i = 0; i < 100; ++i) {
      const std::size_t k = 1 + rng.uniform_index(6);
      const std::size_t g = 1 + rng.uniform_index(6);
      Tensor costs(k, g);
      for (std::size_t t = 0; t < costs.size(); ++t) costs[t] = rng.uniform(0.0, 10.0);
      pass = pass && std::fabs(hungarian(costs).total_cost -
                               brute_force_assignment(costs).total_cost) < 1e-9;
    }
    report("assignment vs brute force", pass);
  }
  {
    Rng rng(777);
    bool pass = true;
    for (int i = 0; i < 200; ++i) {
      Tensor x = rng.gaussian_matrix(3, 7);
      const Value y = row_softmax(Value::constant(x));
      for (std::size_t r = 0; r < 3; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < 7; ++c) s += y.val()(r, c);
        pass = pass && std::fabs(s - 1.0) <= 1e-12;
      }
    }
    report("softmax row sums", pass);
  }
  {
    ZipfSampler zipf(1.0, 18);
    Rng rng(99);
    std::vector<std::size_t> counts(18, 0);
    const int draws = 200000;
    for (int i = 0; i < draws; ++i) ++counts[zipf.sample(rng)];
    bool pass = true;
    for (std::size_t r = 0; r < 5; ++r) {
      const double expected = zipf.masses()[r] * draws;
      pass = pass && std::fabs(counts[r] - expected) / expected < 0.1;
    }
    report("zipf shape", pass);
  }
  return ok ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"language-guided mixture-of-experts laboratory"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out", out_file = "corpus.scn", toggles;
  long long seed = -1;
  std::size_t scenes = 100, gc_seeds = 10;
  double gc_tol = 1e-4;

  auto* run = app.add_subcommand("run", "train and evaluate one experiment");
  run->add_option("--config", config_path, "YAML experiment config");
  run->add_option("--out", out_dir, "report directory")->required();
  run->add_option("--seed", seed, "override model/data seeds");

  auto* ablate = app.add_subcommand("ablate", "run a component ablation sweep");
  ablate->add_option("--config", config_path, "YAML experiment config");
  ablate->add_option("--toggles", toggles,
                     "semicolon-separated rows of comma-joined toggles "
                     "(moe, router, kd, align), or `table` for the full sweep");
  ablate->add_option("--out", out_dir, "report directory")->required();
  ablate->add_option("--seed", seed, "override model/data seeds");

  auto* gen = app.add_subcommand("gen-corpus", "generate and save a scene corpus");
  gen->add_option("--config", config_path, "YAML experiment config");
  gen->add_option("--out", out_file, "output corpus file")->required();
  gen->add_option("--scenes", scenes, "number of scenes");
  gen->add_option("--seed", seed, "override the data seed");

  auto* grads = app.add_subcommand("check-grads", "finite-difference gradient audit");
  grads->add_option("--seeds", gc_seeds, "random seeds per op");
  grads->add_option("--tol", gc_tol, "relative tolerance");

  app.add_subcommand("selftest", "quick internal consistency checks");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path, out_dir, seed);
    if (ablate->parsed()) return cmd_ablate(config_path, toggles, out_dir, seed);
    if (gen->parsed()) return cmd_gen_corpus(config_path, out_file, scenes, seed);
    if (grads->parsed()) return cmd_check_grads(gc_seeds, gc_tol);
    return cmd_selftest();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
