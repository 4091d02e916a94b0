#pragma once

#include <string>
#include <utility>
#include <vector>

#include "moelab/adam.hpp"
#include "moelab/config.hpp"
#include "moelab/matching.hpp"
#include "moelab/model.hpp"
#include "moelab/scenegen.hpp"

namespace moelab {

struct GroupAccuracy {
  std::size_t total = 0;
  std::size_t correct = 0;
  double accuracy() const {
    return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
  }
};

struct EvalResult {
  std::size_t matched = 0;
  std::size_t correct = 0;
  double overall_accuracy = 0.0;
  std::vector<std::size_t> per_class_total;
  std::vector<std::size_t> per_class_correct;
  GroupAccuracy many, medium, few;
  double mean_center_l1 = 0.0;
  std::vector<std::size_t> routing_layer_ids;  // model layer index per entry below
  std::vector<Tensor> routing_counts;          // class x expert selection counts
  std::vector<ExpertUtilization> utilization;
  double routing_purity = 0.0;  // mean over MoE layers of mean per-class purity
  std::vector<std::pair<int, std::vector<double>>> head_embeddings;  // (class, q_hat row)
};

struct StepLoss {
  double contrast = 0.0;
  double kd = 0.0;
  double balance = 0.0;
  double center = 0.0;
  double total = 0.0;
  bool kd_empty = false;
};

struct TraceRow {
  std::size_t step = 0;
  StepLoss loss;
};

struct RunResult {
  ExperimentConfig config;
  CorpusStats train_stats;
  EvalResult eval;
  std::vector<TraceRow> trace;
  std::vector<std::pair<std::size_t, EvalResult>> eval_history;
  std::size_t param_count = 0;
  std::vector<std::string> prompts;
};

/// Detached per-scene predictions; probabilities already in [0,1].
struct ScenePredictions {
  Tensor class_probs;  // k x n
  Tensor centers;      // k x 3
};

struct SceneEvalOutcome {
  Assignment assignment;
  std::vector<int> query_labels;  // per query: matched gt class, or -1
  std::vector<int> gt_predicted;  // per gt: argmax class of its matched query, or -1
  double center_l1_sum = 0.0;
  std::size_t matched = 0;
};

/// Hungarian-matched scoring of one scene. Pure function of (scene, preds),
/// so oracle and random predictions can drive it directly in tests.
SceneEvalOutcome evaluate_scene_predictions(const Scene& scene, const ScenePredictions& preds,
                                            const MatchConfig& match);

/// Merges per-scene outcomes into per-class / per-group accuracy.
class EvalAggregator {
 public:
  EvalAggregator(std::size_t n_classes, std::vector<FrequencyGroup> groups);
  void add(const Scene& scene, const SceneEvalOutcome& outcome);
  EvalResult finish() const;

 private:
  std::vector<FrequencyGroup> groups_;
  EvalResult acc_;
};

/// Full evaluation: forward every scene with frozen parameters, match, score,
/// and accumulate routing matrices, expert utilization and head embeddings.
EvalResult evaluate(const Model& model, const std::vector<Scene>& scenes,
                    const Tensor& p_language, const MatchConfig& match,
                    const std::vector<FrequencyGroup>& groups);

/// The combined training objective over one scene batch: focal head
/// classification plus auxiliary alignment terms, distillation over matched
/// crops, the balance loss over the batch routing, and the center L1 term.
/// Matching targets are rebuilt from the detached predictions each call.
/// Undefined (empty) when every term is switched off.
Value batch_loss(const Model& model, const std::vector<Scene>& batch, const Tensor& p_language,
                 const ExperimentConfig& cfg, StepLoss* breakdown = nullptr);

/// One optimizer step: batch_loss, backprop, Adam update.
StepLoss training_step(Model& model, const std::vector<Scene>& batch, const Tensor& p_language,
                       const ExperimentConfig& cfg, Adam& adam);

RunResult run_experiment(const ExperimentConfig& cfg);

// --- ablation machinery -----------------------------------------------------

struct AblationToggles {
  bool moe = false;
  bool guided_router = false;
  bool kd = false;
  bool alignment = false;
};

/// Comma-joined toggle names: subset of {moe, router, kd, align}; "router"
/// implies "moe".
AblationToggles parse_toggles(const std::string& row);
std::string toggle_label(const AblationToggles& t);
ExperimentConfig apply_toggles(ExperimentConfig base, const AblationToggles& t);

struct AblationRow {
  std::string label;
  AblationToggles toggles;
  RunResult result;
};

/// Baseline row first, then one row per toggle spec, all with the base
/// config's seeds.
std::vector<AblationRow> ablation_run(const ExperimentConfig& base,
                                      const std::vector<std::string>& toggle_rows);

/// The component-sweep row set: distillation alone, vanilla MoE, guided
/// router, +distillation, +alignment.
std::vector<std::string> component_sweep_rows();

// --- preset experiment configs ----------------------------------------------

/// Routing-specialization scenario: two semantic groups, top-1 routing,
/// small expert dims so five paired arms train in seconds each.
ExperimentConfig preset_specialization(std::uint64_t seed);

/// Long-tail direction scenario: the default 18-class confusion corpus at
/// reduced model width.
ExperimentConfig preset_longtail(std::uint64_t seed);

}  // namespace moelab
