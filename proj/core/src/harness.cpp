#include "moelab/harness.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "moelab/geometry.hpp"
#include "moelab/objectives.hpp"

namespace moelab {

namespace {

std::vector<int> scene_gt_classes(const Scene& scene) {
  std::vector<int> classes;
  classes.reserve(scene.instances.size());
  for (const auto& inst : scene.instances) classes.push_back(inst.box.class_id);
  return classes;
}

Tensor scene_gt_centers(const Scene& scene) {
  Tensor centers(scene.instances.size(), 3);
  for (std::size_t g = 0; g < scene.instances.size(); ++g)
    for (std::size_t j = 0; j < 3; ++j) centers(g, j) = scene.instances[g].box.center[j];
  return centers;
}

}  // namespace

SceneEvalOutcome evaluate_scene_predictions(const Scene& scene, const ScenePredictions& preds,
                                            const MatchConfig& match) {
  SceneEvalOutcome out;
  const std::size_t k = preds.class_probs.rows();
  out.query_labels.assign(k, -1);
  out.gt_predicted.assign(scene.instances.size(), -1);
  if (scene.instances.empty()) return out;

  const std::vector<int> gt_classes = scene_gt_classes(scene);
  const Tensor gt_centers = scene_gt_centers(scene);
  const CostMatrix cost =
      build_cost(preds.class_probs, preds.centers, gt_classes, gt_centers, match.lambda_cls,
                 match.lambda_center, match.focal_cost);
  out.assignment = hungarian(cost);

  for (const auto& [q, g] : out.assignment.pairs) {
    out.query_labels[q] = gt_classes[g];
    std::size_t best = 0;
    for (std::size_t c = 1; c < preds.class_probs.cols(); ++c) {
      if (preds.class_probs(q, c) > preds.class_probs(q, best)) best = c;
    }
    out.gt_predicted[g] = static_cast<int>(best);
    for (std::size_t j = 0; j < 3; ++j)
      out.center_l1_sum += std::fabs(preds.centers(q, j) - gt_centers(g, j));
    ++out.matched;
  }
  return out;
}

EvalAggregator::EvalAggregator(std::size_t n_classes, std::vector<FrequencyGroup> groups)
    : groups_(std::move(groups)) {
  if (groups_.size() != n_classes)
    throw std::invalid_argument("eval aggregator: group labels must cover every class");
  acc_.per_class_total.assign(n_classes, 0);
  acc_.per_class_correct.assign(n_classes, 0);
}

void EvalAggregator::add(const Scene& scene, const SceneEvalOutcome& outcome) {
  for (std::size_t g = 0; g < scene.instances.size(); ++g) {
    const int truth = scene.instances[g].box.class_id;
    const int pred = outcome.gt_predicted[g];
    if (pred < 0) continue;  // unmatched ground truth (k < G only)
    ++acc_.matched;
    ++acc_.per_class_total[truth];
    const bool ok = pred == truth;
    if (ok) {
      ++acc_.correct;
      ++acc_.per_class_correct[truth];
    }
    GroupAccuracy& bucket = groups_[truth] == FrequencyGroup::kMany   ? acc_.many
                            : groups_[truth] == FrequencyGroup::kFew ? acc_.few
                                                                     : acc_.medium;
    ++bucket.total;
    if (ok) ++bucket.correct;
  }
  acc_.mean_center_l1 += outcome.center_l1_sum;
}

EvalResult EvalAggregator::finish() const {
  EvalResult r = acc_;
  r.overall_accuracy =
      r.matched == 0 ? 0.0 : static_cast<double>(r.correct) / static_cast<double>(r.matched);
  r.mean_center_l1 = r.matched == 0 ? 0.0 : r.mean_center_l1 / static_cast<double>(r.matched);
  return r;
}

EvalResult evaluate(const Model& model, const std::vector<Scene>& scenes,
                    const Tensor& p_language, const MatchConfig& match,
                    const std::vector<FrequencyGroup>& groups) {
  const std::size_t n = p_language.rows();
  EvalAggregator agg(n, groups);

  struct LayerAccum {
    std::size_t layer_id = 0;
    Tensor counts;
    std::vector<double> sel;
    std::vector<double> prob;
    std::size_t queries = 0;
  };
  std::vector<LayerAccum> layer_stats;
  std::vector<std::pair<int, std::vector<double>>> head_rows;

  for (const auto& scene : scenes) {
    const ModelForward fwd = model.forward(scene.observations, p_language);
    ScenePredictions preds{sigmoid_tensor(fwd.logits.val()), fwd.centers.val()};
    const SceneEvalOutcome outcome = evaluate_scene_predictions(scene, preds, match);
    agg.add(scene, outcome);

    if (layer_stats.empty() && !fwd.routing.empty()) {
      layer_stats.resize(fwd.routing.size());
      for (std::size_t i = 0; i < fwd.routing.size(); ++i) {
        layer_stats[i].layer_id = fwd.routing_layers[i];
        layer_stats[i].counts = Tensor(n, fwd.routing[i].num_experts());
        layer_stats[i].sel.assign(fwd.routing[i].num_experts(), 0.0);
        layer_stats[i].prob.assign(fwd.routing[i].num_experts(), 0.0);
      }
    }
    for (std::size_t i = 0; i < fwd.routing.size(); ++i) {
      const RoutingDecision& dec = fwd.routing[i];
      accumulate_routing_matrix(layer_stats[i].counts, dec, outcome.query_labels);
      layer_stats[i].queries += dec.num_queries();
      for (const auto& row : dec.indices)
        for (std::size_t e : row) layer_stats[i].sel[e] += 1.0;
      const Tensor& w = dec.weights.val();
      for (std::size_t q = 0; q < w.rows(); ++q)
        for (std::size_t e = 0; e < w.cols(); ++e) layer_stats[i].prob[e] += w(q, e);
    }

    for (std::size_t q = 0; q < outcome.query_labels.size(); ++q) {
      if (outcome.query_labels[q] < 0) continue;
      std::vector<double> row(fwd.head_q_hat.val().cols());
      for (std::size_t j = 0; j < row.size(); ++j) row[j] = fwd.head_q_hat.val()(q, j);
      head_rows.emplace_back(outcome.query_labels[q], std::move(row));
    }
  }

  EvalResult result = agg.finish();
  double purity_sum = 0.0;
  for (auto& ls : layer_stats) {
    result.routing_layer_ids.push_back(ls.layer_id);
    purity_sum += mean_routing_purity(ls.counts);
    result.routing_counts.push_back(std::move(ls.counts));
    ExpertUtilization u;
    u.fraction = ls.sel;
    u.mean_prob = ls.prob;
    if (ls.queries > 0) {
      for (auto& x : u.fraction) x /= static_cast<double>(ls.queries);
      for (auto& x : u.mean_prob) x /= static_cast<double>(ls.queries);
    }
    result.utilization.push_back(std::move(u));
  }
  result.routing_purity =
      layer_stats.empty() ? 0.0 : purity_sum / static_cast<double>(layer_stats.size());
  result.head_embeddings = std::move(head_rows);
  return result;
}

Value batch_loss(const Model& model, const std::vector<Scene>& batch, const Tensor& p_language,
                 const ExperimentConfig& cfg, StepLoss* breakdown) {
  if (batch.empty()) throw std::invalid_argument("batch_loss: empty batch");
  const LossConfig& lc = cfg.loss;

  Value contrast_acc, center_acc;
  std::size_t center_scenes = 0;
  std::vector<std::vector<const RoutingDecision*>> decisions_per_layer;
  std::vector<ModelForward> forwards;
  forwards.reserve(batch.size());
  std::vector<KdSample> kd_samples;
  std::size_t object_counter = 0;

  const Tensor extrinsics =
      batch.front().rig.empty() ? Tensor() : flatten_extrinsics(batch.front().rig);

  for (const auto& scene : batch) {
    forwards.push_back(model.forward(scene.observations, p_language));
    const ModelForward& fwd = forwards.back();
    const std::size_t k = scene.num_queries();

    // Hungarian targets from detached predictions.
    const std::vector<int> gt_classes = scene_gt_classes(scene);
    const Tensor gt_centers = scene_gt_centers(scene);
    Assignment assignment;
    Tensor targets(k, p_language.rows());
    if (!scene.instances.empty()) {
      const CostMatrix cost = build_cost(sigmoid_tensor(fwd.logits.val()), fwd.centers.val(),
                                         gt_classes, gt_centers, cfg.match.lambda_cls,
                                         cfg.match.lambda_center, cfg.match.focal_cost);
      assignment = hungarian(cost);
      targets = target_matrix(assignment, gt_classes, k, p_language.rows());
    }

    // Focal classification on the head logits; auxiliary alignment terms add
    // one focal loss per decoder layer on that layer's q_hat.
    Value contrast = sigmoid_focal_mean(fwd.logits, targets, lc.focal_alpha, lc.focal_gamma);
    std::size_t terms = 1;
    if (lc.use_alignment) {
      for (const Value& q_hat : fwd.q_hats) {
        contrast = add(contrast, contrastive_loss(q_hat, p_language, targets, lc.focal_alpha,
                                                  lc.focal_gamma));
        ++terms;
      }
    }
    if (terms > 1) contrast = scale(contrast, 1.0 / static_cast<double>(terms));
    contrast_acc = contrast_acc.defined() ? add(contrast_acc, contrast) : contrast;

    if (!assignment.pairs.empty()) {
      std::vector<std::size_t> matched_queries;
      Tensor matched_centers(assignment.pairs.size(), 3);
      for (std::size_t i = 0; i < assignment.pairs.size(); ++i) {
        matched_queries.push_back(assignment.pairs[i].first);
        for (std::size_t j = 0; j < 3; ++j)
          matched_centers(i, j) = gt_centers(assignment.pairs[i].second, j);
      }
      const Value center =
          abs_diff_mean(gather_rows(fwd.centers, matched_queries), matched_centers);
      center_acc = center_acc.defined() ? add(center_acc, center) : center;
      ++center_scenes;

      if (lc.use_kd && lc.kd_weight > 0.0 && !scene.rig.empty()) {
        const std::vector<Value> camera_queries =
            camera_align(fwd.q_bar, extrinsics, model.distill());
        for (const auto& [q, g] : assignment.pairs) {
          const SceneInstance& inst = scene.instances[g];
          VisualEmbedding teacher{inst.teacher, inst.box.class_id, inst.mode_id};
          std::vector<double> teacher_row;
          bool teacher_ready = false;
          for (std::size_t c = 0; c < scene.rig.size(); ++c) {
            if (!crop_rect(inst.box, scene.rig[c], c).has_value()) continue;
            if (!teacher_ready) {
              teacher_row = teacher_similarity_row(teacher, p_language);
              teacher_ready = true;
            }
            kd_samples.push_back(
                {student_similarity_row(camera_queries[c], q, p_language), teacher_row,
                 object_counter});
          }
          ++object_counter;
        }
      }
    }

    if (decisions_per_layer.empty() && !fwd.routing.empty())
      decisions_per_layer.resize(fwd.routing.size());
    for (std::size_t i = 0; i < fwd.routing.size(); ++i)
      decisions_per_layer[i].push_back(&fwd.routing[i]);
  }

  const double inv_scenes = 1.0 / static_cast<double>(batch.size());
  StepLoss out;

  Value total;
  auto add_term = [&total](const Value& term) {
    total = total.defined() ? add(total, term) : term;
  };

  const Value contrast_mean = scale(contrast_acc, inv_scenes);
  out.contrast = contrast_mean.val().item();
  if (lc.contrast_weight > 0.0) add_term(scale(contrast_mean, lc.contrast_weight));

  if (center_acc.defined()) {
    const Value center_mean = scale(center_acc, 1.0 / static_cast<double>(center_scenes));
    out.center = center_mean.val().item();
    if (lc.center_weight > 0.0) add_term(scale(center_mean, lc.center_weight));
  }

  if (lc.use_kd) {
    const KdLossResult kd = lc.kd_per_view_grouping
                                ? kd_loss_grouped(kd_samples, lc.kd_tau, lc.kd_direction)
                                : kd_loss(kd_samples, lc.kd_tau, lc.kd_direction);
    out.kd = kd.loss.val().item();
    out.kd_empty = kd.empty;
    if (lc.kd_weight > 0.0 && !kd.empty) add_term(scale(kd.loss, lc.kd_weight));
  }

  if (!decisions_per_layer.empty()) {
    Value balance_acc;
    for (const auto& layer_decisions : decisions_per_layer) {
      const Value b = balance_loss(layer_decisions, cfg.model.experts);
      balance_acc = balance_acc.defined() ? add(balance_acc, b) : b;
    }
    const Value balance_mean =
        scale(balance_acc, 1.0 / static_cast<double>(decisions_per_layer.size()));
    out.balance = balance_mean.val().item();
    if (lc.balance_weight > 0.0) add_term(scale(balance_mean, lc.balance_weight));
  }

  if (total.defined()) out.total = total.val().item();
  if (breakdown != nullptr) *breakdown = out;
  return total;
}

StepLoss training_step(Model& model, const std::vector<Scene>& batch, const Tensor& p_language,
                       const ExperimentConfig& cfg, Adam& adam) {
  adam.zero_grad();
  StepLoss breakdown;
  const Value total = batch_loss(model, batch, p_language, cfg, &breakdown);
  if (total.defined()) {
    total.backward();
    adam.step();
  }
  return breakdown;
}

RunResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  RunResult result;
  result.config = cfg;

  const SceneGenerator gen(cfg.scene);
  const Tensor& p_language = gen.language().matrix;
  const std::size_t n = cfg.scene.vocab.size();

  Model model(cfg.model, n, cfg.train.model_seed);
  result.param_count = model.param_count();
  result.prompts = prompt_strings(cfg.scene.vocab, kDefaultPromptTemplate);

  Adam adam(model.parameters(),
            {cfg.train.lr, cfg.train.beta1, cfg.train.beta2, cfg.train.adam_eps});

  std::vector<std::size_t> train_counts(n, 0);
  std::size_t train_instances = 0;
  std::vector<Scene> eval_scenes =
      generate_corpus(gen, cfg.train.eval_scenes, cfg.train.data_seed + 1000000);

  auto groups_from_counts = [&](const std::vector<std::size_t>& counts) {
    const auto [cut_many, cut_few] = default_group_cuts(counts);
    return frequency_groups(counts, cut_many, cut_few);
  };

  for (std::size_t step = 0; step < cfg.train.steps; ++step) {
    std::vector<Scene> batch;
    batch.reserve(cfg.train.batch_scenes);
    for (std::size_t j = 0; j < cfg.train.batch_scenes; ++j) {
      batch.push_back(gen.generate(cfg.train.data_seed + step * cfg.train.batch_scenes + j));
      for (const auto& inst : batch.back().instances) {
        ++train_counts[static_cast<std::size_t>(inst.box.class_id)];
        ++train_instances;
      }
    }
    TraceRow row;
    row.step = step + 1;
    row.loss = training_step(model, batch, p_language, cfg, adam);
    result.trace.push_back(row);

    if (cfg.train.eval_every > 0 && (step + 1) % cfg.train.eval_every == 0 &&
        step + 1 < cfg.train.steps) {
      result.eval_history.emplace_back(
          step + 1,
          evaluate(model, eval_scenes, p_language, cfg.match, groups_from_counts(train_counts)));
    }
  }

  result.train_stats.class_counts = train_counts;
  result.train_stats.scenes = cfg.train.steps * cfg.train.batch_scenes;
  result.train_stats.instances = train_instances;
  const auto [cut_many, cut_few] = default_group_cuts(train_counts);
  result.train_stats.cut_many = cut_many;
  result.train_stats.cut_few = cut_few;
  result.train_stats.groups = frequency_groups(train_counts, cut_many, cut_few);

  result.eval =
      evaluate(model, eval_scenes, p_language, cfg.match, result.train_stats.groups);
  return result;
}

AblationToggles parse_toggles(const std::string& row) {
  AblationToggles t;
  std::string cur;
  for (char c : row + ",") {
    if (c == ',') {
      if (cur.empty()) continue;
      if (cur == "moe") t.moe = true;
      else if (cur == "router") { t.moe = true; t.guided_router = true; }
      else if (cur == "kd") t.kd = true;
      else if (cur == "align") t.alignment = true;
      else throw ConfigError("unknown ablation toggle `" + cur +
                             "` (expected moe, router, kd, align)");
      cur.clear();
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      cur.push_back(c);
    }
  }
  return t;
}

std::string toggle_label(const AblationToggles& t) {
  std::string label;
  auto append = [&label](const char* name) {
    if (!label.empty()) label += "+";
    label += name;
  };
  if (t.moe) append("moe");
  if (t.guided_router) append("router");
  if (t.kd) append("kd");
  if (t.alignment) append("align");
  return label.empty() ? "baseline" : label;
}

ExperimentConfig apply_toggles(ExperimentConfig base, const AblationToggles& t) {
  base.model.use_moe = t.moe;
  base.model.router_mode =
      t.guided_router ? RouterMode::kLanguageGuided : RouterMode::kFeatureRouted;
  base.loss.use_kd = t.kd;
  base.loss.use_alignment = t.alignment;
  return base;
}

std::vector<AblationRow> ablation_run(const ExperimentConfig& base,
                                      const std::vector<std::string>& toggle_rows) {
  std::vector<AblationRow> rows;
  rows.push_back({"baseline", AblationToggles{}, run_experiment(apply_toggles(base, {}))});
  for (const auto& spec : toggle_rows) {
    const AblationToggles t = parse_toggles(spec);
    rows.push_back({toggle_label(t), t, run_experiment(apply_toggles(base, t))});
  }
  return rows;
}

std::vector<std::string> component_sweep_rows() {
  return {"kd", "moe", "moe,router", "moe,router,kd", "moe,router,kd,align"};
}

ExperimentConfig preset_specialization(std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.scene.vocab = ClassVocabulary::synthetic(8, 2);
  cfg.scene.zipf_exponent = 0.7;
  cfg.scene.confusion.clear();
  cfg.scene.obs_dim = 32;
  cfg.scene.lang_dim = 32;
  cfg.scene.obs_noise = 0.08;
  cfg.scene.distractors = 6;
  cfg.scene.modes_per_class = 1;
  cfg.scene.intra_group_cos = 0.9;
  cfg.scene.teacher_noise = 0.1;
  cfg.scene.mode_offset_scale = 0.25;
  cfg.scene.provider_seed = mix_seed(seed, 0xa11ceULL);

  cfg.model.query_dim = 32;
  cfg.model.lang_dim = 32;
  cfg.model.experts = 4;
  cfg.model.top_k = 1;
  cfg.model.routed_hidden = 64;
  cfg.model.shared_hidden = 128;
  cfg.model.ffn_hidden = 256;

  cfg.loss.use_kd = false;

  cfg.train.steps = 2000;
  cfg.train.eval_scenes = 200;
  cfg.train.model_seed = seed;
  cfg.train.data_seed = mix_seed(seed, 0xda7aULL);
  return cfg;
}

ExperimentConfig preset_longtail(std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.scene.confusion = default_confusion_pairs();
  cfg.scene.zipf_exponent = 1.0;
  cfg.scene.obs_dim = 32;
  cfg.scene.lang_dim = 32;
  cfg.scene.obs_noise = 0.25;
  cfg.scene.teacher_noise = 0.1;
  cfg.scene.provider_seed = mix_seed(seed, 0xbee5ULL);

  cfg.model.query_dim = 32;
  cfg.model.lang_dim = 32;
  cfg.model.routed_hidden = 64;
  cfg.model.shared_hidden = 128;
  cfg.model.ffn_hidden = 256;

  cfg.train.steps = 1500;
  cfg.train.eval_scenes = 300;
  cfg.train.model_seed = seed;
  cfg.train.data_seed = mix_seed(seed, 0xfeedULL);
  return cfg;
}

}  // namespace moelab
