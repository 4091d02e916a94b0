#include "moelab/report.hpp"

#include <json.hpp>

#include <sstream>

#include "moelab/fsutil.hpp"

namespace moelab {

namespace {

using nlohmann::json;

json config_json(const ExperimentConfig& cfg) {
  json scene;
  scene["classes"] = cfg.scene.vocab.size();
  scene["semantic_groups"] = cfg.scene.vocab.group_count();
  json names = json::array();
  json groups = json::array();
  for (const auto& e : cfg.scene.vocab.entries()) {
    names.push_back(e.name);
    groups.push_back(e.semantic_group);
  }
  scene["class_names"] = names;
  scene["class_groups"] = groups;
  scene["zipf_exponent"] = cfg.scene.zipf_exponent;
  scene["objects_min"] = cfg.scene.objects_min;
  scene["objects_max"] = cfg.scene.objects_max;
  scene["modes_per_class"] = cfg.scene.modes_per_class;
  json confusion = json::array();
  for (const auto& cp : cfg.scene.confusion) {
    confusion.push_back(
        {{"a", cp.class_a}, {"b", cp.class_b}, {"cosine", cp.cosine}, {"fraction", cp.fraction}});
  }
  scene["confusion_pairs"] = confusion;
  scene["obs_dim"] = cfg.scene.obs_dim;
  scene["obs_noise"] = cfg.scene.obs_noise;
  scene["obs_group_share"] = cfg.scene.obs_group_share;
  scene["distractors"] = cfg.scene.distractors;
  scene["world_extent"] = cfg.scene.world_extent;
  scene["inner_radius"] = cfg.scene.inner_radius;
  scene["min_separation"] = cfg.scene.min_separation;
  scene["provider_seed"] = cfg.scene.provider_seed;
  scene["lang_dim"] = cfg.scene.lang_dim;
  scene["intra_group_cos"] = cfg.scene.intra_group_cos;
  scene["teacher_noise"] = cfg.scene.teacher_noise;
  scene["mode_offset_scale"] = cfg.scene.mode_offset_scale;
  scene["pos_encoding_scale"] = cfg.scene.pos_encoding_scale;
  scene["embeddings_file"] = cfg.scene.embeddings_file;
  scene["cameras"] = cfg.scene.rig.cameras;
  scene["camera_focal"] = cfg.scene.rig.focal;
  scene["image_width"] = cfg.scene.rig.width;
  scene["image_height"] = cfg.scene.rig.height;
  scene["camera_height"] = cfg.scene.rig.mount_height;
  scene["camera_ring_radius"] = cfg.scene.rig.ring_radius;

  json model;
  model["layers"] = cfg.model.layers;
  model["query_dim"] = cfg.model.query_dim;
  model["lang_dim"] = cfg.model.lang_dim;
  model["experts"] = cfg.model.experts;
  model["top_k"] = cfg.model.top_k;
  model["routed_hidden"] = cfg.model.routed_hidden;
  model["shared_hidden"] = cfg.model.shared_hidden;
  model["ffn_hidden"] = cfg.model.ffn_hidden;
  model["use_moe"] = cfg.model.use_moe;
  model["renormalize_top_k"] = cfg.model.renormalize_top_k;
  model["router_mode"] = router_mode_name(cfg.model.router_mode);
  model["lmoe_layers"] = cfg.model.lmoe_layers;

  json loss;
  loss["contrast_weight"] = cfg.loss.contrast_weight;
  loss["kd_weight"] = cfg.loss.kd_weight;
  loss["balance_weight"] = cfg.loss.balance_weight;
  loss["center_weight"] = cfg.loss.center_weight;
  loss["use_kd"] = cfg.loss.use_kd;
  loss["use_alignment"] = cfg.loss.use_alignment;
  loss["kd_tau"] = cfg.loss.kd_tau;
  loss["kd_direction"] =
      cfg.loss.kd_direction == KLDirection::kTeacherRef ? "teacher_ref" : "student_ref";
  loss["kd_per_view_grouping"] = cfg.loss.kd_per_view_grouping;
  loss["focal_alpha"] = cfg.loss.focal_alpha;
  loss["focal_gamma"] = cfg.loss.focal_gamma;

  json match;
  match["lambda_cls"] = cfg.match.lambda_cls;
  match["lambda_center"] = cfg.match.lambda_center;
  match["focal_cost"] = cfg.match.focal_cost;

  json train;
  train["steps"] = cfg.train.steps;
  train["batch_scenes"] = cfg.train.batch_scenes;
  train["lr"] = cfg.train.lr;
  train["beta1"] = cfg.train.beta1;
  train["beta2"] = cfg.train.beta2;
  train["adam_eps"] = cfg.train.adam_eps;
  train["eval_scenes"] = cfg.train.eval_scenes;
  train["eval_every"] = cfg.train.eval_every;
  train["model_seed"] = cfg.train.model_seed;
  train["data_seed"] = cfg.train.data_seed;

  return json{{"cfg_version", kConfigVersion}, {"scene", scene},   {"model", model},
              {"loss", loss},                  {"match", match},   {"train", train}};
}

json group_json(const GroupAccuracy& g) {
  json out;
  out["total"] = g.total;
  out["correct"] = g.correct;
  if (g.total > 0) out["accuracy"] = g.accuracy();
  else out["accuracy"] = nullptr;
  return out;
}

json eval_json(const EvalResult& eval, const ExperimentConfig& cfg,
               const std::vector<FrequencyGroup>& groups) {
  json m;
  m["matched"] = eval.matched;
  m["correct"] = eval.correct;
  m["overall_accuracy"] = eval.overall_accuracy;
  m["mean_center_l1"] = eval.mean_center_l1;
  m["routing_purity"] = eval.routing_purity;
  json per_class = json::array();
  for (std::size_t c = 0; c < eval.per_class_total.size(); ++c) {
    json row;
    row["id"] = c;
    row["name"] = cfg.scene.vocab.entry(c).name;
    row["group"] = c < groups.size() ? frequency_group_name(groups[c]) : "?";
    row["total"] = eval.per_class_total[c];
    row["correct"] = eval.per_class_correct[c];
    if (eval.per_class_total[c] > 0)
      row["accuracy"] = static_cast<double>(eval.per_class_correct[c]) /
                        static_cast<double>(eval.per_class_total[c]);
    else row["accuracy"] = nullptr;
    per_class.push_back(row);
  }
  m["per_class"] = per_class;
  m["group_accuracy"] = {{"Many", group_json(eval.many)},
                         {"Medium", group_json(eval.medium)},
                         {"Few", group_json(eval.few)}};
  return m;
}

}  // namespace

std::string metrics_json(const RunResult& result) {
  json root;
  root["cfg_version"] = kConfigVersion;
  root["config"] = config_json(result.config);
  root["param_count"] = result.param_count;
  root["prompts"] = result.prompts;
  root["seeds"] = {{"model", result.config.train.model_seed},
                   {"data", result.config.train.data_seed}};

  json corpus;
  corpus["scenes"] = result.train_stats.scenes;
  corpus["instances"] = result.train_stats.instances;
  corpus["class_counts"] = result.train_stats.class_counts;
  corpus["cut_many"] = result.train_stats.cut_many;
  corpus["cut_few"] = result.train_stats.cut_few;
  json group_names = json::array();
  for (const auto g : result.train_stats.groups) group_names.push_back(frequency_group_name(g));
  corpus["groups"] = group_names;
  root["train_corpus"] = corpus;

  root["metrics"] = eval_json(result.eval, result.config, result.train_stats.groups);

  json util = json::array();
  for (std::size_t i = 0; i < result.eval.utilization.size(); ++i) {
    json u;
    u["layer"] = result.eval.routing_layer_ids[i];
    u["fraction"] = result.eval.utilization[i].fraction;
    u["mean_prob"] = result.eval.utilization[i].mean_prob;
    util.push_back(u);
  }
  root["expert_utilization"] = util;

  json history = json::array();
  for (const auto& [step, eval] : result.eval_history) {
    json h;
    h["step"] = step;
    h["overall_accuracy"] = eval.overall_accuracy;
    h["many_accuracy"] = eval.many.accuracy();
    h["medium_accuracy"] = eval.medium.accuracy();
    h["few_accuracy"] = eval.few.accuracy();
    h["mean_center_l1"] = eval.mean_center_l1;
    history.push_back(h);
  }
  root["eval_history"] = history;

  return root.dump(2) + "\n";
}

std::string loss_trace_csv(const RunResult& result) {
  std::ostringstream out;
  out << "step,contrast,kd,balance,center,total\n";
  for (const auto& row : result.trace) {
    out << row.step << "," << format_double(row.loss.contrast) << ","
        << format_double(row.loss.kd) << "," << format_double(row.loss.balance) << ","
        << format_double(row.loss.center) << "," << format_double(row.loss.total) << "\n";
  }
  return out.str();
}

std::string embeddings_csv(const RunResult& result) {
  std::ostringstream out;
  out << "class_id";
  for (std::size_t j = 0; j < result.config.model.lang_dim; ++j) out << ",q_" << j;
  out << "\n";
  for (const auto& [class_id, row] : result.eval.head_embeddings) {
    out << class_id;
    for (double v : row) out << "," << format_double(v);
    out << "\n";
  }
  return out.str();
}

std::vector<std::pair<std::string, std::string>> routing_csvs(const RunResult& result) {
  std::vector<std::pair<std::string, std::string>> files;
  const auto& cfg = result.config;

  auto header = [&cfg]() {
    std::ostringstream out;
    out << "class";
    for (std::size_t e = 0; e < cfg.model.experts; ++e) out << ",expert_" << e;
    out << "\n";
    return out.str();
  };

  // Emitted counts when the evaluation produced them, headers otherwise.
  if (!result.eval.routing_counts.empty()) {
    for (std::size_t i = 0; i < result.eval.routing_counts.size(); ++i) {
      std::ostringstream body;
      body << header();
      const Tensor& counts = result.eval.routing_counts[i];
      for (std::size_t c = 0; c < counts.rows(); ++c) {
        body << cfg.scene.vocab.entry(c).name;
        for (std::size_t e = 0; e < counts.cols(); ++e)
          body << "," << static_cast<long long>(counts(c, e));
        body << "\n";
      }
      std::ostringstream stem;
      stem << "routing_layer" << result.eval.routing_layer_ids[i];
      files.emplace_back(stem.str(), body.str());
    }
    return files;
  }
  for (std::size_t l = 0; l < cfg.model.layers; ++l) {
    if (!cfg.model.layer_has_moe(l)) continue;
    std::ostringstream stem;
    stem << "routing_layer" << l;
    files.emplace_back(stem.str(), header());
  }
  return files;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream out;
  out << "row,toggles,overall_accuracy,many_accuracy,medium_accuracy,few_accuracy,"
         "mean_center_l1,delta_overall,delta_many,delta_medium,delta_few\n";
  if (rows.empty()) return out.str();
  const EvalResult& base = rows.front().result.eval;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const EvalResult& e = rows[i].result.eval;
    out << i << "," << rows[i].label << "," << format_double(e.overall_accuracy) << ","
        << format_double(e.many.accuracy()) << "," << format_double(e.medium.accuracy()) << ","
        << format_double(e.few.accuracy()) << "," << format_double(e.mean_center_l1) << ","
        << format_double(e.overall_accuracy - base.overall_accuracy) << ","
        << format_double(e.many.accuracy() - base.many.accuracy()) << ","
        << format_double(e.medium.accuracy() - base.medium.accuracy()) << ","
        << format_double(e.few.accuracy() - base.few.accuracy()) << "\n";
  }
  return out.str();
}

void emit_reports(const RunResult& result, const std::string& out_dir) {
  ensure_directory(out_dir);
  write_text_file(out_dir + "/metrics.json", metrics_json(result));
  write_text_file(out_dir + "/loss_trace.csv", loss_trace_csv(result));
  write_text_file(out_dir + "/embeddings_final.csv", embeddings_csv(result));
  for (const auto& [stem, body] : routing_csvs(result)) {
    write_text_file(out_dir + "/" + stem + ".csv", body);
  }
}

void emit_ablation_reports(const std::vector<AblationRow>& rows, const std::string& out_dir) {
  ensure_directory(out_dir);
  write_text_file(out_dir + "/ablation.csv", ablation_csv(rows));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::ostringstream sub;
    sub << out_dir << "/row" << i << "_" << rows[i].label;
    emit_reports(rows[i].result, sub.str());
  }
}

}  // namespace moelab
