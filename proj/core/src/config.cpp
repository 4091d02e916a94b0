#include "moelab/config.hpp"

#include <yaml-cpp/yaml.h>

#include <set>
#include <sstream>

#include "moelab/fsutil.hpp"

namespace moelab {

const char* router_mode_name(RouterMode m) {
  return m == RouterMode::kLanguageGuided ? "language_guided" : "feature_routed";
}

RouterMode parse_router_mode(const std::string& s) {
  if (s == "language_guided") return RouterMode::kLanguageGuided;
  if (s == "feature_routed") return RouterMode::kFeatureRouted;
  throw ConfigError("unknown router_mode `" + s +
                    "` (expected language_guided or feature_routed)");
}

namespace {

std::vector<int> parse_layer_flags(const std::string& spec) {
  std::vector<int> flags;
  std::string cur;
  for (char c : spec + ",") {
    if (c == ',') {
      if (cur.empty()) continue;
      if (cur != "0" && cur != "1")
        throw ConfigError("lmoe_layers entries must be 0 or 1, got `" + cur + "`");
      flags.push_back(cur == "1" ? 1 : 0);
      cur.clear();
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      cur.push_back(c);
    }
  }
  return flags;
}

}  // namespace

bool ModelConfig::layer_has_moe(std::size_t layer) const {
  if (!use_moe) return false;
  if (lmoe_layers.empty()) return true;
  const std::vector<int> flags = parse_layer_flags(lmoe_layers);
  if (layer >= flags.size()) return true;
  return flags[layer] == 1;
}

void ExperimentConfig::validate() const {
  scene.validate();
  if (model.layers < 1) throw ConfigError("model.layers must be >= 1");
  if (model.query_dim != scene.obs_dim) {
    std::ostringstream msg;
    msg << "model.query_dim (" << model.query_dim << ") must equal scene.obs_dim ("
        << scene.obs_dim << "): the model consumes observation rows directly";
    throw ConfigError(msg.str());
  }
  if (model.lang_dim != scene.lang_dim) {
    std::ostringstream msg;
    msg << "model.lang_dim (" << model.lang_dim << ") must equal scene.lang_dim ("
        << scene.lang_dim << ")";
    throw ConfigError(msg.str());
  }
  if (model.experts < 1 || model.top_k < 1 || model.top_k > model.experts)
    throw ConfigError("model.top_k must lie in [1, model.experts]");
  if (model.routed_hidden < 1 || model.shared_hidden < 1 || model.ffn_hidden < 1)
    throw ConfigError("model hidden dims must be >= 1");
  if (!model.lmoe_layers.empty()) {
    const auto flags = parse_layer_flags(model.lmoe_layers);
    if (flags.size() != model.layers)
      throw ConfigError("model.lmoe_layers must list one flag per layer");
  }
  if (loss.contrast_weight < 0.0 || loss.kd_weight < 0.0 || loss.balance_weight < 0.0 ||
      loss.center_weight < 0.0)
    throw ConfigError("loss weights must be >= 0");
  if (!(loss.kd_tau > 0.0)) throw ConfigError("loss.kd_tau must be > 0");
  if (!(loss.focal_gamma >= 0.0) || !(loss.focal_alpha > 0.0 && loss.focal_alpha < 1.0))
    throw ConfigError("focal parameters out of range");
  if (match.lambda_cls < 0.0 || match.lambda_center < 0.0)
    throw ConfigError("matching weights must be >= 0");
  if (train.batch_scenes < 1) throw ConfigError("train.batch_scenes must be >= 1");
  if (!(train.lr > 0.0)) throw ConfigError("train.lr must be > 0");
}

ExperimentConfig default_experiment_config() {
  ExperimentConfig cfg;
  cfg.scene.confusion = default_confusion_pairs();
  return cfg;
}

namespace {

void check_keys(const YAML::Node& node, const std::string& path,
                const std::set<std::string>& allowed) {
  if (!node.IsMap()) throw ConfigError("config section `" + path + "` must be a map");
  for (const auto& kv : node) {
    const std::string key = kv.first.as<std::string>();
    if (!allowed.count(key)) {
      throw ConfigError("unknown config key `" + (path.empty() ? key : path + "." + key) + "`");
    }
  }
}

template <typename T>
void read_scalar(const YAML::Node& node, const char* key, const std::string& path, T& out) {
  if (!node[key]) return;
  try {
    out = node[key].as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError("config key `" + path + "." + key + "` has the wrong type");
  }
}

void parse_scene(const YAML::Node& node, SceneConfig& scene) {
  check_keys(node, "scene",
             {"classes", "semantic_groups", "class_names", "class_groups", "zipf_exponent",
              "objects_min", "objects_max", "modes_per_class", "confusion_pairs", "obs_dim",
              "obs_noise", "obs_group_share", "distractors", "world_extent", "inner_radius", "min_separation",
              "provider_seed", "lang_dim", "intra_group_cos", "teacher_noise",
              "mode_offset_scale", "pos_encoding_scale", "embeddings_file", "cameras",
              "camera_focal", "image_width", "image_height", "camera_height",
              "camera_ring_radius"});

  std::size_t classes = 18;
  int semantic_groups = 3;
  read_scalar(node, "classes", "scene", classes);
  read_scalar(node, "semantic_groups", "scene", semantic_groups);
  std::vector<std::string> names;
  std::vector<int> groups;
  if (node["class_names"]) names = node["class_names"].as<std::vector<std::string>>();
  if (node["class_groups"]) groups = node["class_groups"].as<std::vector<int>>();
  if (!names.empty()) {
    if (groups.size() != names.size())
      throw ConfigError("scene.class_groups must list one group per class name");
    std::vector<VocabEntry> entries;
    for (std::size_t i = 0; i < names.size(); ++i)
      entries.push_back({names[i], groups[i], FrequencyGroup::kMedium});
    scene.vocab = ClassVocabulary(std::move(entries));
  } else if (classes == 18 && semantic_groups == 3) {
    scene.vocab = ClassVocabulary::default_vocabulary();
  } else {
    scene.vocab = ClassVocabulary::synthetic(classes, semantic_groups);
  }

  read_scalar(node, "zipf_exponent", "scene", scene.zipf_exponent);
  read_scalar(node, "objects_min", "scene", scene.objects_min);
  read_scalar(node, "objects_max", "scene", scene.objects_max);
  read_scalar(node, "modes_per_class", "scene", scene.modes_per_class);
  read_scalar(node, "obs_dim", "scene", scene.obs_dim);
  read_scalar(node, "obs_noise", "scene", scene.obs_noise);
  read_scalar(node, "obs_group_share", "scene", scene.obs_group_share);
  read_scalar(node, "distractors", "scene", scene.distractors);
  read_scalar(node, "world_extent", "scene", scene.world_extent);
  read_scalar(node, "inner_radius", "scene", scene.inner_radius);
  read_scalar(node, "min_separation", "scene", scene.min_separation);
  read_scalar(node, "provider_seed", "scene", scene.provider_seed);
  read_scalar(node, "lang_dim", "scene", scene.lang_dim);
  read_scalar(node, "intra_group_cos", "scene", scene.intra_group_cos);
  read_scalar(node, "teacher_noise", "scene", scene.teacher_noise);
  read_scalar(node, "mode_offset_scale", "scene", scene.mode_offset_scale);
  read_scalar(node, "pos_encoding_scale", "scene", scene.pos_encoding_scale);
  read_scalar(node, "embeddings_file", "scene", scene.embeddings_file);
  read_scalar(node, "cameras", "scene", scene.rig.cameras);
  read_scalar(node, "camera_focal", "scene", scene.rig.focal);
  read_scalar(node, "image_width", "scene", scene.rig.width);
  read_scalar(node, "image_height", "scene", scene.rig.height);
  read_scalar(node, "camera_height", "scene", scene.rig.mount_height);
  read_scalar(node, "camera_ring_radius", "scene", scene.rig.ring_radius);

  if (node["confusion_pairs"]) {
    scene.confusion.clear();
    if (!node["confusion_pairs"].IsSequence())
      throw ConfigError("scene.confusion_pairs must be a sequence");
    for (const auto& item : node["confusion_pairs"]) {
      check_keys(item, "scene.confusion_pairs[]", {"a", "b", "cosine", "fraction"});
      ConfusionPair cp;
      read_scalar(item, "a", "scene.confusion_pairs[]", cp.class_a);
      read_scalar(item, "b", "scene.confusion_pairs[]", cp.class_b);
      read_scalar(item, "cosine", "scene.confusion_pairs[]", cp.cosine);
      read_scalar(item, "fraction", "scene.confusion_pairs[]", cp.fraction);
      scene.confusion.push_back(cp);
    }
  }
}

void parse_model(const YAML::Node& node, ModelConfig& model) {
  check_keys(node, "model",
             {"layers", "query_dim", "lang_dim", "experts", "top_k", "routed_hidden",
              "shared_hidden", "ffn_hidden", "use_moe", "renormalize_top_k", "router_mode",
              "lmoe_layers"});
  read_scalar(node, "layers", "model", model.layers);
  read_scalar(node, "query_dim", "model", model.query_dim);
  read_scalar(node, "lang_dim", "model", model.lang_dim);
  read_scalar(node, "experts", "model", model.experts);
  read_scalar(node, "top_k", "model", model.top_k);
  read_scalar(node, "routed_hidden", "model", model.routed_hidden);
  read_scalar(node, "shared_hidden", "model", model.shared_hidden);
  read_scalar(node, "ffn_hidden", "model", model.ffn_hidden);
  read_scalar(node, "use_moe", "model", model.use_moe);
  read_scalar(node, "renormalize_top_k", "model", model.renormalize_top_k);
  read_scalar(node, "lmoe_layers", "model", model.lmoe_layers);
  if (node["router_mode"]) model.router_mode = parse_router_mode(node["router_mode"].as<std::string>());
}

void parse_loss(const YAML::Node& node, LossConfig& loss) {
  check_keys(node, "loss",
             {"contrast_weight", "kd_weight", "balance_weight", "center_weight", "use_kd",
              "use_alignment", "kd_tau", "kd_direction", "kd_per_view_grouping", "focal_alpha",
              "focal_gamma"});
  read_scalar(node, "contrast_weight", "loss", loss.contrast_weight);
  read_scalar(node, "kd_weight", "loss", loss.kd_weight);
  read_scalar(node, "balance_weight", "loss", loss.balance_weight);
  read_scalar(node, "center_weight", "loss", loss.center_weight);
  read_scalar(node, "use_kd", "loss", loss.use_kd);
  read_scalar(node, "use_alignment", "loss", loss.use_alignment);
  read_scalar(node, "kd_tau", "loss", loss.kd_tau);
  read_scalar(node, "kd_per_view_grouping", "loss", loss.kd_per_view_grouping);
  read_scalar(node, "focal_alpha", "loss", loss.focal_alpha);
  read_scalar(node, "focal_gamma", "loss", loss.focal_gamma);
  if (node["kd_direction"]) {
    const std::string dir = node["kd_direction"].as<std::string>();
    if (dir == "teacher_ref") loss.kd_direction = KLDirection::kTeacherRef;
    else if (dir == "student_ref") loss.kd_direction = KLDirection::kStudentRef;
    else throw ConfigError("loss.kd_direction must be teacher_ref or student_ref");
  }
}

void parse_match(const YAML::Node& node, MatchConfig& match) {
  check_keys(node, "match", {"lambda_cls", "lambda_center", "focal_cost"});
  read_scalar(node, "lambda_cls", "match", match.lambda_cls);
  read_scalar(node, "lambda_center", "match", match.lambda_center);
  read_scalar(node, "focal_cost", "match", match.focal_cost);
}

void parse_train(const YAML::Node& node, TrainConfig& train) {
  check_keys(node, "train",
             {"steps", "batch_scenes", "lr", "beta1", "beta2", "adam_eps", "eval_scenes",
              "eval_every", "model_seed", "data_seed"});
  read_scalar(node, "steps", "train", train.steps);
  read_scalar(node, "batch_scenes", "train", train.batch_scenes);
  read_scalar(node, "lr", "train", train.lr);
  read_scalar(node, "beta1", "train", train.beta1);
  read_scalar(node, "beta2", "train", train.beta2);
  read_scalar(node, "adam_eps", "train", train.adam_eps);
  read_scalar(node, "eval_scenes", "train", train.eval_scenes);
  read_scalar(node, "eval_every", "train", train.eval_every);
  read_scalar(node, "model_seed", "train", train.model_seed);
  read_scalar(node, "data_seed", "train", train.data_seed);
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  check_keys(root, "", {"cfg_version", "scene", "model", "loss", "match", "train"});
  if (!root["cfg_version"]) throw ConfigError("config is missing cfg_version");
  const int version = root["cfg_version"].as<int>();
  if (version != kConfigVersion) {
    throw ConfigError("unsupported cfg_version " + std::to_string(version) + " (expected " +
                      std::to_string(kConfigVersion) + ")");
  }

  ExperimentConfig cfg = default_experiment_config();
  try {
    if (root["scene"]) parse_scene(root["scene"], cfg.scene);
    if (root["model"]) parse_model(root["model"], cfg.model);
    if (root["loss"]) parse_loss(root["loss"], cfg.loss);
    if (root["match"]) parse_match(root["match"], cfg.match);
    if (root["train"]) parse_train(root["train"], cfg.train);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid config value: ") + e.what());
  }
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  return parse_experiment_config(read_text_file(path));
}

std::string experiment_config_to_yaml(const ExperimentConfig& cfg) {
  std::ostringstream out;
  out << "cfg_version: " << kConfigVersion << "\n";
  out << "scene:\n";
  out << "  classes: " << cfg.scene.vocab.size() << "\n";
  out << "  semantic_groups: " << cfg.scene.vocab.group_count() << "\n";
  out << "  class_names: [";
  for (std::size_t i = 0; i < cfg.scene.vocab.size(); ++i)
    out << (i ? ", " : "") << cfg.scene.vocab.entry(i).name;
  out << "]\n";
  out << "  class_groups: [";
  for (std::size_t i = 0; i < cfg.scene.vocab.size(); ++i)
    out << (i ? ", " : "") << cfg.scene.vocab.entry(i).semantic_group;
  out << "]\n";
  out << "  zipf_exponent: " << format_double(cfg.scene.zipf_exponent) << "\n";
  out << "  objects_min: " << cfg.scene.objects_min << "\n";
  out << "  objects_max: " << cfg.scene.objects_max << "\n";
  out << "  modes_per_class: " << cfg.scene.modes_per_class << "\n";
  if (cfg.scene.confusion.empty()) {
    out << "  confusion_pairs: []\n";
  } else {
    out << "  confusion_pairs:\n";
    for (const auto& cp : cfg.scene.confusion) {
      out << "    - {a: " << cp.class_a << ", b: " << cp.class_b
          << ", cosine: " << format_double(cp.cosine)
          << ", fraction: " << format_double(cp.fraction) << "}\n";
    }
  }
  out << "  obs_dim: " << cfg.scene.obs_dim << "\n";
  out << "  obs_noise: " << format_double(cfg.scene.obs_noise) << "\n";
  out << "  obs_group_share: " << format_double(cfg.scene.obs_group_share) << "\n";
  out << "  distractors: " << cfg.scene.distractors << "\n";
  out << "  world_extent: " << format_double(cfg.scene.world_extent) << "\n";
  out << "  inner_radius: " << format_double(cfg.scene.inner_radius) << "\n";
  out << "  min_separation: " << format_double(cfg.scene.min_separation) << "\n";
  out << "  provider_seed: " << cfg.scene.provider_seed << "\n";
  out << "  lang_dim: " << cfg.scene.lang_dim << "\n";
  out << "  intra_group_cos: " << format_double(cfg.scene.intra_group_cos) << "\n";
  out << "  teacher_noise: " << format_double(cfg.scene.teacher_noise) << "\n";
  out << "  mode_offset_scale: " << format_double(cfg.scene.mode_offset_scale) << "\n";
  out << "  pos_encoding_scale: " << format_double(cfg.scene.pos_encoding_scale) << "\n";
  if (!cfg.scene.embeddings_file.empty())
    out << "  embeddings_file: " << cfg.scene.embeddings_file << "\n";
  out << "  cameras: " << cfg.scene.rig.cameras << "\n";
  out << "  camera_focal: " << format_double(cfg.scene.rig.focal) << "\n";
  out << "  image_width: " << format_double(cfg.scene.rig.width) << "\n";
  out << "  image_height: " << format_double(cfg.scene.rig.height) << "\n";
  out << "  camera_height: " << format_double(cfg.scene.rig.mount_height) << "\n";
  out << "  camera_ring_radius: " << format_double(cfg.scene.rig.ring_radius) << "\n";
  out << "model:\n";
  out << "  layers: " << cfg.model.layers << "\n";
  out << "  query_dim: " << cfg.model.query_dim << "\n";
  out << "  lang_dim: " << cfg.model.lang_dim << "\n";
  out << "  experts: " << cfg.model.experts << "\n";
  out << "  top_k: " << cfg.model.top_k << "\n";
  out << "  routed_hidden: " << cfg.model.routed_hidden << "\n";
  out << "  shared_hidden: " << cfg.model.shared_hidden << "\n";
  out << "  ffn_hidden: " << cfg.model.ffn_hidden << "\n";
  out << "  use_moe: " << (cfg.model.use_moe ? "true" : "false") << "\n";
  out << "  renormalize_top_k: " << (cfg.model.renormalize_top_k ? "true" : "false") << "\n";
  out << "  router_mode: " << router_mode_name(cfg.model.router_mode) << "\n";
  if (!cfg.model.lmoe_layers.empty())
    out << "  lmoe_layers: \"" << cfg.model.lmoe_layers << "\"\n";
  out << "loss:\n";
  out << "  contrast_weight: " << format_double(cfg.loss.contrast_weight) << "\n";
  out << "  kd_weight: " << format_double(cfg.loss.kd_weight) << "\n";
  out << "  balance_weight: " << format_double(cfg.loss.balance_weight) << "\n";
  out << "  center_weight: " << format_double(cfg.loss.center_weight) << "\n";
  out << "  use_kd: " << (cfg.loss.use_kd ? "true" : "false") << "\n";
  out << "  use_alignment: " << (cfg.loss.use_alignment ? "true" : "false") << "\n";
  out << "  kd_tau: " << format_double(cfg.loss.kd_tau) << "\n";
  out << "  kd_direction: "
      << (cfg.loss.kd_direction == KLDirection::kTeacherRef ? "teacher_ref" : "student_ref")
      << "\n";
  out << "  kd_per_view_grouping: " << (cfg.loss.kd_per_view_grouping ? "true" : "false")
      << "\n";
  out << "  focal_alpha: " << format_double(cfg.loss.focal_alpha) << "\n";
  out << "  focal_gamma: " << format_double(cfg.loss.focal_gamma) << "\n";
  out << "match:\n";
  out << "  lambda_cls: " << format_double(cfg.match.lambda_cls) << "\n";
  out << "  lambda_center: " << format_double(cfg.match.lambda_center) << "\n";
  out << "  focal_cost: " << (cfg.match.focal_cost ? "true" : "false") << "\n";
  out << "train:\n";
  out << "  steps: " << cfg.train.steps << "\n";
  out << "  batch_scenes: " << cfg.train.batch_scenes << "\n";
  out << "  lr: " << format_double(cfg.train.lr) << "\n";
  out << "  beta1: " << format_double(cfg.train.beta1) << "\n";
  out << "  beta2: " << format_double(cfg.train.beta2) << "\n";
  out << "  adam_eps: " << format_double(cfg.train.adam_eps) << "\n";
  out << "  eval_scenes: " << cfg.train.eval_scenes << "\n";
  out << "  eval_every: " << cfg.train.eval_every << "\n";
  out << "  model_seed: " << cfg.train.model_seed << "\n";
  out << "  data_seed: " << cfg.train.data_seed << "\n";
  return out.str();
}

}  // namespace moelab
