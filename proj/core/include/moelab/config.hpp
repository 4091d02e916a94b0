#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "moelab/lmoe.hpp"
#include "moelab/objectives.hpp"
#include "moelab/scenegen.hpp"

namespace moelab {

inline constexpr int kConfigVersion = 1;

/// Invalid or malformed configuration (CLI exit code 1).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class RouterMode { kLanguageGuided, kFeatureRouted };

const char* router_mode_name(RouterMode m);
RouterMode parse_router_mode(const std::string& s);

struct ModelConfig {
  std::size_t layers = 2;
  std::size_t query_dim = 64;  // must match the scene observation dim
  std::size_t lang_dim = 64;   // must match the scene language dim
  std::size_t experts = 4;
  std::size_t top_k = 2;
  std::size_t routed_hidden = 512;
  std::size_t shared_hidden = 1024;
  std::size_t ffn_hidden = 2048;  // plain feed-forward width when the MoE is off
  bool use_moe = true;
  bool renormalize_top_k = false;
  RouterMode router_mode = RouterMode::kLanguageGuided;
  /// Per-layer on/off for the MoE block ("1,0,..."); empty means every layer.
  std::string lmoe_layers;

  bool layer_has_moe(std::size_t layer) const;
};

struct LossConfig {
  double contrast_weight = 1.0;
  double kd_weight = 0.5;
  double balance_weight = 0.01;
  double center_weight = 0.25;
  bool use_kd = true;
  /// The per-decoder-layer auxiliary alignment terms; the final-head focal
  /// classification stays on whenever contrast_weight > 0.
  bool use_alignment = true;
  double kd_tau = 1.0;
  KLDirection kd_direction = KLDirection::kTeacherRef;
  bool kd_per_view_grouping = true;  // average views within each object
  double focal_alpha = 0.25;
  double focal_gamma = 2.0;
};

struct MatchConfig {
  double lambda_cls = 2.0;
  double lambda_center = 0.25;
  bool focal_cost = false;
};

struct TrainConfig {
  std::size_t steps = 2000;
  std::size_t batch_scenes = 8;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t eval_scenes = 200;
  std::size_t eval_every = 0;  // 0: evaluate only after training
  std::uint64_t model_seed = 1;
  std::uint64_t data_seed = 100;
};

struct ExperimentConfig {
  SceneConfig scene;
  ModelConfig model;
  LossConfig loss;
  MatchConfig match;
  TrainConfig train;

  void validate() const;
};

ExperimentConfig default_experiment_config();

/// Strict YAML loader: cfg_version must equal kConfigVersion; unknown keys
/// anywhere are errors naming their path. Missing keys keep defaults.
ExperimentConfig load_experiment_config(const std::string& path);
ExperimentConfig parse_experiment_config(const std::string& yaml_text);

/// Canonical YAML echo of a config (loadable by load_experiment_config).
std::string experiment_config_to_yaml(const ExperimentConfig& cfg);

}  // namespace moelab
