#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "moelab/config.hpp"

using namespace moelab;

TEST_CASE("minimal config yields the defaults") {
  const ExperimentConfig cfg = parse_experiment_config("cfg_version: 1\n");
  CHECK(cfg.scene.vocab.size() == 18);
  CHECK(cfg.model.experts == 4);
  CHECK(cfg.model.top_k == 2);
  CHECK(cfg.model.shared_hidden == 1024);
  CHECK(cfg.model.routed_hidden == 512);
  CHECK(cfg.model.ffn_hidden == 2048);
  CHECK(cfg.loss.contrast_weight == 1.0);
  CHECK(cfg.loss.kd_weight == 0.5);
  CHECK(cfg.loss.balance_weight == 0.01);
  CHECK(cfg.train.steps == 2000);
  CHECK(cfg.train.batch_scenes == 8);
  CHECK(cfg.train.lr == 1e-3);
  CHECK(!cfg.scene.confusion.empty());
}

TEST_CASE("version is mandatory and strict") {
  CHECK_THROWS_WITH_AS(parse_experiment_config("scene:\n  classes: 4\n"),
                       doctest::Contains("cfg_version"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_experiment_config("cfg_version: 2\n"),
                       doctest::Contains("cfg_version 2"), ConfigError);
}

TEST_CASE("unknown keys are errors naming their path") {
  CHECK_THROWS_WITH_AS(parse_experiment_config("cfg_version: 1\nscene:\n  bogus: 3\n"),
                       doctest::Contains("scene.bogus"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_experiment_config("cfg_version: 1\nnope: {}\n"),
                       doctest::Contains("nope"), ConfigError);
  CHECK_THROWS_WITH_AS(
      parse_experiment_config("cfg_version: 1\nmodel:\n  hidden: 3\n"),
      doctest::Contains("model.hidden"), ConfigError);
}

TEST_CASE("scene and model fields parse") {
  const std::string yaml = R"(cfg_version: 1
scene:
  classes: 6
  semantic_groups: 2
  zipf_exponent: 1.4
  obs_dim: 16
  lang_dim: 16
  confusion_pairs:
    - {a: 4, b: 0, cosine: 0.5, fraction: 0.7}
model:
  query_dim: 16
  lang_dim: 16
  experts: 8
  top_k: 1
  router_mode: feature_routed
loss:
  kd_direction: student_ref
  use_kd: false
train:
  steps: 17
  data_seed: 999
)";
  const ExperimentConfig cfg = parse_experiment_config(yaml);
  CHECK(cfg.scene.vocab.size() == 6);
  CHECK(cfg.scene.vocab.group_count() == 2);
  CHECK(cfg.scene.zipf_exponent == 1.4);
  REQUIRE(cfg.scene.confusion.size() == 1);
  CHECK(cfg.scene.confusion[0].fraction == 0.7);
  CHECK(cfg.model.experts == 8);
  CHECK(cfg.model.router_mode == RouterMode::kFeatureRouted);
  CHECK(cfg.loss.kd_direction == KLDirection::kStudentRef);
  CHECK(!cfg.loss.use_kd);
  CHECK(cfg.train.steps == 17);
  CHECK(cfg.train.data_seed == 999);
}

TEST_CASE("cross-field validation") {
  CHECK_THROWS_WITH_AS(
      parse_experiment_config("cfg_version: 1\nmodel:\n  query_dim: 32\n"),
      doctest::Contains("obs_dim"), ConfigError);
  CHECK_THROWS_AS(
      parse_experiment_config("cfg_version: 1\nmodel:\n  top_k: 9\n"), ConfigError);
  CHECK_THROWS_AS(
      parse_experiment_config("cfg_version: 1\nmodel:\n  lmoe_layers: \"1\"\n"),
      ConfigError);  // one flag for two layers
  CHECK_NOTHROW(
      parse_experiment_config("cfg_version: 1\nmodel:\n  lmoe_layers: \"1,0\"\n"));
  CHECK_THROWS_AS(
      parse_experiment_config("cfg_version: 1\nmodel:\n  router_mode: nonsense\n"),
      ConfigError);
}

TEST_CASE("per-layer toggles") {
  ModelConfig model;
  model.layers = 3;
  model.lmoe_layers = "1,0,1";
  CHECK(model.layer_has_moe(0));
  CHECK(!model.layer_has_moe(1));
  CHECK(model.layer_has_moe(2));
  model.use_moe = false;
  CHECK(!model.layer_has_moe(0));
}

TEST_CASE("yaml echo round-trips to the same canonical form") {
  const ExperimentConfig cfg = default_experiment_config();
  const std::string yaml = experiment_config_to_yaml(cfg);
  const ExperimentConfig reparsed = parse_experiment_config(yaml);
  CHECK(experiment_config_to_yaml(reparsed) == yaml);
  CHECK(reparsed.scene.vocab.size() == cfg.scene.vocab.size());
  CHECK(reparsed.scene.confusion.size() == cfg.scene.confusion.size());

  // Custom class names survive the round trip.
  ExperimentConfig custom = cfg;
  custom.scene.vocab = ClassVocabulary::synthetic(5, 2);
  custom.scene.confusion.clear();
  custom.scene.obs_dim = 16;
  custom.scene.lang_dim = 16;
  custom.model.query_dim = 16;
  custom.model.lang_dim = 16;
  const ExperimentConfig reparsed2 =
      parse_experiment_config(experiment_config_to_yaml(custom));
  CHECK(reparsed2.scene.vocab.size() == 5);
  CHECK(reparsed2.scene.vocab.entry(4).name == "class_4");
}
