#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "moelab/geometry.hpp"
#include "moelab/rng.hpp"
#include "moelab/semantics.hpp"
#include "moelab/tensor.hpp"

namespace moelab {

/// Rank-frequency sampler: P(class r) proportional to (r+1)^(-s) over the
/// rank-ordered class ids (id 0 is the most frequent).
class ZipfSampler {
 public:
  ZipfSampler(double exponent, std::size_t n);
  std::size_t sample(Rng& rng) const;
  const std::vector<double>& masses() const { return masses_; }

 private:
  std::vector<double> masses_;
  std::vector<double> cdf_;
};

/// count >= cut_many -> Many; count <= cut_few -> Few; else Medium.
/// Both boundaries are closed.
std::vector<FrequencyGroup> frequency_groups(const std::vector<std::size_t>& counts,
                                             double cut_many, double cut_few);

/// Default cuts: tertiles of the count distribution (equivalently of
/// log-counts), so a Zipfian corpus splits into nonempty thirds.
std::pair<double, double> default_group_cuts(const std::vector<std::size_t>& counts);

struct ConfusionPair {
  int class_a = 0;   // instances of this class ...
  int class_b = 0;   // ... are biased toward this class's prototype
  double cosine = 0.6;
  double fraction = 0.25;
};

struct RigSpec {
  std::size_t cameras = 6;  // evenly spaced headings
  double focal = 400.0;
  double width = 800.0;
  double height = 450.0;
  double mount_height = 1.6;
  double ring_radius = 1.0;
};

struct SceneConfig {
  ClassVocabulary vocab = ClassVocabulary::default_vocabulary();
  double zipf_exponent = 1.0;
  std::size_t objects_min = 3;
  std::size_t objects_max = 8;
  std::size_t modes_per_class = 2;
  std::vector<ConfusionPair> confusion;
  std::size_t obs_dim = 64;
  double obs_noise = 0.1;
  /// Fraction of each class-mode observation direction shared across its
  /// semantic group; classes in one group then present similar features,
  /// the structure semantic routing can exploit.
  double obs_group_share = 0.5;
  std::size_t distractors = 8;
  RigSpec rig;
  double world_extent = 20.0;
  double inner_radius = 3.0;
  double min_separation = 1.5;
  std::uint64_t provider_seed = 7;
  std::size_t lang_dim = 64;
  double intra_group_cos = 0.8;
  double teacher_noise = 0.1;
  double mode_offset_scale = 0.35;
  double pos_encoding_scale = 0.5;
  std::string embeddings_file;  // when set, ingested instead of synthesized

  void validate() const;
};

/// Two default confusion pairs: a tail class pulled toward a head class of
/// another semantic group (ids in the default 18-class vocabulary).
std::vector<ConfusionPair> default_confusion_pairs();

struct SceneInstance {
  Box3D box;  // carries the class id
  int mode_id = 0;
  std::vector<double> teacher;  // unit-norm visual embedding
};

struct Scene {
  std::uint64_t seed = 0;
  std::vector<SceneInstance> instances;
  std::size_t distractors = 0;
  Tensor observations;  // (instances + distractors) x obs_dim
  std::vector<Camera> rig;

  std::size_t num_queries() const { return observations.rows(); }
};

/// Deterministic scene factory: language embeddings, the teacher provider,
/// the fixed class-mode observation basis and positional encoding are all
/// derived from the config; each scene is then a pure function of its seed.
class SceneGenerator {
 public:
  explicit SceneGenerator(SceneConfig cfg);

  const SceneConfig& config() const { return cfg_; }
  const LanguageEmbeddings& language() const { return language_; }
  const VisualEmbeddingProvider& provider() const { return provider_; }
  const std::vector<Camera>& rig() const { return rig_; }

  Scene generate(std::uint64_t scene_seed) const;

 private:
  Vec3 class_size(int class_id) const;
  std::vector<double> observation_for(const SceneInstance& inst, Rng& rng) const;

  SceneConfig cfg_;
  LanguageEmbeddings language_;
  VisualEmbeddingProvider provider_;
  std::vector<Tensor> class_mode_basis_;  // per class: modes x obs_dim
  Tensor pos_encoding_;                   // obs_dim x 3
  std::vector<double> size_jitter_;       // per class, deterministic
  std::vector<Camera> rig_;
};

struct CorpusStats {
  std::vector<std::size_t> class_counts;
  std::vector<FrequencyGroup> groups;
  double cut_many = 0.0;
  double cut_few = 0.0;
  std::size_t scenes = 0;
  std::size_t instances = 0;
};

/// Streams scenes base_seed+0..N-1 and accumulates per-class counts plus the
/// resulting frequency groups (default tertile cuts).
CorpusStats corpus_stats(const SceneGenerator& gen, std::size_t n_scenes,
                         std::uint64_t base_seed);

/// Materialized corpus for evaluation sets.
std::vector<Scene> generate_corpus(const SceneGenerator& gen, std::size_t n_scenes,
                                   std::uint64_t base_seed, CorpusStats* stats = nullptr);

/// Text container "SCN v1" holding the config echo and per-scene records;
/// round-trips bit-exactly.
void save_corpus(const std::string& path, const SceneConfig& cfg,
                 const std::vector<Scene>& scenes, std::uint64_t base_seed);

struct LoadedCorpus {
  SceneConfig config;
  std::vector<Scene> scenes;
  std::uint64_t base_seed = 0;
};
LoadedCorpus load_corpus(const std::string& path);

}  // namespace moelab
