#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "moelab/rng.hpp"
#include "moelab/tensor.hpp"

namespace moelab {

enum class FrequencyGroup { kMany, kMedium, kFew };

const char* frequency_group_name(FrequencyGroup g);

struct VocabEntry {
  std::string name;
  int semantic_group = 0;  // contiguous ids from 0
  FrequencyGroup freq_group = FrequencyGroup::kMedium;  // assigned from corpus counts
};

/// Ordered class vocabulary. Class ids are positions; for generated corpora,
/// position doubles as the frequency rank (id 0 is the most common class).
class ClassVocabulary {
 public:
  ClassVocabulary() = default;
  explicit ClassVocabulary(std::vector<VocabEntry> entries);

  /// The built-in 18-class vocabulary: three semantic groups (human-like,
  /// vehicle-like, static) interleaved so every group spans head and tail
  /// frequency ranks.
  static ClassVocabulary default_vocabulary();
  /// n synthetic classes spread round-robin over `groups` semantic groups.
  static ClassVocabulary synthetic(std::size_t n, int groups);

  std::size_t size() const { return entries_.size(); }
  const VocabEntry& entry(std::size_t i) const { return entries_[i]; }
  VocabEntry& entry(std::size_t i) { return entries_[i]; }
  const std::vector<VocabEntry>& entries() const { return entries_; }
  int group_count() const { return group_count_; }
  std::optional<std::size_t> find(const std::string& name) const;

 private:
  std::vector<VocabEntry> entries_;
  int group_count_ = 0;
};

/// One prompt per class, vocabulary order. The template must contain exactly
/// one "{}" placeholder.
std::vector<std::string> prompt_strings(const ClassVocabulary& vocab, const std::string& tmpl);

inline constexpr const char* kDefaultPromptTemplate = "a photo of a {}";

struct EmbeddingProvenance {
  enum class Kind { kSynthetic, kFile } kind = Kind::kSynthetic;
  std::uint64_t seed = 0;
  double intra_group_cos = 0.0;
  std::string path;
  std::string checksum;
};

/// The class-name embedding matrix: one unit-norm row per vocabulary entry.
struct LanguageEmbeddings {
  Tensor matrix;  // n x d
  EmbeddingProvenance provenance;

  std::size_t dim() const { return matrix.cols(); }
  std::vector<double> row(std::size_t i) const;
};

/// Synthetic stand-in for a frozen text encoder. Per semantic group, a random
/// unit anchor (anchors resampled until mutually |cos| < 0.2); each class row
/// is normalize(sqrt(rho)*anchor + sqrt(1-rho)*noise) with rho =
/// intra_group_cos, so within-group cosines concentrate near rho and
/// cross-group cosines near zero. Pure function of (vocab, d, seed, rho).
LanguageEmbeddings synth_language_embeddings(const ClassVocabulary& vocab, std::size_t d,
                                             std::uint64_t seed, double intra_group_cos);

/// Text format "EMB v1": header `EMB v1 n d`, then per class one line of
/// `name v0 .. v{d-1}`. Rows are re-normalized on load; a sibling
/// `<path>.sha256` file, when present, must match the file bytes.
LanguageEmbeddings load_embeddings(const std::string& path, const ClassVocabulary& vocab);
void save_embeddings(const std::string& path, const ClassVocabulary& vocab,
                     const LanguageEmbeddings& emb);

struct VisualEmbedding {
  std::vector<double> vector;  // unit norm
  int class_id = 0;
  int mode_id = 0;
};

/// Per-class appearance modes: a fixed offset direction per (class, mode)
/// derived from `mode_seed`, so draws of one mode cluster.
class VisualEmbeddingProvider {
 public:
  VisualEmbeddingProvider(const LanguageEmbeddings& language, std::uint64_t mode_seed,
                          double mode_offset_scale);

  /// normalize(language row + mode offset + noise_scale * gaussian).
  VisualEmbedding sample(int class_id, int mode_id, double noise_scale, Rng& rng) const;

  /// Mode-mixed teacher for confusable classes: the base direction is rotated
  /// toward `toward_class` so cos(base, language[toward_class]) == cosine
  /// before offsets and noise.
  VisualEmbedding sample_confused(int class_id, int toward_class, double cosine, int mode_id,
                                  double noise_scale, Rng& rng) const;

  const LanguageEmbeddings& language() const { return *language_; }

 private:
  std::vector<double> mode_offset(int class_id, int mode_id) const;

  const LanguageEmbeddings* language_;
  std::uint64_t mode_seed_;
  double mode_offset_scale_;
};

}  // namespace moelab
