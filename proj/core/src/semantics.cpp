#include "moelab/semantics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "moelab/fsutil.hpp"

namespace moelab {

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

void normalize_or_throw(std::vector<double>& v, const char* what) {
  const double n = norm(v);
  if (n < 1e-12) throw std::runtime_error(std::string(what) + ": degenerate zero vector");
  for (double& x : v) x /= n;
}

std::vector<double> gaussian_unit(Rng& rng, std::size_t d) {
  std::vector<double> v(d);
  for (double& x : v) x = rng.gaussian();
  normalize_or_throw(v, "gaussian_unit");
  return v;
}

}  // namespace

const char* frequency_group_name(FrequencyGroup g) {
  switch (g) {
    case FrequencyGroup::kMany: return "Many";
    case FrequencyGroup::kMedium: return "Medium";
    case FrequencyGroup::kFew: return "Few";
  }
  return "?";
}

ClassVocabulary::ClassVocabulary(std::vector<VocabEntry> entries) : entries_(std::move(entries)) {
  if (entries_.size() < 2) throw std::invalid_argument("vocabulary needs at least 2 classes");
  std::vector<bool> seen_group;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    for (std::size_t j = i + 1; j < entries_.size(); ++j) {
      if (entries_[i].name == entries_[j].name)
        throw std::invalid_argument("duplicate class name: " + entries_[i].name);
    }
    const int g = entries_[i].semantic_group;
    if (g < 0) throw std::invalid_argument("negative semantic group id");
    if (static_cast<std::size_t>(g) >= seen_group.size()) seen_group.resize(g + 1, false);
    seen_group[g] = true;
  }
  for (bool s : seen_group) {
    if (!s) throw std::invalid_argument("semantic group ids must be contiguous from 0");
  }
  group_count_ = static_cast<int>(seen_group.size());
}

ClassVocabulary ClassVocabulary::default_vocabulary() {
  // Group 0: human-like, group 1: vehicle-like, group 2: static objects.
  // Interleaved so each group covers common and rare frequency ranks.
  static const char* names[18] = {
      "walker",  "runabout", "bollard", "jogger", "hauler",     "barrier",
      "patroller", "speedster", "crate", "builder", "vanlet",   "bench",
      "rider",   "longhauler", "kiosk", "scout",  "buggy",      "mound",
  };
  std::vector<VocabEntry> entries;
  entries.reserve(18);
  for (int i = 0; i < 18; ++i) {
    entries.push_back({names[i], i % 3, FrequencyGroup::kMedium});
  }
  return ClassVocabulary(std::move(entries));
}

ClassVocabulary ClassVocabulary::synthetic(std::size_t n, int groups) {
  if (groups < 1) throw std::invalid_argument("need at least one semantic group");
  std::vector<VocabEntry> entries;
  entries.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::ostringstream name;
    name << "class_" << i;
    entries.push_back({name.str(), static_cast<int>(i % static_cast<std::size_t>(groups)),
                       FrequencyGroup::kMedium});
  }
  return ClassVocabulary(std::move(entries));
}

std::optional<std::size_t> ClassVocabulary::find(const std::string& name) const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].name == name) return i;
  }
  return std::nullopt;
}

std::vector<std::string> prompt_strings(const ClassVocabulary& vocab, const std::string& tmpl) {
  std::size_t first = tmpl.find("{}");
  if (first == std::string::npos)
    throw std::invalid_argument("prompt template has no {} placeholder: " + tmpl);
  if (tmpl.find("{}", first + 2) != std::string::npos)
    throw std::invalid_argument("prompt template has more than one {} placeholder: " + tmpl);
  std::vector<std::string> prompts;
  prompts.reserve(vocab.size());
  for (const auto& e : vocab.entries()) {
    std::string p = tmpl;
    p.replace(first, 2, e.name);
    prompts.push_back(std::move(p));
  }
  return prompts;
}

std::vector<double> LanguageEmbeddings::row(std::size_t i) const {
  std::vector<double> r(matrix.cols());
  for (std::size_t j = 0; j < matrix.cols(); ++j) r[j] = matrix(i, j);
  return r;
}

LanguageEmbeddings synth_language_embeddings(const ClassVocabulary& vocab, std::size_t d,
                                             std::uint64_t seed, double intra_group_cos) {
  if (d < 8) throw std::invalid_argument("embedding dimension must be >= 8");
  if (!(intra_group_cos >= 0.0 && intra_group_cos < 1.0))
    throw std::invalid_argument("intra_group_cos must lie in [0,1)");

  Rng rng(mix_seed(seed, 0xe8bedd1e5ULL));
  const int groups = vocab.group_count();
  std::vector<std::vector<double>> anchors;
  anchors.reserve(groups);
  for (int g = 0; g < groups; ++g) {
    bool placed = false;
    for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
      std::vector<double> cand = gaussian_unit(rng, d);
      bool ok = true;
      for (const auto& prev : anchors) {
        if (std::fabs(dot(cand, prev)) >= 0.2) {
          ok = false;
          break;
        }
      }
      if (ok) {
        anchors.push_back(std::move(cand));
        placed = true;
      }
    }
    if (!placed) {
      throw std::runtime_error(
          "could not place near-orthogonal group anchors after 1000 tries; embedding dimension "
          "too small for the group count");
    }
  }

  const double a = std::sqrt(intra_group_cos);
  const double b = std::sqrt(1.0 - intra_group_cos);
  Tensor matrix(vocab.size(), d);
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    const auto& anchor = anchors[vocab.entry(i).semantic_group];
    std::vector<double> noise = gaussian_unit(rng, d);
    std::vector<double> e(d);
    for (std::size_t j = 0; j < d; ++j) e[j] = a * anchor[j] + b * noise[j];
    normalize_or_throw(e, "language embedding");
    for (std::size_t j = 0; j < d; ++j) matrix(i, j) = e[j];
  }

  LanguageEmbeddings out;
  out.matrix = std::move(matrix);
  out.provenance.kind = EmbeddingProvenance::Kind::kSynthetic;
  out.provenance.seed = seed;
  out.provenance.intra_group_cos = intra_group_cos;
  return out;
}

void save_embeddings(const std::string& path, const ClassVocabulary& vocab,
                     const LanguageEmbeddings& emb) {
  if (emb.matrix.rows() != vocab.size())
    throw std::invalid_argument("embedding rows do not match vocabulary size");
  std::ostringstream out;
  out << "EMB v1 " << emb.matrix.rows() << " " << emb.matrix.cols() << "\n";
  for (std::size_t i = 0; i < emb.matrix.rows(); ++i) {
    out << vocab.entry(i).name;
    for (std::size_t j = 0; j < emb.matrix.cols(); ++j)
      out << " " << format_double(emb.matrix(i, j));
    out << "\n";
  }
  const std::string body = out.str();
  write_text_file(path, body);
  write_text_file(path + ".sha256", sha256_hex(body) + "\n");
}

LanguageEmbeddings load_embeddings(const std::string& path, const ClassVocabulary& vocab) {
  const std::string body = read_text_file(path);
  const std::string checksum = sha256_hex(body);

  if (file_exists(path + ".sha256")) {
    std::istringstream cs(read_text_file(path + ".sha256"));
    std::string expected;
    cs >> expected;
    if (expected != checksum) {
      throw std::runtime_error("embedding file checksum mismatch for " + path + ": expected " +
                               expected + ", file hashes to " + checksum);
    }
  }

  std::istringstream in(body);
  std::string magic, version;
  std::size_t n = 0, d = 0;
  if (!(in >> magic >> version >> n >> d) || magic != "EMB" || version != "v1") {
    throw std::runtime_error("bad embedding file header in " + path +
                             " (expected `EMB v1 <n> <d>`)");
  }
  if (n != vocab.size()) {
    std::ostringstream msg;
    msg << "embedding file " << path << " has " << n << " rows but the vocabulary has "
        << vocab.size() << " classes";
    throw std::runtime_error(msg.str());
  }
  Tensor matrix(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    std::string name;
    if (!(in >> name)) throw std::runtime_error("truncated embedding file: " + path);
    if (name != vocab.entry(i).name) {
      throw std::runtime_error("embedding row " + std::to_string(i) + " is `" + name +
                               "` but the vocabulary expects `" + vocab.entry(i).name + "`");
    }
    std::vector<double> row(d);
    for (std::size_t j = 0; j < d; ++j) {
      if (!(in >> row[j])) throw std::runtime_error("truncated embedding file: " + path);
      if (!std::isfinite(row[j]))
        throw std::runtime_error("non-finite embedding value in " + path);
    }
    // Renormalize only rows that actually deviate; already-unit rows keep
    // their exact bits so save/load round-trips are stable.
    const double n2 = norm(row);
    if (n2 < 1e-12) throw std::runtime_error("zero embedding row in " + path);
    if (std::fabs(n2 - 1.0) > 1e-9) {
      for (double& x : row) x /= n2;
    }
    for (std::size_t j = 0; j < d; ++j) matrix(i, j) = row[j];
  }

  LanguageEmbeddings out;
  out.matrix = std::move(matrix);
  out.provenance.kind = EmbeddingProvenance::Kind::kFile;
  out.provenance.path = path;
  out.provenance.checksum = checksum;
  return out;
}

VisualEmbeddingProvider::VisualEmbeddingProvider(const LanguageEmbeddings& language,
                                                 std::uint64_t mode_seed,
                                                 double mode_offset_scale)
    : language_(&language), mode_seed_(mode_seed), mode_offset_scale_(mode_offset_scale) {}

std::vector<double> VisualEmbeddingProvider::mode_offset(int class_id, int mode_id) const {
  const std::size_t d = language_->dim();
  if (mode_offset_scale_ == 0.0) return std::vector<double>(d, 0.0);
  Rng rng(mix_seed(mode_seed_, static_cast<std::uint64_t>(class_id) * 1000003ULL +
                                   static_cast<std::uint64_t>(mode_id)));
  std::vector<double> off = gaussian_unit(rng, d);
  for (double& x : off) x *= mode_offset_scale_;
  return off;
}

VisualEmbedding VisualEmbeddingProvider::sample(int class_id, int mode_id, double noise_scale,
                                                Rng& rng) const {
  if (class_id < 0 || static_cast<std::size_t>(class_id) >= language_->matrix.rows())
    throw std::invalid_argument("visual embedding: class id out of range");
  if (noise_scale < 0.0) throw std::invalid_argument("noise_scale must be >= 0");
  std::vector<double> v = language_->row(class_id);
  const std::vector<double> off = mode_offset(class_id, mode_id);
  // Noise is scaled per component so the noise vector's expected norm is
  // noise_scale, comparable to the unit-norm class direction.
  const double comp = noise_scale / std::sqrt(static_cast<double>(v.size()));
  for (std::size_t j = 0; j < v.size(); ++j) v[j] += off[j] + comp * rng.gaussian();
  normalize_or_throw(v, "visual embedding");
  return {std::move(v), class_id, mode_id};
}

VisualEmbedding VisualEmbeddingProvider::sample_confused(int class_id, int toward_class,
                                                         double cosine, int mode_id,
                                                         double noise_scale, Rng& rng) const {
  const std::size_t n = language_->matrix.rows();
  if (class_id < 0 || static_cast<std::size_t>(class_id) >= n || toward_class < 0 ||
      static_cast<std::size_t>(toward_class) >= n)
    throw std::invalid_argument("confused visual embedding: class id out of range");
  if (!(cosine >= 0.0 && cosine < 1.0))
    throw std::invalid_argument("confusion cosine must lie in [0,1)");

  const std::vector<double> a = language_->row(class_id);
  const std::vector<double> b = language_->row(toward_class);
  // Component of a orthogonal to b; base direction has cos(base, b) == cosine.
  const double ab = dot(a, b);
  std::vector<double> orth(a.size());
  for (std::size_t j = 0; j < a.size(); ++j) orth[j] = a[j] - ab * b[j];
  std::vector<double> base(a.size());
  if (norm(orth) < 1e-9) {
    base = b;
  } else {
    normalize_or_throw(orth, "confusion direction");
    const double s = std::sqrt(1.0 - cosine * cosine);
    for (std::size_t j = 0; j < a.size(); ++j) base[j] = cosine * b[j] + s * orth[j];
  }
  const std::vector<double> off = mode_offset(class_id, mode_id);
  const double comp = noise_scale / std::sqrt(static_cast<double>(base.size()));
  for (std::size_t j = 0; j < base.size(); ++j) base[j] += off[j] + comp * rng.gaussian();
  normalize_or_throw(base, "visual embedding");
  return {std::move(base), class_id, mode_id};
}

}  // namespace moelab
