#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "moelab/fsutil.hpp"
#include "moelab/semantics.hpp"

using namespace moelab;

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double row_cos(const Tensor& m, std::size_t i, std::size_t j) {
  double d = 0.0, ni = 0.0, nj = 0.0;
  for (std::size_t c = 0; c < m.cols(); ++c) {
    d += m(i, c) * m(j, c);
    ni += m(i, c) * m(i, c);
    nj += m(j, c) * m(j, c);
  }
  return d / std::sqrt(ni * nj);
}

std::string temp_path(const char* stem) {
  return (std::filesystem::temp_directory_path() / stem).string();
}

}  // namespace

TEST_CASE("vocabulary invariants") {
  const ClassVocabulary vocab = ClassVocabulary::default_vocabulary();
  CHECK(vocab.size() == 18);
  CHECK(vocab.group_count() == 3);
  CHECK(vocab.find("walker").value() == 0);

  CHECK_THROWS(ClassVocabulary({{"a", 0, FrequencyGroup::kMedium}}));  // too small
  CHECK_THROWS(ClassVocabulary({{"a", 0, FrequencyGroup::kMedium},
                                {"a", 0, FrequencyGroup::kMedium}}));  // duplicate
  CHECK_THROWS(ClassVocabulary({{"a", 0, FrequencyGroup::kMedium},
                                {"b", 2, FrequencyGroup::kMedium}}));  // gap in groups
}

TEST_CASE("prompt strings") {
  const ClassVocabulary vocab = ClassVocabulary::default_vocabulary();
  const auto prompts = prompt_strings(vocab, "a photo of a {}");
  REQUIRE(prompts.size() == vocab.size());
  CHECK(prompts[0] == "a photo of a walker");
  for (std::size_t i = 0; i < vocab.size(); ++i)
    CHECK(prompts[i] == "a photo of a " + vocab.entry(i).name);

  CHECK_THROWS(prompt_strings(vocab, "no placeholder"));
  CHECK_THROWS(prompt_strings(vocab, "{} and {}"));
}

TEST_CASE("synthetic language embeddings are deterministic and unit norm") {
  const ClassVocabulary vocab = ClassVocabulary::default_vocabulary();
  const LanguageEmbeddings a = synth_language_embeddings(vocab, 64, 42, 0.8);
  const LanguageEmbeddings b = synth_language_embeddings(vocab, 64, 42, 0.8);
  CHECK(a.matrix == b.matrix);  // bitwise

  const LanguageEmbeddings c = synth_language_embeddings(vocab, 64, 43, 0.8);
  CHECK(a.matrix.data() != c.matrix.data());

  for (std::size_t i = 0; i < a.matrix.rows(); ++i) {
    double n = 0.0;
    for (std::size_t j = 0; j < 64; ++j) n += a.matrix(i, j) * a.matrix(i, j);
    CHECK(std::fabs(std::sqrt(n) - 1.0) <= 1e-9);
  }
}

TEST_CASE("intra_group_cos zero keeps classes near-orthogonal") {
  const ClassVocabulary vocab = ClassVocabulary::synthetic(9, 3);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const LanguageEmbeddings e = synth_language_embeddings(vocab, 64, seed, 0.0);
    for (std::size_t i = 0; i < 9; ++i)
      for (std::size_t j = i + 1; j < 9; ++j)
        CHECK(std::fabs(row_cos(e.matrix, i, j)) < 0.45);
  }
}

TEST_CASE("group cosine structure over 20 seeds") {
  const ClassVocabulary vocab = ClassVocabulary::synthetic(8, 2);
  double within = 0.0, cross = 0.0;
  std::size_t nw = 0, nc = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const LanguageEmbeddings e = synth_language_embeddings(vocab, 64, seed, 0.8);
    for (std::size_t i = 0; i < 8; ++i) {
      for (std::size_t j = i + 1; j < 8; ++j) {
        const double c = row_cos(e.matrix, i, j);
        if (vocab.entry(i).semantic_group == vocab.entry(j).semantic_group) {
          within += c;
          ++nw;
        } else {
          cross += std::fabs(c);
          ++nc;
        }
      }
    }
  }
  within /= static_cast<double>(nw);
  cross /= static_cast<double>(nc);
  CHECK(within > 0.7);
  CHECK(within < 0.9);
  CHECK(cross < 0.2);
}

TEST_CASE("anchor resampling fails when the dimension cannot host the groups") {
  // 40 pairwise |cos|<0.2 unit vectors cannot exist in R^8.
  const ClassVocabulary vocab = ClassVocabulary::synthetic(40, 40);
  CHECK_THROWS_AS(synth_language_embeddings(vocab, 8, 1, 0.5), std::runtime_error);
}

TEST_CASE("embedding file round-trip is bitwise stable") {
  const ClassVocabulary vocab = ClassVocabulary::synthetic(5, 1);
  const LanguageEmbeddings orig = synth_language_embeddings(vocab, 16, 7, 0.3);
  const std::string path = temp_path("moelab_emb_roundtrip.txt");
  save_embeddings(path, vocab, orig);
  const LanguageEmbeddings loaded = load_embeddings(path, vocab);
  CHECK(loaded.matrix == orig.matrix);  // bitwise after normalization
  CHECK(loaded.provenance.kind == EmbeddingProvenance::Kind::kFile);
  CHECK(!loaded.provenance.checksum.empty());
}

TEST_CASE("embedding file error paths") {
  const ClassVocabulary vocab = ClassVocabulary::synthetic(3, 1);
  const LanguageEmbeddings emb = synth_language_embeddings(vocab, 16, 7, 0.0);
  const std::string path = temp_path("moelab_emb_errors.txt");
  save_embeddings(path, vocab, emb);

  SUBCASE("truncated file") {
    const std::string body = read_text_file(path);
    write_text_file(path, body.substr(0, body.size() / 2));
    std::filesystem::remove(path + ".sha256");
    CHECK_THROWS_WITH_AS(load_embeddings(path, vocab), doctest::Contains("truncated"),
                         std::runtime_error);
  }
  SUBCASE("bad magic") {
    write_text_file(path, "XYZ v1 3 16\n");
    std::filesystem::remove(path + ".sha256");
    CHECK_THROWS_WITH_AS(load_embeddings(path, vocab), doctest::Contains("header"),
                         std::runtime_error);
  }
  SUBCASE("vocabulary size mismatch names both counts") {
    const ClassVocabulary bigger = ClassVocabulary::synthetic(4, 1);
    std::filesystem::remove(path + ".sha256");
    CHECK_THROWS_WITH_AS(load_embeddings(path, bigger), doctest::Contains("3"),
                         std::runtime_error);
  }
  SUBCASE("checksum mismatch") {
    write_text_file(path + ".sha256", std::string(64, '0') + "\n");
    CHECK_THROWS_WITH_AS(load_embeddings(path, vocab), doctest::Contains("checksum"),
                         std::runtime_error);
  }
}

TEST_CASE("visual embedding with no offset and no noise equals the language row") {
  const ClassVocabulary vocab = ClassVocabulary::synthetic(4, 2);
  const LanguageEmbeddings lang = synth_language_embeddings(vocab, 16, 3, 0.5);
  const VisualEmbeddingProvider provider(lang, 9, 0.0);
  Rng rng(1);
  const VisualEmbedding v = provider.sample(2, 0, 0.0, rng);
  const std::vector<double> expect = lang.row(2);
  for (std::size_t j = 0; j < 16; ++j) CHECK(v.vector[j] == doctest::Approx(expect[j]));
  CHECK_THROWS(provider.sample(99, 0, 0.0, rng));
  CHECK_THROWS(provider.sample(0, 0, -1.0, rng));
}

TEST_CASE("modes cluster within themselves") {
  const ClassVocabulary vocab = ClassVocabulary::synthetic(4, 2);
  const LanguageEmbeddings lang = synth_language_embeddings(vocab, 32, 5, 0.3);
  const VisualEmbeddingProvider provider(lang, 11, 0.5);
  Rng rng(2);
  std::vector<std::vector<double>> m0, m1;
  for (int i = 0; i < 100; ++i) {
    m0.push_back(provider.sample(1, 0, 0.2, rng).vector);
    m1.push_back(provider.sample(1, 1, 0.2, rng).vector);
  }
  double within = 0.0, cross = 0.0;
  int nw = 0, nc = 0;
  for (int i = 0; i < 100; ++i) {
    for (int j = i + 1; j < 100; ++j) {
      within += dot(m0[i], m0[j]) + dot(m1[i], m1[j]);
      nw += 2;
    }
    for (int j = 0; j < 100; ++j) {
      cross += dot(m0[i], m1[j]);
      ++nc;
    }
  }
  CHECK(within / nw > cross / nc);
}

TEST_CASE("teacher argmax recovers the class at low noise") {
  const ClassVocabulary vocab = ClassVocabulary::default_vocabulary();
  const LanguageEmbeddings lang = synth_language_embeddings(vocab, 64, 21, 0.0);
  const VisualEmbeddingProvider provider(lang, 13, 0.35);
  Rng rng(3);
  int hits = 0;
  const int draws = 1000;
  for (int i = 0; i < draws; ++i) {
    const int cls = static_cast<int>(rng.uniform_index(vocab.size()));
    const int mode = static_cast<int>(rng.uniform_index(2));
    const VisualEmbedding v = provider.sample(cls, mode, 0.3, rng);
    std::size_t best = 0;
    double best_cos = -2.0;
    for (std::size_t c = 0; c < vocab.size(); ++c) {
      const double cc = dot(v.vector, lang.row(c));
      if (cc > best_cos) {
        best_cos = cc;
        best = c;
      }
    }
    if (static_cast<int>(best) == cls) ++hits;
  }
  CHECK(hits >= draws * 95 / 100);
}

TEST_CASE("cross-class visual-language alignment holds on average") {
  const ClassVocabulary vocab = ClassVocabulary::synthetic(6, 3);
  const LanguageEmbeddings lang = synth_language_embeddings(vocab, 32, 17, 0.2);
  const VisualEmbeddingProvider provider(lang, 19, 0.3);
  Rng rng(4);
  double own = 0.0, other = 0.0;
  for (int i = 0; i < 300; ++i) {
    const int cls = static_cast<int>(rng.uniform_index(6));
    const VisualEmbedding v = provider.sample(cls, 0, 0.3, rng);
    own += dot(v.vector, lang.row(cls));
    other += dot(v.vector, lang.row((cls + 3) % 6));
  }
  CHECK(own / 300 > other / 300);
}
