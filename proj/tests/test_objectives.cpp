#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "moelab/objectives.hpp"

using namespace moelab;

namespace {

void set_named(DistillParams& dp, const std::string& suffix, const Tensor& value) {
  for (auto& p : dp.parameters()) {
    if (p.name().size() >= suffix.size() &&
        p.name().compare(p.name().size() - suffix.size(), suffix.size(), suffix) == 0) {
      REQUIRE(p.tensor().same_shape(value));
      p.tensor() = value;
      return;
    }
  }
  FAIL("no parameter with suffix ", suffix);
}

std::vector<double> tensor_row(const Tensor& t, std::size_t i) {
  std::vector<double> r(t.cols());
  for (std::size_t j = 0; j < t.cols(); ++j) r[j] = t(i, j);
  return r;
}

}  // namespace

TEST_CASE("camera_align identity and annihilator gates") {
  Rng rng(51);
  DistillParams dp = make_distill_params(6, 8, "t", rng);
  const Tensor qbar = rng.gaussian_matrix(4, 6);
  const Tensor extrinsics = rng.gaussian_matrix(3, 16);

  SUBCASE("all-ones gate copies the aligned queries to every camera") {
    set_named(dp, ".extr.w", Tensor(16, 8));
    set_named(dp, ".extr.b", Tensor::full(1, 8, 1.0));
    const auto qc = camera_align(Value::constant(qbar), extrinsics, dp);
    REQUIRE(qc.size() == 3);
    const Value aligned = add_rowvec(matmul(Value::constant(qbar), dp.query_align_w.value()),
                                     dp.query_align_b.value());
    for (const auto& per_cam : qc) {
      CHECK(max_abs_diff(per_cam.val(), aligned.val()) < 1e-15);
    }
  }
  SUBCASE("all-zeros gate annihilates") {
    set_named(dp, ".extr.w", Tensor(16, 8));
    set_named(dp, ".extr.b", Tensor(1, 8));
    const auto qc = camera_align(Value::constant(qbar), extrinsics, dp);
    for (const auto& per_cam : qc) {
      for (std::size_t i = 0; i < per_cam.val().size(); ++i) CHECK(per_cam.val()[i] == 0.0);
    }
  }
  SUBCASE("hadamard structure matches the elementwise product") {
    const auto qc = camera_align(Value::constant(qbar), extrinsics, dp);
    const Value aligned = add_rowvec(matmul(Value::constant(qbar), dp.query_align_w.value()),
                                     dp.query_align_b.value());
    const Value gates = add_rowvec(matmul(Value::constant(extrinsics),
                                          dp.extrinsic_embed_w.value()),
                                   dp.extrinsic_embed_b.value());
    for (std::size_t c = 0; c < 3; ++c) {
      for (std::size_t q = 0; q < 4; ++q)
        for (std::size_t j = 0; j < 8; ++j)
          CHECK(qc[c].val()(q, j) ==
                doctest::Approx(aligned.val()(q, j) * gates.val()(c, j)).epsilon(1e-12));
    }
  }
  CHECK_THROWS(camera_align(Value::constant(qbar), Tensor(2, 8), dp));
}

TEST_CASE("student similarity peaks at the matching language row") {
  Rng rng(52);
  Tensor p_language(4, 8);
  {
    // Orthonormal-ish unit rows.
    const Tensor raw = rng.gaussian_matrix(4, 8);
    const Value normed = l2_normalize_rows(Value::constant(raw));
    p_language = normed.val();
  }
  Tensor queries(3, 8);
  for (std::size_t j = 0; j < 8; ++j) queries(1, j) = p_language(2, j);
  queries(0, 0) = 1.0;
  queries(2, 3) = -1.0;

  const Value row = student_similarity_row(Value::constant(queries), 1, p_language);
  CHECK(row.val().rows() == 1);
  CHECK(row.val().cols() == 4);
  CHECK(row.val()(0, 2) == doctest::Approx(1.0));
  for (std::size_t c = 0; c < 4; ++c) {
    CHECK(row.val()(0, c) <= 1.0 + 1e-9);
    CHECK(row.val()(0, c) >= -1.0 - 1e-9);
    if (c != 2) CHECK(row.val()(0, c) < 1.0 - 1e-6);
  }

  // Recomputation oracle: full cosine matrix row.
  const Value full = cosine_similarity(Value::constant(queries), Value::constant(p_language));
  for (std::size_t c = 0; c < 4; ++c)
    CHECK(row.val()(0, c) == doctest::Approx(full.val()(1, c)).epsilon(1e-12));

  // Positive rescaling of the student vector leaves the row unchanged.
  Tensor scaled = queries;
  for (std::size_t j = 0; j < 8; ++j) scaled(1, j) *= 42.0;
  const Value row_scaled = student_similarity_row(Value::constant(scaled), 1, p_language);
  CHECK(max_abs_diff(row.val(), row_scaled.val()) < 1e-12);

  CHECK_THROWS(student_similarity_row(Value::constant(queries), 9, p_language));
}

TEST_CASE("teacher similarity is constant and class-aligned") {
  Rng rng(53);
  const ClassVocabulary vocab = ClassVocabulary::synthetic(5, 1);
  const LanguageEmbeddings lang = synth_language_embeddings(vocab, 16, 9, 0.0);

  VisualEmbedding v;
  v.vector = lang.row(3);
  v.class_id = 3;
  const std::vector<double> row = teacher_similarity_row(v, lang);
  std::size_t best = 0;
  for (std::size_t c = 1; c < 5; ++c) {
    if (row[c] > row[best]) best = c;
  }
  CHECK(best == 3);
  CHECK(row[3] == doctest::Approx(1.0));

  // Perturbing unrelated trainable state cannot move the teacher.
  Parameter junk("student", rng.gaussian_matrix(4, 4));
  const std::vector<double> before = teacher_similarity_row(v, lang);
  junk.tensor().fill(123.0);
  const std::vector<double> after = teacher_similarity_row(v, lang);
  CHECK(before == after);  // bitwise

  const VisualEmbeddingProvider provider(lang, 3, 0.2);
  Rng draw(99);
  int hits = 0;
  for (int i = 0; i < 200; ++i) {
    const int cls = static_cast<int>(draw.uniform_index(5));
    const VisualEmbedding s = provider.sample(cls, 0, 0.2, draw);
    const std::vector<double> r = teacher_similarity_row(s, lang);
    std::size_t arg = 0;
    for (std::size_t c = 1; c < 5; ++c)
      if (r[c] > r[arg]) arg = c;
    if (static_cast<int>(arg) == cls) ++hits;
  }
  CHECK(hits >= 190);
}

TEST_CASE("kd loss identity, temperature limit, and oracle composition") {
  const std::vector<double> teacher{0.8, -0.2, 0.4};

  SUBCASE("student equal to teacher gives zero") {
    KdSample s{Value::constant(Tensor::row_vector({0.8, -0.2, 0.4})), teacher, 0};
    const KdLossResult r = kd_loss({s}, 1.0);
    CHECK(std::fabs(r.loss.val().item()) <= 1e-12);
    CHECK(!r.empty);
  }
  SUBCASE("huge temperature flattens both distributions") {
    KdSample s{Value::constant(Tensor::row_vector({-0.9, 0.1, 0.7})), teacher, 0};
    const KdLossResult r = kd_loss({s}, 1e4);
    CHECK(r.loss.val().item() < 1e-6);
    CHECK(r.loss.val().item() >= -1e-9);
  }
  SUBCASE("two-class case equals row_softmax + kl_divergence") {
    KdSample s{Value::constant(Tensor::row_vector({0.0, 1.0})), {1.0, 0.0}, 0};
    const KdLossResult r = kd_loss({s}, 1.0);
    const Tensor pt = row_softmax(Value::constant(Tensor::row_vector({1.0, 0.0}))).val();
    const Tensor ps = row_softmax(Value::constant(Tensor::row_vector({0.0, 1.0}))).val();
    const double oracle = kl_divergence(tensor_row(pt, 0), tensor_row(ps, 0));
    CHECK(r.loss.val().item() == doctest::Approx(oracle).epsilon(1e-12));
  }
  SUBCASE("student-reference direction swaps the arguments") {
    KdSample s{Value::constant(Tensor::row_vector({0.0, 1.0})), {1.0, 0.0}, 0};
    const KdLossResult r = kd_loss({s}, 1.0, KLDirection::kStudentRef);
    const Tensor pt = row_softmax(Value::constant(Tensor::row_vector({1.0, 0.0}))).val();
    const Tensor ps = row_softmax(Value::constant(Tensor::row_vector({0.0, 1.0}))).val();
    const double oracle = kl_divergence(tensor_row(ps, 0), tensor_row(pt, 0));
    CHECK(r.loss.val().item() == doctest::Approx(oracle).epsilon(1e-12));
  }
  SUBCASE("zero matched crops yield a flagged zero, not an error") {
    const KdLossResult r = kd_loss({}, 1.0);
    CHECK(r.empty);
    CHECK(r.loss.val().item() == 0.0);
  }
  SUBCASE("temperature must be positive") { CHECK_THROWS(kd_loss({}, 0.0)); }
}

TEST_CASE("grouped kd averages views within an object first") {
  auto sample = [](double a, double b, std::size_t object) {
    return KdSample{Value::constant(Tensor::row_vector({a, b})), {1.0, -1.0}, object};
  };
  const std::vector<KdSample> samples{sample(0.3, -0.1, 0), sample(-0.5, 0.9, 0),
                                      sample(0.2, 0.6, 1)};
  auto term = [](double a, double b) {
    const Tensor pt = row_softmax(Value::constant(Tensor::row_vector({1.0, -1.0}))).val();
    const Tensor ps = row_softmax(Value::constant(Tensor::row_vector({a, b}))).val();
    return kl_divergence({pt(0, 0), pt(0, 1)}, {ps(0, 0), ps(0, 1)});
  };
  const double t0 = term(0.3, -0.1), t1 = term(-0.5, 0.9), t2 = term(0.2, 0.6);
  CHECK(kd_loss(samples, 1.0).loss.val().item() ==
        doctest::Approx((t0 + t1 + t2) / 3.0).epsilon(1e-12));
  CHECK(kd_loss_grouped(samples, 1.0).loss.val().item() ==
        doctest::Approx(((t0 + t1) / 2.0 + t2) / 2.0).epsilon(1e-12));
}

TEST_CASE("kd loss stays nonnegative on random pairs") {
  Rng rng(54);
  for (int trial = 0; trial < 1000; ++trial) {
    Tensor student(1, 6);
    std::vector<double> teacher(6);
    for (std::size_t j = 0; j < 6; ++j) {
      student(0, j) = rng.uniform(-1.0, 1.0);
      teacher[j] = rng.uniform(-1.0, 1.0);
    }
    const KdLossResult r = kd_loss({{Value::constant(student), teacher, 0}}, 1.0);
    CHECK(r.loss.val().item() >= -1e-9);
  }
}

TEST_CASE("confident background drives the focal grid to zero") {
  Tensor logits = Tensor::full(3, 4, -20.0);
  Tensor targets(3, 4);
  const Value loss = sigmoid_focal_mean(Value::constant(logits), targets, 0.25, 2.0);
  CHECK(loss.val().item() < 1e-6);
  CHECK(loss.val().item() >= 0.0);
}

TEST_CASE("single focal entry contributes its share of the grid mean") {
  // One positive entry at p = 0.5; the rest are confident negatives.
  const std::size_t k = 3, n = 4;
  Tensor logits = Tensor::full(k, n, -20.0);
  logits(1, 2) = 0.0;
  Tensor targets(k, n);
  targets(1, 2) = 1.0;
  const Value loss = sigmoid_focal_mean(Value::constant(logits), targets, 0.25, 2.0);
  const double expect = focal_term(0.5, 1, 0.25, 2.0) / static_cast<double>(k * n);
  CHECK(loss.val().item() == doctest::Approx(expect).epsilon(1e-4));
  CHECK(loss.val().item() == doctest::Approx(0.04332 / 12.0).epsilon(1e-3));
}

TEST_CASE("contrastive loss validates shapes and matches the focal oracle") {
  Rng rng(55);
  const Tensor q_hat = rng.gaussian_matrix(3, 8);
  const Tensor p_language = rng.gaussian_matrix(5, 8);
  Tensor targets(3, 5);
  targets(0, 1) = 1.0;
  targets(2, 4) = 1.0;

  const Value loss = contrastive_loss(Value::constant(q_hat), p_language, targets, 0.25, 2.0);
  const Tensor logits =
      matmul_nt(Value::constant(q_hat), Value::constant(p_language)).val();
  double expect = 0.0;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 5; ++j)
      expect += focal_term(sigmoid(logits(i, j)), targets(i, j) == 1.0 ? 1 : 0, 0.25, 2.0);
  expect /= 15.0;
  CHECK(loss.val().item() == doctest::Approx(expect).epsilon(1e-12));

  CHECK_THROWS(contrastive_loss(Value::constant(q_hat), p_language, Tensor(2, 5)));
  CHECK_THROWS(contrastive_loss(Value::constant(q_hat), Tensor(5, 9), targets));
}

TEST_CASE("total loss combination") {
  LossBundle b;
  b.contrast = 1.0;
  b.kd = 1.0;
  b.balance = 1.0;
  CHECK(total_loss(b) == doctest::Approx(1.51));

  b.w_contrast = 0.0;
  b.w_kd = 0.0;
  b.w_balance = 0.0;
  CHECK(total_loss(b) == 0.0);

  // Linearity in each component.
  LossBundle l;
  l.contrast = 2.0;
  LossBundle r;
  r.contrast = 3.0;
  LossBundle s;
  s.contrast = 5.0;
  CHECK(total_loss(l) + total_loss(r) == doctest::Approx(total_loss(s)));
}
