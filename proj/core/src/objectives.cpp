#include "moelab/objectives.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

namespace moelab {

DistillParams make_distill_params(std::size_t query_dim, std::size_t lang_dim,
                                  const std::string& name, Rng& rng) {
  DistillParams p;
  const double qs = std::sqrt(1.0 / static_cast<double>(query_dim));
  p.query_align_w = Parameter(name + ".align.w", rng.gaussian_matrix(query_dim, lang_dim, qs));
  p.query_align_b = Parameter(name + ".align.b", Tensor(1, lang_dim));
  const double es = std::sqrt(1.0 / 16.0);
  p.extrinsic_embed_w = Parameter(name + ".extr.w", rng.gaussian_matrix(16, lang_dim, es));
  // Bias at one so the extrinsic gate starts near pass-through.
  p.extrinsic_embed_b = Parameter(name + ".extr.b", Tensor::full(1, lang_dim, 1.0));
  return p;
}

std::vector<Value> camera_align(const Value& refined_queries, const Tensor& extrinsics,
                                const DistillParams& params) {
  if (extrinsics.cols() != 16)
    throw std::invalid_argument("camera_align: extrinsics must be Cx16, got " +
                                extrinsics.shape_str());
  const Value aligned = add_rowvec(matmul(refined_queries, params.query_align_w.value()),
                                   params.query_align_b.value());
  const Value gates = add_rowvec(matmul(Value::constant(extrinsics),
                                        params.extrinsic_embed_w.value()),
                                 params.extrinsic_embed_b.value());
  std::vector<Value> per_camera;
  per_camera.reserve(extrinsics.rows());
  for (std::size_t c = 0; c < extrinsics.rows(); ++c) {
    per_camera.push_back(mul_rowvec(aligned, gather_rows(gates, {c})));
  }
  return per_camera;
}

Value student_similarity_row(const Value& camera_queries, std::size_t query_index,
                             const Tensor& p_language) {
  if (query_index >= camera_queries.val().rows())
    throw std::invalid_argument("student_similarity_row: query index out of range");
  return cosine_similarity(gather_rows(camera_queries, {query_index}),
                           Value::constant(p_language));
}

std::vector<double> teacher_similarity_row(const VisualEmbedding& visual,
                                           const Tensor& language_matrix) {
  const std::size_t n = language_matrix.rows();
  const std::size_t d = language_matrix.cols();
  if (visual.vector.size() != d)
    throw std::invalid_argument("teacher_similarity_row: dimension mismatch");
  double vn = 0.0;
  for (double x : visual.vector) vn += x * x;
  vn = std::sqrt(vn);
  std::vector<double> row(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double dot = 0.0, ln = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      dot += visual.vector[j] * language_matrix(i, j);
      ln += language_matrix(i, j) * language_matrix(i, j);
    }
    row[i] = dot / (vn * std::sqrt(ln));
  }
  return row;
}

std::vector<double> teacher_similarity_row(const VisualEmbedding& visual,
                                           const LanguageEmbeddings& language) {
  return teacher_similarity_row(visual, language.matrix);
}

namespace {

/// KL of one (student, teacher) pair after tempering both sides.
Value kd_term(const KdSample& sample, double tau, KLDirection direction) {
  const std::size_t n = sample.teacher_row.size();
  if (sample.student_row.val().rows() != 1 || sample.student_row.val().cols() != n)
    throw std::invalid_argument("kd_loss: student/teacher row shapes disagree");

  std::vector<double> tempered(n);
  for (std::size_t i = 0; i < n; ++i) tempered[i] = sample.teacher_row[i] / tau;
  const std::vector<double> pt = softmax_vector(tempered);

  const Value student_scaled = scale(sample.student_row, 1.0 / tau);
  if (direction == KLDirection::kTeacherRef) {
    // KL(pt || ps) = sum pt log pt - sum pt log ps.
    double entropy_term = 0.0;
    for (double p : pt) entropy_term += p * std::log(p);
    const Value cross = weighted_sum(row_log_softmax(student_scaled),
                                     Tensor::row_vector(std::vector<double>(pt)));
    return add_scalar(scale(cross, -1.0), entropy_term);
  }
  // KL(ps || pt) = sum ps (log ps - log pt).
  Tensor neg_log_pt(1, n);
  for (std::size_t i = 0; i < n; ++i) neg_log_pt(0, i) = -std::log(pt[i]);
  const Value ps = row_softmax(student_scaled);
  const Value log_ps = row_log_softmax(student_scaled);
  return sum_all(hadamard(ps, add(log_ps, Value::constant(neg_log_pt))));
}

}  // namespace

KdLossResult kd_loss(const std::vector<KdSample>& samples, double tau, KLDirection direction) {
  if (!(tau > 0.0)) throw std::invalid_argument("kd_loss: temperature must be > 0");
  KdLossResult result;
  result.samples = samples.size();
  if (samples.empty()) {
    result.loss = Value::constant(Tensor::scalar(0.0));
    result.empty = true;
    return result;
  }
  Value acc;
  for (const auto& s : samples) {
    const Value term = kd_term(s, tau, direction);
    acc = acc.defined() ? add(acc, term) : term;
  }
  result.loss = scale(acc, 1.0 / static_cast<double>(samples.size()));
  return result;
}

KdLossResult kd_loss_grouped(const std::vector<KdSample>& samples, double tau,
                             KLDirection direction) {
  if (!(tau > 0.0)) throw std::invalid_argument("kd_loss: temperature must be > 0");
  KdLossResult result;
  result.samples = samples.size();
  if (samples.empty()) {
    result.loss = Value::constant(Tensor::scalar(0.0));
    result.empty = true;
    return result;
  }
  std::map<std::size_t, std::vector<const KdSample*>> by_object;
  for (const auto& s : samples) by_object[s.object_id].push_back(&s);

  Value acc;
  for (const auto& [object, views] : by_object) {
    (void)object;
    Value obj_acc;
    for (const auto* s : views) {
      const Value term = kd_term(*s, tau, direction);
      obj_acc = obj_acc.defined() ? add(obj_acc, term) : term;
    }
    const Value obj_mean = scale(obj_acc, 1.0 / static_cast<double>(views.size()));
    acc = acc.defined() ? add(acc, obj_mean) : obj_mean;
  }
  result.loss = scale(acc, 1.0 / static_cast<double>(by_object.size()));
  return result;
}

Value contrastive_loss(const Value& q_hat, const Tensor& p_language, const Tensor& targets,
                       double alpha, double gamma) {
  if (q_hat.val().cols() != p_language.cols())
    throw std::invalid_argument("contrastive_loss: embedding dimensions disagree");
  if (targets.rows() != q_hat.val().rows() || targets.cols() != p_language.rows())
    throw std::invalid_argument("contrastive_loss: target matrix must be k x n");
  // Dot-product logits: unbounded, so confident background entries saturate
  // and the focal term can damp them (cosine-bounded logits cannot).
  const Value logits = matmul_nt(q_hat, Value::constant(p_language));
  return sigmoid_focal_mean(logits, targets, alpha, gamma);
}

double total_loss(const LossBundle& bundle) {
  return bundle.w_contrast * bundle.contrast + bundle.w_kd * bundle.kd +
         bundle.w_balance * bundle.balance;
}

}  // namespace moelab
