#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "moelab/autodiff.hpp"
#include "moelab/ops.hpp"
#include "moelab/rng.hpp"
#include "moelab/semantics.hpp"

namespace moelab {

/// Parameters of the camera-conditioned query alignment: one affine map for
/// refined queries (D -> d) and one for flattened extrinsics (16 -> d).
struct DistillParams {
  Parameter query_align_w, query_align_b;
  Parameter extrinsic_embed_w, extrinsic_embed_b;
  double temperature = 1.0;

  std::vector<Parameter> parameters() const {
    return {query_align_w, query_align_b, extrinsic_embed_w, extrinsic_embed_b};
  }
};

DistillParams make_distill_params(std::size_t query_dim, std::size_t lang_dim,
                                  const std::string& name, Rng& rng);

/// Camera-aligned queries: align(Q)[q,:] ⊙ embed(E)[c,:] per camera, the
/// outer-broadcast Hadamard reading of a kxd by Cxd product. One kxd value
/// per camera.
std::vector<Value> camera_align(const Value& refined_queries, const Tensor& extrinsics,
                                const DistillParams& params);

/// Cosine of one camera-aligned query row against every language row (1 x n).
Value student_similarity_row(const Value& camera_queries, std::size_t query_index,
                             const Tensor& p_language);

/// Teacher side of the pair: plain cosine row, no gradient by construction.
std::vector<double> teacher_similarity_row(const VisualEmbedding& visual,
                                           const Tensor& language_matrix);
std::vector<double> teacher_similarity_row(const VisualEmbedding& visual,
                                           const LanguageEmbeddings& language);

/// KL direction for distillation. Teacher-as-reference is the default; the
/// opposite order is kept as a config flag.
enum class KLDirection { kTeacherRef, kStudentRef };

struct KdSample {
  Value student_row;                // 1 x n similarity
  std::vector<double> teacher_row;  // n similarities, constant
  std::size_t object_id = 0;        // matched ground-truth object this view belongs to
};

struct KdLossResult {
  Value loss;       // scalar; constant 0 when no samples exist
  bool empty = false;
  std::size_t samples = 0;
};

/// Mean over samples of KL(softmax(t/tau) || softmax(s/tau)) (teacher-ref
/// direction; the flag swaps the arguments). Zero samples yield a flagged
/// constant 0 so loss traces stay aligned across steps.
KdLossResult kd_loss(const std::vector<KdSample>& samples, double tau,
                     KLDirection direction = KLDirection::kTeacherRef);

/// Multi-view aggregation: per-view KL terms are averaged within each
/// object, then averaged over objects.
KdLossResult kd_loss_grouped(const std::vector<KdSample>& samples, double tau,
                             KLDirection direction = KLDirection::kTeacherRef);

/// Focal loss on the sigmoid of dot-product logits q_hat * language^T
/// against the 0/1 target matrix, mean over the k x n grid.
Value contrastive_loss(const Value& q_hat, const Tensor& p_language, const Tensor& targets,
                       double alpha = 0.25, double gamma = 2.0);

/// The three method losses and their combination weights.
struct LossBundle {
  double contrast = 0.0;
  double kd = 0.0;
  double balance = 0.0;
  double w_contrast = 1.0;
  double w_kd = 0.5;
  double w_balance = 0.01;
};

double total_loss(const LossBundle& bundle);

}  // namespace moelab
