#pragma once

#include <cstddef>
#include <vector>

#include "moelab/autodiff.hpp"
#include "moelab/tensor.hpp"

namespace moelab {

// Numeric guards (see also kEpsProb use in losses).
inline constexpr double kEpsNorm = 1e-12;  // zero-row threshold in l2_normalize_rows
inline constexpr double kEpsProb = 1e-7;   // probability floor in logs

// ---------------------------------------------------------------------------
// Differentiable operations. Each builds one tape node with a VJP; results of
// all-constant inputs are constants (no graph growth during evaluation).
// ---------------------------------------------------------------------------

/// C = A*B. VJP: dA += G*B^T, dB += A^T*G.
Value matmul(const Value& a, const Value& b);
/// C = A*B^T with A: pxd, B: qxd. VJP: dA += G*B, dB += G^T*A.
Value matmul_nt(const Value& a, const Value& b);

Value add(const Value& a, const Value& b);
/// y = x + row broadcast over rows. bias: 1xM.
Value add_rowvec(const Value& x, const Value& bias);
/// Elementwise product, same shape.
Value hadamard(const Value& a, const Value& b);
/// y[i,j] = x[i,j]*r[0,j], r: 1xM broadcast over rows.
Value mul_rowvec(const Value& x, const Value& r);
/// y[i,j] = x[i,j]*w[i,0], w: Kx1 broadcast over columns.
Value scale_rows(const Value& x, const Value& w);
/// y[i,j] = x[i,j]/s[i,0].
Value rows_divide(const Value& x, const Value& s);
Value scale(const Value& x, double c);
Value add_scalar(const Value& x, double c);
Value relu(const Value& x);

/// Row-wise softmax with max subtraction; rows sum to 1 within 1e-12.
Value row_softmax(const Value& x);
/// Row-wise log-softmax (stable); exp of the result is row_softmax.
Value row_log_softmax(const Value& x);

/// Rows scaled to unit L2 norm. Rows with norm <= kEpsNorm pass through
/// unchanged (identity VJP); their indices are appended to *degenerate when
/// given.
Value l2_normalize_rows(const Value& x, std::vector<std::size_t>* degenerate = nullptr);

/// sim(a,b) = normalize(a) * normalize(b)^T; entries in [-1-1e-9, 1+1e-9].
Value cosine_similarity(const Value& a, const Value& b);

/// Kx1 copy of column j.
Value select_column(const Value& x, std::size_t j);
/// Rows idx of x, in order (duplicates allowed; VJP accumulates).
Value gather_rows(const Value& x, const std::vector<std::size_t>& idx);
/// kxC zero matrix with row idx[i] set to x row i; idx must be unique.
Value scatter_rows(const Value& x, const std::vector<std::size_t>& idx, std::size_t out_rows);
/// Kx1 of row sums.
Value row_sums(const Value& x);

/// Scalar <X, W> (Frobenius inner product with a constant weight matrix).
Value weighted_sum(const Value& x, const Tensor& w);
Value sum_all(const Value& x);
Value mean_all(const Value& x);
/// Scalar mean |x - t| over all entries; t constant.
Value abs_diff_mean(const Value& x, const Tensor& t);

/// Mean over all entries of the binary focal loss applied to sigmoid(logit)
/// against targets in {0,1}. Probabilities are clamped to
/// [kEpsProb, 1-kEpsProb] inside the logs.
Value sigmoid_focal_mean(const Value& logits, const Tensor& targets, double alpha, double gamma);

// ---------------------------------------------------------------------------
// Plain (non-differentiable) kernels.
// ---------------------------------------------------------------------------

struct TopK {
  std::vector<std::vector<std::size_t>> indices;  // rows x k, weight-descending
  Tensor values;                                  // rows x k
};

/// Per row, the k largest entries in descending order; ties broken by lower
/// column index. Throws when k is out of [1, cols].
TopK topk_rows(const Tensor& x, std::size_t k);

/// Sum_i p_i log(p_i/q_i) with 0*log0 := 0 and q floored at kEpsProb.
/// Inputs must be probability rows of equal length (sums within 1e-6).
double kl_divergence(const std::vector<double>& p, const std::vector<double>& q);

/// Binary focal term on a single probability; y in {0,1}.
/// y=1: -alpha*(1-p)^gamma*log(p); y=0: -(1-alpha)*p^gamma*log(1-p).
double focal_term(double p, int y, double alpha, double gamma);

double sigmoid(double z);

/// Plain row softmax of a vector (max-subtracted).
std::vector<double> softmax_vector(const std::vector<double>& v);

/// Non-graph elementwise sigmoid of a tensor (used for matching costs).
Tensor sigmoid_tensor(const Tensor& logits);

}  // namespace moelab
