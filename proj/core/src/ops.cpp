#include "moelab/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace moelab {

namespace {

[[noreturn]] void dim_error(const char* op, const Tensor& a, const Tensor& b) {
  std::ostringstream msg;
  msg << op << ": shape mismatch: " << a.shape_str() << " vs " << b.shape_str();
  throw std::invalid_argument(msg.str());
}

Value make_result(Tensor out, const char* op, std::vector<Value> parents,
                  std::function<void(Node&)> bw) {
  bool rg = false;
  for (const auto& p : parents) rg = rg || p.requires_grad();
  auto node = std::make_shared<Node>();
  node->value = std::move(out);
  node->op = op;
  if (rg) {
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (const auto& p : parents) node->parents.push_back(p.node());
    node->backward = std::move(bw);
  }
  return Value::wrap(std::move(node));
}

bool wants(Node& n, std::size_t i) { return n.parents[i]->requires_grad; }

// dst += A*B
void add_mm(Tensor& dst, const Tensor& a, const Tensor& b) {
  const std::size_t r = a.rows(), k = a.cols(), c = b.cols();
  for (std::size_t i = 0; i < r; ++i) {
    double* out = dst.row_ptr(i);
    const double* ar = a.row_ptr(i);
    for (std::size_t t = 0; t < k; ++t) {
      const double av = ar[t];
      if (av == 0.0) continue;
      const double* br = b.row_ptr(t);
      for (std::size_t j = 0; j < c; ++j) out[j] += av * br[j];
    }
  }
}

// dst += A*B^T
void add_mm_nt(Tensor& dst, const Tensor& a, const Tensor& b) {
  const std::size_t r = a.rows(), d = a.cols(), q = b.rows();
  for (std::size_t i = 0; i < r; ++i) {
    const double* ar = a.row_ptr(i);
    double* out = dst.row_ptr(i);
    for (std::size_t j = 0; j < q; ++j) {
      const double* br = b.row_ptr(j);
      double acc = 0.0;
      for (std::size_t t = 0; t < d; ++t) acc += ar[t] * br[t];
      out[j] += acc;
    }
  }
}

// dst += A^T*B
void add_mm_tn(Tensor& dst, const Tensor& a, const Tensor& b) {
  const std::size_t r = a.rows(), k = a.cols(), c = b.cols();
  for (std::size_t i = 0; i < r; ++i) {
    const double* ar = a.row_ptr(i);
    const double* br = b.row_ptr(i);
    for (std::size_t t = 0; t < k; ++t) {
      const double av = ar[t];
      if (av == 0.0) continue;
      double* out = dst.row_ptr(t);
      for (std::size_t j = 0; j < c; ++j) out[j] += av * br[j];
    }
  }
}

}  // namespace

Value matmul(const Value& a, const Value& b) {
  const Tensor& A = a.val();
  const Tensor& B = b.val();
  if (A.cols() != B.rows()) dim_error("matmul: inner dimensions disagree", A, B);
  Tensor out(A.rows(), B.cols());
  add_mm(out, A, B);
  return make_result(std::move(out), "matmul", {a, b}, [](Node& n) {
    const Tensor& A = n.parents[0]->value;
    const Tensor& B = n.parents[1]->value;
    if (wants(n, 0)) add_mm_nt(n.parents[0]->ensure_grad(), n.grad, B);
    if (wants(n, 1)) add_mm_tn(n.parents[1]->ensure_grad(), A, n.grad);
  });
}

Value matmul_nt(const Value& a, const Value& b) {
  const Tensor& A = a.val();
  const Tensor& B = b.val();
  if (A.cols() != B.cols()) dim_error("matmul_nt: feature dimensions disagree", A, B);
  Tensor out(A.rows(), B.rows());
  add_mm_nt(out, A, B);
  return make_result(std::move(out), "matmul_nt", {a, b}, [](Node& n) {
    const Tensor& A = n.parents[0]->value;
    const Tensor& B = n.parents[1]->value;
    if (wants(n, 0)) add_mm(n.parents[0]->ensure_grad(), n.grad, B);
    if (wants(n, 1)) add_mm_tn(n.parents[1]->ensure_grad(), n.grad, A);
  });
}

Value add(const Value& a, const Value& b) {
  const Tensor& A = a.val();
  const Tensor& B = b.val();
  if (!A.same_shape(B)) dim_error("add", A, B);
  Tensor out(A.rows(), A.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] + B[i];
  return make_result(std::move(out), "add", {a, b}, [](Node& n) {
    for (int side = 0; side < 2; ++side) {
      if (!wants(n, side)) continue;
      Tensor& g = n.parents[side]->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
    }
  });
}

Value add_rowvec(const Value& x, const Value& bias) {
  const Tensor& X = x.val();
  const Tensor& B = bias.val();
  if (B.rows() != 1 || B.cols() != X.cols()) dim_error("add_rowvec", X, B);
  Tensor out(X.rows(), X.cols());
  for (std::size_t i = 0; i < X.rows(); ++i)
    for (std::size_t j = 0; j < X.cols(); ++j) out(i, j) = X(i, j) + B(0, j);
  return make_result(std::move(out), "add_rowvec", {x, bias}, [](Node& n) {
    if (wants(n, 0)) {
      Tensor& g = n.parents[0]->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
    }
    if (wants(n, 1)) {
      Tensor& g = n.parents[1]->ensure_grad();
      for (std::size_t i = 0; i < n.grad.rows(); ++i)
        for (std::size_t j = 0; j < n.grad.cols(); ++j) g(0, j) += n.grad(i, j);
    }
  });
}

Value hadamard(const Value& a, const Value& b) {
  const Tensor& A = a.val();
  const Tensor& B = b.val();
  if (!A.same_shape(B)) dim_error("hadamard", A, B);
  Tensor out(A.rows(), A.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] * B[i];
  return make_result(std::move(out), "hadamard", {a, b}, [](Node& n) {
    const Tensor& A = n.parents[0]->value;
    const Tensor& B = n.parents[1]->value;
    if (wants(n, 0)) {
      Tensor& g = n.parents[0]->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * B[i];
    }
    if (wants(n, 1)) {
      Tensor& g = n.parents[1]->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * A[i];
    }
  });
}

Value mul_rowvec(const Value& x, const Value& r) {
  const Tensor& X = x.val();
  const Tensor& R = r.val();
  if (R.rows() != 1 || R.cols() != X.cols()) dim_error("mul_rowvec", X, R);
  Tensor out(X.rows(), X.cols());
  for (std::size_t i = 0; i < X.rows(); ++i)
    for (std::size_t j = 0; j < X.cols(); ++j) out(i, j) = X(i, j) * R(0, j);
  return make_result(std::move(out), "mul_rowvec", {x, r}, [](Node& n) {
    const Tensor& X = n.parents[0]->value;
    const Tensor& R = n.parents[1]->value;
    if (wants(n, 0)) {
      Tensor& g = n.parents[0]->ensure_grad();
      for (std::size_t i = 0; i < X.rows(); ++i)
        for (std::size_t j = 0; j < X.cols(); ++j) g(i, j) += n.grad(i, j) * R(0, j);
    }
    if (wants(n, 1)) {
      Tensor& g = n.parents[1]->ensure_grad();
      for (std::size_t i = 0; i < X.rows(); ++i)
        for (std::size_t j = 0; j < X.cols(); ++j) g(0, j) += n.grad(i, j) * X(i, j);
    }
  });
}

Value scale_rows(const Value& x, const Value& w) {
  const Tensor& X = x.val();
  const Tensor& W = w.val();
  if (W.rows() != X.rows() || W.cols() != 1) dim_error("scale_rows", X, W);
  Tensor out(X.rows(), X.cols());
  for (std::size_t i = 0; i < X.rows(); ++i)
    for (std::size_t j = 0; j < X.cols(); ++j) out(i, j) = X(i, j) * W(i, 0);
  return make_result(std::move(out), "scale_rows", {x, w}, [](Node& n) {
    const Tensor& X = n.parents[0]->value;
    const Tensor& W = n.parents[1]->value;
    if (wants(n, 0)) {
      Tensor& g = n.parents[0]->ensure_grad();
      for (std::size_t i = 0; i < X.rows(); ++i)
        for (std::size_t j = 0; j < X.cols(); ++j) g(i, j) += n.grad(i, j) * W(i, 0);
    }
    if (wants(n, 1)) {
      Tensor& g = n.parents[1]->ensure_grad();
      for (std::size_t i = 0; i < X.rows(); ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < X.cols(); ++j) acc += n.grad(i, j) * X(i, j);
        g(i, 0) += acc;
      }
    }
  });
}

Value rows_divide(const Value& x, const Value& s) {
  const Tensor& X = x.val();
  const Tensor& S = s.val();
  if (S.rows() != X.rows() || S.cols() != 1) dim_error("rows_divide", X, S);
  Tensor out(X.rows(), X.cols());
  for (std::size_t i = 0; i < X.rows(); ++i)
    for (std::size_t j = 0; j < X.cols(); ++j) out(i, j) = X(i, j) / S(i, 0);
  return make_result(std::move(out), "rows_divide", {x, s}, [](Node& n) {
    const Tensor& X = n.parents[0]->value;
    const Tensor& S = n.parents[1]->value;
    if (wants(n, 0)) {
      Tensor& g = n.parents[0]->ensure_grad();
      for (std::size_t i = 0; i < X.rows(); ++i)
        for (std::size_t j = 0; j < X.cols(); ++j) g(i, j) += n.grad(i, j) / S(i, 0);
    }
    if (wants(n, 1)) {
      Tensor& g = n.parents[1]->ensure_grad();
      for (std::size_t i = 0; i < X.rows(); ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < X.cols(); ++j) acc += n.grad(i, j) * X(i, j);
        g(i, 0) -= acc / (S(i, 0) * S(i, 0));
      }
    }
  });
}

Value scale(const Value& x, double c) {
  const Tensor& X = x.val();
  Tensor out(X.rows(), X.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = X[i] * c;
  return make_result(std::move(out), "scale", {x}, [c](Node& n) {
    if (!wants(n, 0)) return;
    Tensor& g = n.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += c * n.grad[i];
  });
}

Value add_scalar(const Value& x, double c) {
  const Tensor& X = x.val();
  Tensor out(X.rows(), X.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = X[i] + c;
  return make_result(std::move(out), "add_scalar", {x}, [](Node& n) {
    if (!wants(n, 0)) return;
    Tensor& g = n.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
  });
}

Value relu(const Value& x) {
  const Tensor& X = x.val();
  Tensor out(X.rows(), X.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = X[i] > 0.0 ? X[i] : 0.0;
  return make_result(std::move(out), "relu", {x}, [](Node& n) {
    if (!wants(n, 0)) return;
    Tensor& g = n.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (n.value[i] > 0.0) g[i] += n.grad[i];
    }
  });
}

Value row_softmax(const Value& x) {
  const Tensor& X = x.val();
  X.ensure_finite("row_softmax input");
  Tensor out(X.rows(), X.cols());
  for (std::size_t i = 0; i < X.rows(); ++i) {
    const double* row = X.row_ptr(i);
    double m = row[0];
    for (std::size_t j = 1; j < X.cols(); ++j) m = std::max(m, row[j]);
    double s = 0.0;
    for (std::size_t j = 0; j < X.cols(); ++j) {
      out(i, j) = std::exp(row[j] - m);
      s += out(i, j);
    }
    for (std::size_t j = 0; j < X.cols(); ++j) out(i, j) /= s;
  }
  // VJP: dx_j = y_j * (g_j - sum_i g_i y_i) per row.
  return make_result(std::move(out), "row_softmax", {x}, [](Node& n) {
    if (!wants(n, 0)) return;
    Tensor& g = n.parents[0]->ensure_grad();
    const Tensor& y = n.value;
    for (std::size_t i = 0; i < y.rows(); ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < y.cols(); ++j) dot += n.grad(i, j) * y(i, j);
      for (std::size_t j = 0; j < y.cols(); ++j) g(i, j) += y(i, j) * (n.grad(i, j) - dot);
    }
  });
}

Value row_log_softmax(const Value& x) {
  const Tensor& X = x.val();
  X.ensure_finite("row_log_softmax input");
  Tensor out(X.rows(), X.cols());
  for (std::size_t i = 0; i < X.rows(); ++i) {
    const double* row = X.row_ptr(i);
    double m = row[0];
    for (std::size_t j = 1; j < X.cols(); ++j) m = std::max(m, row[j]);
    double s = 0.0;
    for (std::size_t j = 0; j < X.cols(); ++j) s += std::exp(row[j] - m);
    const double lse = m + std::log(s);
    for (std::size_t j = 0; j < X.cols(); ++j) out(i, j) = row[j] - lse;
  }
  // VJP: dx_j = g_j - softmax_j * sum_i g_i.
  return make_result(std::move(out), "row_log_softmax", {x}, [](Node& n) {
    if (!wants(n, 0)) return;
    Tensor& g = n.parents[0]->ensure_grad();
    const Tensor& y = n.value;
    for (std::size_t i = 0; i < y.rows(); ++i) {
      double gsum = 0.0;
      for (std::size_t j = 0; j < y.cols(); ++j) gsum += n.grad(i, j);
      for (std::size_t j = 0; j < y.cols(); ++j)
        g(i, j) += n.grad(i, j) - std::exp(y(i, j)) * gsum;
    }
  });
}

Value l2_normalize_rows(const Value& x, std::vector<std::size_t>* degenerate) {
  const Tensor& X = x.val();
  Tensor out(X.rows(), X.cols());
  std::vector<double> norms(X.rows(), 0.0);
  for (std::size_t i = 0; i < X.rows(); ++i) {
    double sq = 0.0;
    for (std::size_t j = 0; j < X.cols(); ++j) sq += X(i, j) * X(i, j);
    const double norm = std::sqrt(sq);
    norms[i] = norm;
    if (norm <= kEpsNorm) {
      if (degenerate) degenerate->push_back(i);
      for (std::size_t j = 0; j < X.cols(); ++j) out(i, j) = X(i, j);
    } else {
      for (std::size_t j = 0; j < X.cols(); ++j) out(i, j) = X(i, j) / norm;
    }
  }
  // VJP per row: dx = (g - (g . y) y) / norm; degenerate rows pass g through.
  return make_result(std::move(out), "l2_normalize_rows", {x},
                     [norms = std::move(norms)](Node& n) {
                       if (!wants(n, 0)) return;
                       Tensor& g = n.parents[0]->ensure_grad();
                       const Tensor& y = n.value;
                       for (std::size_t i = 0; i < y.rows(); ++i) {
                         if (norms[i] <= kEpsNorm) {
                           for (std::size_t j = 0; j < y.cols(); ++j) g(i, j) += n.grad(i, j);
                           continue;
                         }
                         double dot = 0.0;
                         for (std::size_t j = 0; j < y.cols(); ++j)
                           dot += n.grad(i, j) * y(i, j);
                         for (std::size_t j = 0; j < y.cols(); ++j)
                           g(i, j) += (n.grad(i, j) - dot * y(i, j)) / norms[i];
                       }
                     });
}

Value cosine_similarity(const Value& a, const Value& b) {
  if (a.val().cols() != b.val().cols())
    dim_error("cosine_similarity: feature dimensions disagree", a.val(), b.val());
  return matmul_nt(l2_normalize_rows(a), l2_normalize_rows(b));
}

Value select_column(const Value& x, std::size_t j) {
  const Tensor& X = x.val();
  if (j >= X.cols()) {
    throw std::invalid_argument("select_column: column index out of range for " + X.shape_str());
  }
  Tensor out(X.rows(), 1);
  for (std::size_t i = 0; i < X.rows(); ++i) out(i, 0) = X(i, j);
  return make_result(std::move(out), "select_column", {x}, [j](Node& n) {
    if (!wants(n, 0)) return;
    Tensor& g = n.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < n.value.rows(); ++i) g(i, j) += n.grad(i, 0);
  });
}

Value gather_rows(const Value& x, const std::vector<std::size_t>& idx) {
  const Tensor& X = x.val();
  for (std::size_t i : idx) {
    if (i >= X.rows())
      throw std::invalid_argument("gather_rows: row index out of range for " + X.shape_str());
  }
  Tensor out(idx.size(), X.cols());
  for (std::size_t r = 0; r < idx.size(); ++r)
    for (std::size_t j = 0; j < X.cols(); ++j) out(r, j) = X(idx[r], j);
  return make_result(std::move(out), "gather_rows", {x}, [idx](Node& n) {
    if (!wants(n, 0)) return;
    Tensor& g = n.parents[0]->ensure_grad();
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (std::size_t j = 0; j < n.value.cols(); ++j) g(idx[r], j) += n.grad(r, j);
  });
}

Value scatter_rows(const Value& x, const std::vector<std::size_t>& idx, std::size_t out_rows) {
  const Tensor& X = x.val();
  if (idx.size() != X.rows()) {
    throw std::invalid_argument("scatter_rows: index count does not match input rows");
  }
  std::vector<bool> seen(out_rows, false);
  for (std::size_t i : idx) {
    if (i >= out_rows) throw std::invalid_argument("scatter_rows: row index out of range");
    if (seen[i]) throw std::invalid_argument("scatter_rows: duplicate target row");
    seen[i] = true;
  }
  Tensor out(out_rows, X.cols());
  for (std::size_t r = 0; r < idx.size(); ++r)
    for (std::size_t j = 0; j < X.cols(); ++j) out(idx[r], j) = X(r, j);
  return make_result(std::move(out), "scatter_rows", {x}, [idx](Node& n) {
    if (!wants(n, 0)) return;
    Tensor& g = n.parents[0]->ensure_grad();
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (std::size_t j = 0; j < n.value.cols(); ++j) g(r, j) += n.grad(idx[r], j);
  });
}

Value row_sums(const Value& x) {
  const Tensor& X = x.val();
  Tensor out(X.rows(), 1);
  for (std::size_t i = 0; i < X.rows(); ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < X.cols(); ++j) acc += X(i, j);
    out(i, 0) = acc;
  }
  return make_result(std::move(out), "row_sums", {x}, [](Node& n) {
    if (!wants(n, 0)) return;
    Tensor& g = n.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) g(i, j) += n.grad(i, 0);
  });
}

Value weighted_sum(const Value& x, const Tensor& w) {
  const Tensor& X = x.val();
  if (!X.same_shape(w)) dim_error("weighted_sum", X, w);
  double acc = 0.0;
  for (std::size_t i = 0; i < X.size(); ++i) acc += X[i] * w[i];
  return make_result(Tensor::scalar(acc), "weighted_sum", {x}, [w](Node& n) {
    if (!wants(n, 0)) return;
    Tensor& g = n.parents[0]->ensure_grad();
    const double gs = n.grad(0, 0);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += gs * w[i];
  });
}

Value sum_all(const Value& x) {
  const Tensor& X = x.val();
  const double acc = std::accumulate(X.data().begin(), X.data().end(), 0.0);
  return make_result(Tensor::scalar(acc), "sum_all", {x}, [](Node& n) {
    if (!wants(n, 0)) return;
    Tensor& g = n.parents[0]->ensure_grad();
    const double gs = n.grad(0, 0);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += gs;
  });
}

Value mean_all(const Value& x) {
  const Tensor& X = x.val();
  if (X.empty()) throw std::invalid_argument("mean_all of empty tensor");
  const double acc = std::accumulate(X.data().begin(), X.data().end(), 0.0);
  const double inv = 1.0 / static_cast<double>(X.size());
  return make_result(Tensor::scalar(acc * inv), "mean_all", {x}, [inv](Node& n) {
    if (!wants(n, 0)) return;
    Tensor& g = n.parents[0]->ensure_grad();
    const double gs = n.grad(0, 0) * inv;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += gs;
  });
}

Value abs_diff_mean(const Value& x, const Tensor& t) {
  const Tensor& X = x.val();
  if (!X.same_shape(t)) dim_error("abs_diff_mean", X, t);
  if (X.empty()) throw std::invalid_argument("abs_diff_mean of empty tensor");
  double acc = 0.0;
  for (std::size_t i = 0; i < X.size(); ++i) acc += std::fabs(X[i] - t[i]);
  const double inv = 1.0 / static_cast<double>(X.size());
  return make_result(Tensor::scalar(acc * inv), "abs_diff_mean", {x}, [t, inv](Node& n) {
    if (!wants(n, 0)) return;
    Tensor& g = n.parents[0]->ensure_grad();
    const Tensor& X = n.parents[0]->value;
    const double gs = n.grad(0, 0) * inv;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double d = X[i] - t[i];
      if (d > 0.0) g[i] += gs;
      else if (d < 0.0) g[i] -= gs;
    }
  });
}

namespace {

double clamp_prob(double p) { return std::min(std::max(p, kEpsProb), 1.0 - kEpsProb); }

}  // namespace

Value sigmoid_focal_mean(const Value& logits, const Tensor& targets, double alpha, double gamma) {
  const Tensor& Z = logits.val();
  if (!Z.same_shape(targets)) dim_error("sigmoid_focal_mean", Z, targets);
  if (Z.empty()) throw std::invalid_argument("sigmoid_focal_mean of empty tensor");
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i] != 0.0 && targets[i] != 1.0)
      throw std::invalid_argument("sigmoid_focal_mean: targets must be 0 or 1");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < Z.size(); ++i) {
    acc += focal_term(sigmoid(Z[i]), targets[i] == 1.0 ? 1 : 0, alpha, gamma);
  }
  const double inv = 1.0 / static_cast<double>(Z.size());
  return make_result(
      Tensor::scalar(acc * inv), "sigmoid_focal_mean", {logits},
      [targets, alpha, gamma, inv](Node& n) {
        if (!wants(n, 0)) return;
        Tensor& g = n.parents[0]->ensure_grad();
        const Tensor& Z = n.parents[0]->value;
        const double gs = n.grad(0, 0) * inv;
        for (std::size_t i = 0; i < Z.size(); ++i) {
          const double p = sigmoid(Z[i]);
          // Where the probability clamp engages the forward is locally flat.
          if (p <= kEpsProb || p >= 1.0 - kEpsProb) continue;
          double dfdp;
          if (targets[i] == 1.0) {
            const double foc = gamma == 0.0 ? 0.0 : gamma * std::pow(1.0 - p, gamma - 1.0);
            dfdp = alpha * (foc * std::log(p) - std::pow(1.0 - p, gamma) / p);
          } else {
            const double foc = gamma == 0.0 ? 0.0 : gamma * std::pow(p, gamma - 1.0);
            dfdp = (1.0 - alpha) * (-foc * std::log(1.0 - p) + std::pow(p, gamma) / (1.0 - p));
          }
          g[i] += gs * dfdp * p * (1.0 - p);
        }
      });
}

TopK topk_rows(const Tensor& x, std::size_t k) {
  if (k < 1 || k > x.cols()) {
    std::ostringstream msg;
    msg << "topk_rows: k=" << k << " out of range for " << x.shape_str();
    throw std::invalid_argument(msg.str());
  }
  TopK result;
  result.indices.resize(x.rows());
  result.values = Tensor(x.rows(), k);
  std::vector<std::size_t> cols(x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    std::iota(cols.begin(), cols.end(), 0);
    const double* row = x.row_ptr(i);
    std::partial_sort(cols.begin(), cols.begin() + static_cast<std::ptrdiff_t>(k), cols.end(),
                      [row](std::size_t a, std::size_t b) {
                        if (row[a] != row[b]) return row[a] > row[b];
                        return a < b;  // ties: lower column index wins
                      });
    result.indices[i].assign(cols.begin(), cols.begin() + static_cast<std::ptrdiff_t>(k));
    for (std::size_t j = 0; j < k; ++j) result.values(i, j) = row[cols[j]];
  }
  return result;
}

double kl_divergence(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) {
    throw std::invalid_argument("kl_divergence: length mismatch");
  }
  double ps = 0.0, qs = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(p[i] >= 0.0) || !(q[i] >= 0.0))
      throw std::invalid_argument("kl_divergence: negative or NaN probability");
    ps += p[i];
    qs += q[i];
  }
  if (std::fabs(ps - 1.0) > 1e-6 || std::fabs(qs - 1.0) > 1e-6)
    throw std::invalid_argument("kl_divergence: rows must sum to 1 within 1e-6");
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;  // 0*log0 := 0
    acc += p[i] * std::log(p[i] / std::max(q[i], kEpsProb));
  }
  return acc;
}

double focal_term(double p, int y, double alpha, double gamma) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("focal_term: p outside [0,1]");
  if (y != 0 && y != 1) throw std::invalid_argument("focal_term: target must be 0 or 1");
  const double pc = clamp_prob(p);
  if (y == 1) return -alpha * std::pow(1.0 - pc, gamma) * std::log(pc);
  return -(1.0 - alpha) * std::pow(pc, gamma) * std::log(1.0 - pc);
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

std::vector<double> softmax_vector(const std::vector<double>& v) {
  std::vector<double> out(v.size());
  double m = v[0];
  for (double x : v) m = std::max(m, x);
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - m);
    s += out[i];
  }
  for (double& x : out) x /= s;
  return out;
}

Tensor sigmoid_tensor(const Tensor& logits) {
  Tensor out(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = sigmoid(logits[i]);
  return out;
}

}  // namespace moelab
