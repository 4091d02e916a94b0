#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "moelab/tensor.hpp"

namespace moelab {

/// Query x ground-truth assignment costs, with the per-term breakdown kept
/// for diagnostics.
struct CostMatrix {
  Tensor costs;        // k x G
  Tensor class_term;   // k x G
  Tensor center_term;  // k x G
};

/// Matched (query, gt) pairs, sorted by query index. Queries not listed are
/// background; |pairs| = min(k, G).
struct Assignment {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  double total_cost = 0.0;
};

/// cost(q,g) = lambda_cls*(1 - p[q, class_g]) + lambda_center*L1(center_q, center_g).
/// With use_focal_cost the classification term becomes the focal negative
/// log-likelihood of the ground-truth class instead of (1-p).
CostMatrix build_cost(const Tensor& class_probs, const Tensor& pred_centers,
                      const std::vector<int>& gt_classes, const Tensor& gt_centers,
                      double lambda_cls = 2.0, double lambda_center = 0.25,
                      bool use_focal_cost = false, double focal_alpha = 0.25,
                      double focal_gamma = 2.0);

/// Minimum-cost bipartite assignment (augmenting-path Kuhn-Munkres on the
/// square-padded matrix). Deterministic; the returned pairs are listed in
/// lexicographic order.
Assignment hungarian(const CostMatrix& cost);
Assignment hungarian(const Tensor& costs);

/// Exhaustive minimum over all injections; requires min(k, G) <= 8. Test
/// oracle only.
Assignment brute_force_assignment(const Tensor& costs);

/// k x n binary matrix: matched query rows are one-hot at their gt class,
/// unmatched rows all-zero.
Tensor target_matrix(const Assignment& assignment, const std::vector<int>& gt_classes,
                     std::size_t num_queries, std::size_t num_classes);

}  // namespace moelab
