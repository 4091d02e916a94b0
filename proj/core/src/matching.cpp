#include "moelab/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "moelab/ops.hpp"

namespace moelab {

CostMatrix build_cost(const Tensor& class_probs, const Tensor& pred_centers,
                      const std::vector<int>& gt_classes, const Tensor& gt_centers,
                      double lambda_cls, double lambda_center, bool use_focal_cost,
                      double focal_alpha, double focal_gamma) {
  const std::size_t k = class_probs.rows();
  const std::size_t G = gt_classes.size();
  if (pred_centers.rows() != k || pred_centers.cols() != 3)
    throw std::invalid_argument("build_cost: pred_centers must be kx3");
  if (gt_centers.rows() != G || gt_centers.cols() != 3)
    throw std::invalid_argument("build_cost: gt_centers must be Gx3");
  for (int c : gt_classes) {
    if (c < 0 || static_cast<std::size_t>(c) >= class_probs.cols())
      throw std::invalid_argument("build_cost: gt class id out of range");
  }
  for (std::size_t i = 0; i < class_probs.size(); ++i) {
    if (!(class_probs[i] >= 0.0 && class_probs[i] <= 1.0))
      throw std::invalid_argument("build_cost: probabilities must lie in [0,1]");
  }

  CostMatrix cm;
  cm.costs = Tensor(k, G);
  cm.class_term = Tensor(k, G);
  cm.center_term = Tensor(k, G);
  for (std::size_t q = 0; q < k; ++q) {
    for (std::size_t g = 0; g < G; ++g) {
      const double p = class_probs(q, static_cast<std::size_t>(gt_classes[g]));
      const double cls =
          use_focal_cost ? focal_term(p, 1, focal_alpha, focal_gamma) : (1.0 - p);
      double l1 = 0.0;
      for (std::size_t j = 0; j < 3; ++j)
        l1 += std::fabs(pred_centers(q, j) - gt_centers(g, j));
      cm.class_term(q, g) = cls;
      cm.center_term(q, g) = l1;
      cm.costs(q, g) = lambda_cls * cls + lambda_center * l1;
    }
  }
  return cm;
}

namespace {

// Augmenting-path Kuhn-Munkres on a square cost matrix (1-based potentials).
// Returns col index assigned to each row.
std::vector<std::size_t> solve_square(const Tensor& cost) {
  const std::size_t n = cost.rows();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> row_to_col(n, 0);
  for (std::size_t j = 1; j <= n; ++j) {
    if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
  }
  return row_to_col;
}

}  // namespace

Assignment hungarian(const CostMatrix& cost) { return hungarian(cost.costs); }

Assignment hungarian(const Tensor& costs) {
  costs.ensure_finite("hungarian costs");
  const std::size_t k = costs.rows();
  const std::size_t G = costs.cols();
  Assignment out;
  if (k == 0 || G == 0) return out;

  // Pad to square with a constant larger than any real entry; phantom pairs
  // are discarded afterwards.
  const std::size_t n = std::max(k, G);
  double maxc = 0.0;
  for (std::size_t i = 0; i < costs.size(); ++i) maxc = std::max(maxc, std::fabs(costs[i]));
  const double pad = 2.0 * maxc + 1.0;
  Tensor sq = Tensor::full(n, n, pad);
  for (std::size_t q = 0; q < k; ++q)
    for (std::size_t g = 0; g < G; ++g) sq(q, g) = costs(q, g);

  const std::vector<std::size_t> row_to_col = solve_square(sq);
  for (std::size_t q = 0; q < k; ++q) {
    const std::size_t g = row_to_col[q];
    if (g < G) {
      out.pairs.emplace_back(q, g);
      out.total_cost += costs(q, g);
    }
  }
  std::sort(out.pairs.begin(), out.pairs.end());
  return out;
}

namespace {

void enumerate_injections(const Tensor& costs, std::size_t g, std::vector<bool>& used,
                          std::vector<std::size_t>& current, double cost_so_far,
                          std::vector<std::size_t>& best, double& best_cost) {
  const std::size_t G = costs.cols();
  const std::size_t k = costs.rows();
  if (g == G) {
    if (cost_so_far < best_cost) {
      best_cost = cost_so_far;
      best = current;
    }
    return;
  }
  for (std::size_t q = 0; q < k; ++q) {
    if (used[q]) continue;
    used[q] = true;
    current.push_back(q);
    enumerate_injections(costs, g + 1, used, current, cost_so_far + costs(q, g), best,
                         best_cost);
    current.pop_back();
    used[q] = false;
  }
}

}  // namespace

Assignment brute_force_assignment(const Tensor& costs) {
  const std::size_t k = costs.rows();
  const std::size_t G = costs.cols();
  Assignment out;
  if (k == 0 || G == 0) return out;
  if (std::min(k, G) > 8) {
    throw std::invalid_argument("brute_force_assignment: min(k,G) must be <= 8");
  }

  if (G <= k) {
    std::vector<bool> used(k, false);
    std::vector<std::size_t> current, best;
    double best_cost = std::numeric_limits<double>::infinity();
    enumerate_injections(costs, 0, used, current, 0.0, best, best_cost);
    for (std::size_t g = 0; g < G; ++g) out.pairs.emplace_back(best[g], g);
    out.total_cost = best_cost;
  } else {
    // Fewer queries than objects: enumerate over the transposed problem.
    Tensor t(G, k);
    for (std::size_t q = 0; q < k; ++q)
      for (std::size_t g = 0; g < G; ++g) t(g, q) = costs(q, g);
    std::vector<bool> used(G, false);
    std::vector<std::size_t> current, best;
    double best_cost = std::numeric_limits<double>::infinity();
    enumerate_injections(t, 0, used, current, 0.0, best, best_cost);
    for (std::size_t q = 0; q < k; ++q) out.pairs.emplace_back(q, best[q]);
    out.total_cost = best_cost;
  }
  std::sort(out.pairs.begin(), out.pairs.end());
  return out;
}

Tensor target_matrix(const Assignment& assignment, const std::vector<int>& gt_classes,
                     std::size_t num_queries, std::size_t num_classes) {
  Tensor t(num_queries, num_classes);
  for (const auto& [q, g] : assignment.pairs) {
    if (q >= num_queries || g >= gt_classes.size())
      throw std::invalid_argument("target_matrix: assignment index out of range");
    const int c = gt_classes[g];
    if (c < 0 || static_cast<std::size_t>(c) >= num_classes)
      throw std::invalid_argument("target_matrix: class id out of range");
    t(q, static_cast<std::size_t>(c)) = 1.0;
  }
  return t;
}

}  // namespace moelab
