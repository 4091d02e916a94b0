#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "moelab/adam.hpp"
#include "moelab/autodiff.hpp"
#include "moelab/ops.hpp"
#include "moelab/rng.hpp"

namespace moelab {

/// What the router consumes: query-to-language similarity rows (the
/// language-guided design) or raw query features (the vanilla-MoE ablation).
enum class RouterInput { kLanguageSimilarity, kQueryFeature };

struct LMoEConfig {
  std::size_t experts = 4;  // M
  std::size_t top_k = 2;
  std::size_t query_dim = 64;   // D
  std::size_t lang_dim = 64;    // d
  std::size_t routed_hidden = 512;
  std::size_t shared_hidden = 1024;
  /// Off by default: aggregation uses the softmax weights as-is. When set,
  /// the selected weights are renormalized to sum to 1 per query before
  /// aggregation (ablation variant; the routing record keeps the raw
  /// softmax entries either way).
  bool renormalize_selected = false;
  RouterInput router_input = RouterInput::kLanguageSimilarity;

  void validate() const;
};

/// Per-query routing record: the full row-stochastic weight matrix, the
/// selected expert indices (weight-descending, ties to the lower index), and
/// the corresponding softmax weights.
struct RoutingDecision {
  Value weights;                                  // k x M, rows sum to 1
  std::vector<std::vector<std::size_t>> indices;  // k x top_k
  Tensor selected;                                // k x top_k
  std::size_t top_k = 0;

  std::size_t num_queries() const { return indices.size(); }
  std::size_t num_experts() const { return weights.val().cols(); }
};

struct LMoEForward {
  Value output;  // k x D refined queries
  Value q_hat;   // k x d language-space projection
  RoutingDecision routing;
};

/// Two-layer feed-forward expert with rectified-linear hidden activation.
struct ExpertParams {
  Parameter w1, b1, w2, b2;
  Value apply(const Value& x) const;
  std::size_t param_count() const;
};

ExpertParams make_expert(const std::string& name, std::size_t in_dim, std::size_t hidden,
                         std::size_t out_dim, Rng& rng);

/// Feed-forward replacement layer: query projection into language space,
/// similarity-driven routing over M experts plus an always-on shared expert.
class LMoELayer {
 public:
  LMoELayer(const LMoEConfig& cfg, std::size_t vocab_size, const std::string& name,
            Rng& rng);

  /// Affine map of queries into the language embedding space.
  Value project_queries(const Value& queries) const;

  /// Routing from the router input (similarity rows or raw features):
  /// R = affine(input), W = row_softmax(R), then top-k selection on W.
  /// Similarity inputs outside [-1,1] produce a one-time stderr warning.
  RoutingDecision route(const Value& router_in) const;

  /// Full layer: projection, similarity, routing, sparse expert aggregation
  /// plus the shared expert. Gradients flow through the selected routing
  /// weights and all expert parameters; the selection itself is fixed by the
  /// forward values.
  LMoEForward forward(const Value& queries, const Tensor& p_language) const;

  const LMoEConfig& config() const { return cfg_; }
  std::size_t vocab_size() const { return vocab_size_; }
  std::vector<Parameter> parameters() const;
  std::size_t param_count() const;
  const ExpertParams& shared_expert() const { return shared_; }
  const ExpertParams& routed_expert(std::size_t i) const { return routed_.at(i); }

 private:
  LMoEConfig cfg_;
  std::size_t vocab_size_ = 0;
  Parameter proj_w_, proj_b_;      // D -> d
  Parameter router_w_, router_b_;  // (n or D) -> M
  std::vector<ExpertParams> routed_;
  ExpertParams shared_;
  mutable bool warned_similarity_range_ = false;
};

/// L = M * sum_i F_i * P_i over a batch of routing decisions spanning B
/// queries, with F_i the fraction of queries whose top-k set contains expert
/// i (a count, no gradient) and P_i the mean routing probability (gradient
/// path). Throws on an empty batch.
Value balance_loss(const std::vector<const RoutingDecision*>& decisions, std::size_t experts);
Value balance_loss(const RoutingDecision& decision, std::size_t experts);

/// Selection fractions F and mean probabilities P per expert.
struct ExpertUtilization {
  std::vector<double> fraction;
  std::vector<double> mean_prob;
};
ExpertUtilization expert_utilization(const std::vector<const RoutingDecision*>& decisions,
                                     std::size_t experts);

/// counts(c, i) += 1 for every query labeled c whose top-k set contains i.
/// Labels of -1 are skipped (unmatched queries).
void accumulate_routing_matrix(Tensor& counts, const RoutingDecision& decision,
                               const std::vector<int>& labels);
Tensor routing_matrix(const RoutingDecision& decision, const std::vector<int>& labels,
                      std::size_t num_classes);

/// Mean over classes with any selections of (max row entry / row sum).
double mean_routing_purity(const Tensor& counts);

}  // namespace moelab
