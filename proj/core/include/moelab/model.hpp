#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "moelab/config.hpp"
#include "moelab/lmoe.hpp"
#include "moelab/objectives.hpp"

namespace moelab {

/// One refinement layer: an affine+relu query transform standing in for the
/// attention block, followed by either the mixture layer or a plain
/// feed-forward net. Either path owns a language projection so every layer
/// exposes one q_hat.
struct ModelLayer {
  Parameter transform_w, transform_b;
  std::unique_ptr<LMoELayer> moe;      // set when the layer runs the MoE
  std::optional<ExpertParams> ffn;     // set otherwise
  Parameter proj_w, proj_b;            // standalone projection (FFN path only)
};

/// Per-scene forward products consumed by the losses and the reports.
struct ModelForward {
  std::vector<Value> q_hats;                  // one per layer
  std::vector<RoutingDecision> routing;       // one per MoE-bearing layer
  std::vector<std::size_t> routing_layers;    // layer index of each decision
  Value q_bar;        // final refined queries, k x D
  Value head_q_hat;   // head projection of q_bar, k x d
  Value logits;       // cosine(head_q_hat, language), k x n
  Value centers;      // k x 3
};

class Model {
 public:
  Model(const ModelConfig& cfg, std::size_t vocab_size, std::uint64_t seed);

  ModelForward forward(const Tensor& observations, const Tensor& p_language) const;

  std::vector<Parameter> parameters() const;
  std::size_t param_count() const;
  const ModelConfig& config() const { return cfg_; }
  const DistillParams& distill() const { return distill_; }
  DistillParams& distill() { return distill_; }
  std::size_t moe_layer_count() const;

 private:
  ModelConfig cfg_;
  std::size_t vocab_size_ = 0;
  std::vector<ModelLayer> layers_;
  Parameter head_proj_w_, head_proj_b_;  // D -> d classification projection
  Parameter center_w_, center_b_;        // D -> 3 center regression
  DistillParams distill_;
};

}  // namespace moelab
