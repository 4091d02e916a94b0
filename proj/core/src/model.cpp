#include "moelab/model.hpp"

#include <cmath>
#include <sstream>

namespace moelab {

Model::Model(const ModelConfig& cfg, std::size_t vocab_size, std::uint64_t seed)
    : cfg_(cfg), vocab_size_(vocab_size) {
  Rng rng(mix_seed(seed, 0x0de1ULL));
  const std::size_t D = cfg_.query_dim;
  const std::size_t d = cfg_.lang_dim;
  const double ts = std::sqrt(2.0 / static_cast<double>(D));
  const double ps = std::sqrt(1.0 / static_cast<double>(D));

  LMoEConfig moe_cfg;
  moe_cfg.experts = cfg_.experts;
  moe_cfg.top_k = cfg_.top_k;
  moe_cfg.query_dim = D;
  moe_cfg.lang_dim = d;
  moe_cfg.routed_hidden = cfg_.routed_hidden;
  moe_cfg.shared_hidden = cfg_.shared_hidden;
  moe_cfg.renormalize_selected = cfg_.renormalize_top_k;
  moe_cfg.router_input = cfg_.router_mode == RouterMode::kLanguageGuided
                             ? RouterInput::kLanguageSimilarity
                             : RouterInput::kQueryFeature;

  layers_.reserve(cfg_.layers);
  for (std::size_t l = 0; l < cfg_.layers; ++l) {
    std::ostringstream name;
    name << "layer" << l;
    ModelLayer layer;
    layer.transform_w = Parameter(name.str() + ".transform.w", rng.gaussian_matrix(D, D, ts));
    layer.transform_b = Parameter(name.str() + ".transform.b", Tensor(1, D));
    if (cfg_.layer_has_moe(l)) {
      layer.moe = std::make_unique<LMoELayer>(moe_cfg, vocab_size_, name.str() + ".moe", rng);
    } else {
      layer.ffn = make_expert(name.str() + ".ffn", D, cfg_.ffn_hidden, D, rng);
      layer.proj_w = Parameter(name.str() + ".proj.w", rng.gaussian_matrix(D, d, ps));
      layer.proj_b = Parameter(name.str() + ".proj.b", Tensor(1, d));
    }
    layers_.push_back(std::move(layer));
  }

  head_proj_w_ = Parameter("head.proj.w", rng.gaussian_matrix(D, d, ps));
  head_proj_b_ = Parameter("head.proj.b", Tensor(1, d));
  center_w_ = Parameter("head.center.w", rng.gaussian_matrix(D, 3, ps));
  center_b_ = Parameter("head.center.b", Tensor(1, 3));
  distill_ = make_distill_params(D, d, "distill", rng);
}

ModelForward Model::forward(const Tensor& observations, const Tensor& p_language) const {
  ModelForward out;
  Value h = Value::constant(observations);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const ModelLayer& layer = layers_[l];
    const Value u = relu(add_rowvec(matmul(h, layer.transform_w.value()),
                                    layer.transform_b.value()));
    if (layer.moe) {
      LMoEForward moe = layer.moe->forward(u, p_language);
      out.q_hats.push_back(moe.q_hat);
      out.routing.push_back(std::move(moe.routing));
      out.routing_layers.push_back(l);
      h = std::move(moe.output);
    } else {
      out.q_hats.push_back(add_rowvec(matmul(u, layer.proj_w.value()), layer.proj_b.value()));
      h = layer.ffn->apply(u);
    }
  }
  out.q_bar = h;
  out.head_q_hat = add_rowvec(matmul(h, head_proj_w_.value()), head_proj_b_.value());
  // Dot-product classification logits (language rows are unit norm).
  out.logits = matmul_nt(out.head_q_hat, Value::constant(p_language));
  out.centers = add_rowvec(matmul(h, center_w_.value()), center_b_.value());
  return out;
}

std::vector<Parameter> Model::parameters() const {
  std::vector<Parameter> params;
  for (const auto& layer : layers_) {
    params.push_back(layer.transform_w);
    params.push_back(layer.transform_b);
    if (layer.moe) {
      for (auto& p : layer.moe->parameters()) params.push_back(p);
    } else {
      for (auto& p : {layer.ffn->w1, layer.ffn->b1, layer.ffn->w2, layer.ffn->b2})
        params.push_back(p);
      params.push_back(layer.proj_w);
      params.push_back(layer.proj_b);
    }
  }
  params.push_back(head_proj_w_);
  params.push_back(head_proj_b_);
  params.push_back(center_w_);
  params.push_back(center_b_);
  for (auto& p : distill_.parameters()) params.push_back(p);
  return params;
}

std::size_t Model::param_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.size();
  return n;
}

std::size_t Model::moe_layer_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) n += layer.moe ? 1 : 0;
  return n;
}

}  // namespace moelab
