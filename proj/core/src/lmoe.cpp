#include "moelab/lmoe.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace moelab {

void LMoEConfig::validate() const {
  if (experts < 1) throw std::invalid_argument("LMoE needs at least one expert");
  if (top_k < 1 || top_k > experts)
    throw std::invalid_argument("LMoE top_k must lie in [1, experts]");
  if (query_dim < 1 || lang_dim < 1 || routed_hidden < 1 || shared_hidden < 1)
    throw std::invalid_argument("LMoE dimensions must be >= 1");
}

Value ExpertParams::apply(const Value& x) const {
  const Value hidden = relu(add_rowvec(matmul(x, w1.value()), b1.value()));
  return add_rowvec(matmul(hidden, w2.value()), b2.value());
}

std::size_t ExpertParams::param_count() const {
  return w1.size() + b1.size() + w2.size() + b2.size();
}

ExpertParams make_expert(const std::string& name, std::size_t in_dim, std::size_t hidden,
                         std::size_t out_dim, Rng& rng) {
  const double s1 = std::sqrt(2.0 / static_cast<double>(in_dim));
  const double s2 = std::sqrt(2.0 / static_cast<double>(hidden));
  ExpertParams e;
  e.w1 = Parameter(name + ".w1", rng.gaussian_matrix(in_dim, hidden, s1));
  e.b1 = Parameter(name + ".b1", Tensor(1, hidden));
  e.w2 = Parameter(name + ".w2", rng.gaussian_matrix(hidden, out_dim, s2));
  e.b2 = Parameter(name + ".b2", Tensor(1, out_dim));
  return e;
}

LMoELayer::LMoELayer(const LMoEConfig& cfg, std::size_t vocab_size, const std::string& name,
                     Rng& rng)
    : cfg_(cfg), vocab_size_(vocab_size) {
  cfg_.validate();
  if (vocab_size_ < 1) throw std::invalid_argument("LMoE vocabulary size must be >= 1");

  const double proj_std = std::sqrt(1.0 / static_cast<double>(cfg_.query_dim));
  proj_w_ = Parameter(name + ".proj.w",
                      rng.gaussian_matrix(cfg_.query_dim, cfg_.lang_dim, proj_std));
  proj_b_ = Parameter(name + ".proj.b", Tensor(1, cfg_.lang_dim));

  // Small uniform router so initial routing is near-uniform.
  const std::size_t router_in =
      cfg_.router_input == RouterInput::kLanguageSimilarity ? vocab_size_ : cfg_.query_dim;
  router_w_ = Parameter(name + ".router.w",
                        rng.uniform_matrix(router_in, cfg_.experts, -0.01, 0.01));
  router_b_ = Parameter(name + ".router.b", Tensor(1, cfg_.experts));

  routed_.reserve(cfg_.experts);
  for (std::size_t i = 0; i < cfg_.experts; ++i) {
    std::ostringstream ename;
    ename << name << ".expert" << i;
    routed_.push_back(
        make_expert(ename.str(), cfg_.query_dim, cfg_.routed_hidden, cfg_.query_dim, rng));
  }
  shared_ = make_expert(name + ".shared", cfg_.query_dim, cfg_.shared_hidden, cfg_.query_dim,
                        rng);
}

Value LMoELayer::project_queries(const Value& queries) const {
  if (queries.val().cols() != cfg_.query_dim) {
    throw std::invalid_argument("project_queries: expected width " +
                                std::to_string(cfg_.query_dim) + ", got " +
                                queries.val().shape_str());
  }
  return add_rowvec(matmul(queries, proj_w_.value()), proj_b_.value());
}

RoutingDecision LMoELayer::route(const Value& router_in) const {
  const std::size_t expected =
      cfg_.router_input == RouterInput::kLanguageSimilarity ? vocab_size_ : cfg_.query_dim;
  if (router_in.val().cols() != expected) {
    throw std::invalid_argument("route: router input width " +
                                std::to_string(router_in.val().cols()) + " does not match " +
                                std::to_string(expected));
  }
  if (cfg_.router_input == RouterInput::kLanguageSimilarity && !warned_similarity_range_) {
    for (std::size_t i = 0; i < router_in.val().size(); ++i) {
      const double v = router_in.val()[i];
      if (v < -1.0 - 1e-6 || v > 1.0 + 1e-6) {
        std::fprintf(stderr,
                     "moelab: warning: router similarity input outside [-1,1] (%g)\n", v);
        warned_similarity_range_ = true;
        break;
      }
    }
  }

  const Value logits = add_rowvec(matmul(router_in, router_w_.value()), router_b_.value());
  RoutingDecision decision;
  decision.weights = row_softmax(logits);
  decision.top_k = cfg_.top_k;
  const TopK top = topk_rows(decision.weights.val(), cfg_.top_k);
  decision.indices = top.indices;
  decision.selected = top.values;
  return decision;
}

LMoEForward LMoELayer::forward(const Value& queries, const Tensor& p_language) const {
  if (p_language.rows() != vocab_size_ || p_language.cols() != cfg_.lang_dim) {
    throw std::invalid_argument("lmoe forward: language matrix is " + p_language.shape_str() +
                                ", expected " + std::to_string(vocab_size_) + "x" +
                                std::to_string(cfg_.lang_dim));
  }
  LMoEForward out;
  out.q_hat = project_queries(queries);

  if (cfg_.router_input == RouterInput::kLanguageSimilarity) {
    const Value similarity = cosine_similarity(out.q_hat, Value::constant(p_language));
    out.routing = route(similarity);
  } else {
    out.routing = route(queries);
  }

  const std::size_t k = queries.val().rows();
  Value weights = out.routing.weights;
  if (cfg_.renormalize_selected) {
    Tensor mask(k, cfg_.experts);
    for (std::size_t q = 0; q < k; ++q)
      for (std::size_t i : out.routing.indices[q]) mask(q, i) = 1.0;
    const Value selected_sum = row_sums(hadamard(weights, Value::constant(mask)));
    weights = rows_divide(weights, selected_sum);
  }

  // Sparse aggregation: each expert runs on the queries that selected it,
  // scaled by its routing weight, scattered back into the k x D layout.
  Value mixture = shared_.apply(queries);
  for (std::size_t i = 0; i < cfg_.experts; ++i) {
    std::vector<std::size_t> rows;
    for (std::size_t q = 0; q < k; ++q) {
      for (std::size_t sel : out.routing.indices[q]) {
        if (sel == i) {
          rows.push_back(q);
          break;
        }
      }
    }
    if (rows.empty()) continue;
    const Value sub = gather_rows(queries, rows);
    const Value expert_out = routed_[i].apply(sub);
    const Value w_col = gather_rows(select_column(weights, i), rows);
    mixture = add(mixture, scatter_rows(scale_rows(expert_out, w_col), rows, k));
  }
  out.output = std::move(mixture);
  return out;
}

std::vector<Parameter> LMoELayer::parameters() const {
  std::vector<Parameter> params{proj_w_, proj_b_, router_w_, router_b_};
  for (const auto& e : routed_) {
    params.push_back(e.w1);
    params.push_back(e.b1);
    params.push_back(e.w2);
    params.push_back(e.b2);
  }
  params.push_back(shared_.w1);
  params.push_back(shared_.b1);
  params.push_back(shared_.w2);
  params.push_back(shared_.b2);
  return params;
}

std::size_t LMoELayer::param_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.size();
  return n;
}

Value balance_loss(const std::vector<const RoutingDecision*>& decisions, std::size_t experts) {
  std::size_t total_queries = 0;
  for (const auto* d : decisions) total_queries += d->num_queries();
  if (total_queries == 0) throw std::invalid_argument("balance_loss: empty batch");

  std::vector<double> selected_count(experts, 0.0);
  for (const auto* d : decisions) {
    if (d->num_experts() != experts)
      throw std::invalid_argument("balance_loss: expert count mismatch");
    for (const auto& row : d->indices) {
      for (std::size_t i : row) selected_count[i] += 1.0;
    }
  }

  // L = M * sum_i F_i P_i with P_i = (1/B) sum_q W[q,i]: fold the constants
  // into one weight matrix per decision and keep the gradient through W.
  const double inv_b = 1.0 / static_cast<double>(total_queries);
  Value loss;
  for (const auto* d : decisions) {
    Tensor coeff(d->num_queries(), experts);
    for (std::size_t q = 0; q < d->num_queries(); ++q) {
      for (std::size_t i = 0; i < experts; ++i) {
        coeff(q, i) = static_cast<double>(experts) * selected_count[i] * inv_b * inv_b;
      }
    }
    const Value term = weighted_sum(d->weights, coeff);
    loss = loss.defined() ? add(loss, term) : term;
  }
  return loss;
}

Value balance_loss(const RoutingDecision& decision, std::size_t experts) {
  return balance_loss(std::vector<const RoutingDecision*>{&decision}, experts);
}

ExpertUtilization expert_utilization(const std::vector<const RoutingDecision*>& decisions,
                                     std::size_t experts) {
  ExpertUtilization u;
  u.fraction.assign(experts, 0.0);
  u.mean_prob.assign(experts, 0.0);
  std::size_t total = 0;
  for (const auto* d : decisions) {
    total += d->num_queries();
    for (const auto& row : d->indices)
      for (std::size_t i : row) u.fraction[i] += 1.0;
    const Tensor& w = d->weights.val();
    for (std::size_t q = 0; q < w.rows(); ++q)
      for (std::size_t i = 0; i < experts; ++i) u.mean_prob[i] += w(q, i);
  }
  if (total > 0) {
    for (std::size_t i = 0; i < experts; ++i) {
      u.fraction[i] /= static_cast<double>(total);
      u.mean_prob[i] /= static_cast<double>(total);
    }
  }
  return u;
}

void accumulate_routing_matrix(Tensor& counts, const RoutingDecision& decision,
                               const std::vector<int>& labels) {
  if (labels.size() != decision.num_queries())
    throw std::invalid_argument("routing_matrix: label count does not match query count");
  for (std::size_t q = 0; q < labels.size(); ++q) {
    if (labels[q] < 0) continue;
    const auto c = static_cast<std::size_t>(labels[q]);
    if (c >= counts.rows()) throw std::invalid_argument("routing_matrix: label out of range");
    for (std::size_t i : decision.indices[q]) counts(c, i) += 1.0;
  }
}

Tensor routing_matrix(const RoutingDecision& decision, const std::vector<int>& labels,
                      std::size_t num_classes) {
  Tensor counts(num_classes, decision.num_experts());
  accumulate_routing_matrix(counts, decision, labels);
  return counts;
}

double mean_routing_purity(const Tensor& counts) {
  double total = 0.0;
  std::size_t classes = 0;
  for (std::size_t c = 0; c < counts.rows(); ++c) {
    double row_sum = 0.0, row_max = 0.0;
    for (std::size_t i = 0; i < counts.cols(); ++i) {
      row_sum += counts(c, i);
      row_max = std::max(row_max, counts(c, i));
    }
    if (row_sum > 0.0) {
      total += row_max / row_sum;
      ++classes;
    }
  }
  return classes == 0 ? 0.0 : total / static_cast<double>(classes);
}

}  // namespace moelab
