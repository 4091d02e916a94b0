#include <cmath>

#include "moelab/gradcheck.hpp"
#include "moelab/lmoe.hpp"
#include "moelab/objectives.hpp"
#include "moelab/ops.hpp"
#include "moelab/rng.hpp"

namespace moelab {

namespace {

Parameter leaf(const std::string& name, Tensor t) { return Parameter(name, std::move(t)); }

/// Scalarize a matrix-valued op with a fixed random weighting so the whole
/// Jacobian is exercised.
Value probe(const Value& out, Rng& rng) {
  Tensor w(out.val().rows(), out.val().cols());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = rng.uniform(-1.0, 1.0);
  return weighted_sum(out, w);
}

GradCheckCase unary_case(const std::string& name, std::uint64_t salt,
                         std::function<Value(const Value&, Rng&)> op) {
  return {name, [name, salt, op](std::uint64_t seed) {
            Rng rng(mix_seed(salt, seed));
            std::vector<Parameter> params{leaf("x", rng.gaussian_matrix(3, 5))};
            auto loss = [&]() {
              Rng probe_rng(mix_seed(salt, seed) ^ 0x9d);
              return op(params[0].value(), probe_rng);
            };
            return check_gradient(loss, params);
          }};
}

}  // namespace

std::vector<GradCheckCase> builtin_gradient_checks() {
  std::vector<GradCheckCase> cases;

  cases.push_back({"matmul", [](std::uint64_t seed) {
                     Rng rng(mix_seed(0x1001, seed));
                     std::vector<Parameter> params{leaf("a", rng.gaussian_matrix(3, 4)),
                                                   leaf("b", rng.gaussian_matrix(4, 2))};
                     auto loss = [&]() {
                       Rng pr(mix_seed(0x1001, seed) ^ 0x9d);
                       return probe(matmul(params[0].value(), params[1].value()), pr);
                     };
                     return check_gradient(loss, params);
                   }});

  cases.push_back({"matmul_nt", [](std::uint64_t seed) {
                     Rng rng(mix_seed(0x1002, seed));
                     std::vector<Parameter> params{leaf("a", rng.gaussian_matrix(3, 4)),
                                                   leaf("b", rng.gaussian_matrix(5, 4))};
                     auto loss = [&]() {
                       Rng pr(mix_seed(0x1002, seed) ^ 0x9d);
                       return probe(matmul_nt(params[0].value(), params[1].value()), pr);
                     };
                     return check_gradient(loss, params);
                   }});

  cases.push_back({"add", [](std::uint64_t seed) {
                     Rng rng(mix_seed(0x1003, seed));
                     std::vector<Parameter> params{leaf("a", rng.gaussian_matrix(3, 5)),
                                                   leaf("b", rng.gaussian_matrix(3, 5))};
                     auto loss = [&]() {
                       Rng pr(mix_seed(0x1003, seed) ^ 0x9d);
                       return probe(add(params[0].value(), params[1].value()), pr);
                     };
                     return check_gradient(loss, params);
                   }});

  cases.push_back({"add_rowvec", [](std::uint64_t seed) {
                     Rng rng(mix_seed(0x1004, seed));
                     std::vector<Parameter> params{leaf("x", rng.gaussian_matrix(3, 5)),
                                                   leaf("b", rng.gaussian_matrix(1, 5))};
                     auto loss = [&]() {
                       Rng pr(mix_seed(0x1004, seed) ^ 0x9d);
                       return probe(add_rowvec(params[0].value(), params[1].value()), pr);
                     };
                     return check_gradient(loss, params);
                   }});

  cases.push_back({"hadamard", [](std::uint64_t seed) {
                     Rng rng(mix_seed(0x1005, seed));
                     std::vector<Parameter> params{leaf("a", rng.gaussian_matrix(3, 5)),
                                                   leaf("b", rng.gaussian_matrix(3, 5))};
                     auto loss = [&]() {
                       Rng pr(mix_seed(0x1005, seed) ^ 0x9d);
                       return probe(hadamard(params[0].value(), params[1].value()), pr);
                     };
                     return check_gradient(loss, params);
                   }});

  cases.push_back({"mul_rowvec", [](std::uint64_t seed) {
                     Rng rng(mix_seed(0x1006, seed));
                     std::vector<Parameter> params{leaf("x", rng.gaussian_matrix(3, 5)),
                                                   leaf("r", rng.gaussian_matrix(1, 5))};
                     auto loss = [&]() {
                       Rng pr(mix_seed(0x1006, seed) ^ 0x9d);
                       return probe(mul_rowvec(params[0].value(), params[1].value()), pr);
                     };
                     return check_gradient(loss, params);
                   }});

  cases.push_back({"scale_rows", [](std::uint64_t seed) {
                     Rng rng(mix_seed(0x1007, seed));
                     std::vector<Parameter> params{leaf("x", rng.gaussian_matrix(3, 5)),
                                                   leaf("w", rng.gaussian_matrix(3, 1))};
                     auto loss = [&]() {
                       Rng pr(mix_seed(0x1007, seed) ^ 0x9d);
                       return probe(scale_rows(params[0].value(), params[1].value()), pr);
                     };
                     return check_gradient(loss, params);
                   }});

  cases.push_back({"rows_divide", [](std::uint64_t seed) {
                     Rng rng(mix_seed(0x1008, seed));
                     std::vector<Parameter> params{leaf("x", rng.gaussian_matrix(3, 5)),
                                                   leaf("s", rng.uniform_matrix(3, 1, 0.5, 2.0))};
                     auto loss = [&]() {
                       Rng pr(mix_seed(0x1008, seed) ^ 0x9d);
                       return probe(rows_divide(params[0].value(), params[1].value()), pr);
                     };
                     return check_gradient(loss, params);
                   }});

  cases.push_back(unary_case("scale", 0x1009, [](const Value& x, Rng& pr) {
    return probe(scale(x, 1.7), pr);
  }));
  cases.push_back(unary_case("add_scalar", 0x100a, [](const Value& x, Rng& pr) {
    return probe(add_scalar(x, -0.3), pr);
  }));
  cases.push_back(unary_case("relu", 0x100b, [](const Value& x, Rng& pr) {
    return probe(relu(x), pr);
  }));
  cases.push_back(unary_case("row_softmax", 0x100c, [](const Value& x, Rng& pr) {
    return probe(row_softmax(x), pr);
  }));
  cases.push_back(unary_case("row_log_softmax", 0x100d, [](const Value& x, Rng& pr) {
    return probe(row_log_softmax(x), pr);
  }));
  cases.push_back(unary_case("l2_normalize_rows", 0x100e, [](const Value& x, Rng& pr) {
    return probe(l2_normalize_rows(x), pr);
  }));

  cases.push_back({"cosine_similarity", [](std::uint64_t seed) {
                     Rng rng(mix_seed(0x100f, seed));
                     std::vector<Parameter> params{leaf("a", rng.gaussian_matrix(3, 6)),
                                                   leaf("b", rng.gaussian_matrix(4, 6))};
                     auto loss = [&]() {
                       Rng pr(mix_seed(0x100f, seed) ^ 0x9d);
                       return probe(cosine_similarity(params[0].value(), params[1].value()), pr);
                     };
                     return check_gradient(loss, params);
                   }});

  cases.push_back(unary_case("select_column", 0x1010, [](const Value& x, Rng& pr) {
    return probe(select_column(x, 2), pr);
  }));
  cases.push_back(unary_case("gather_rows", 0x1011, [](const Value& x, Rng& pr) {
    return probe(gather_rows(x, {2, 0, 2}), pr);  // duplicate row: VJP accumulates
  }));
  cases.push_back(unary_case("scatter_rows", 0x1012, [](const Value& x, Rng& pr) {
    return probe(scatter_rows(x, {4, 0, 2}, 6), pr);
  }));
  cases.push_back(unary_case("row_sums", 0x1013, [](const Value& x, Rng& pr) {
    return probe(row_sums(x), pr);
  }));
  cases.push_back(unary_case("weighted_sum", 0x1014, [](const Value& x, Rng& pr) {
    Tensor w(x.val().rows(), x.val().cols());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = pr.uniform(-1.0, 1.0);
    return weighted_sum(x, w);
  }));
  cases.push_back(unary_case("sum_all", 0x1015, [](const Value& x, Rng&) {
    return sum_all(x);
  }));
  cases.push_back(unary_case("mean_all", 0x1016, [](const Value& x, Rng&) {
    return mean_all(x);
  }));
  cases.push_back({"abs_diff_mean", [](std::uint64_t seed) {
                     Rng rng(mix_seed(0x1017, seed));
                     std::vector<Parameter> params{leaf("x", rng.gaussian_matrix(3, 5))};
                     // Fixed targets offset away from x so the +-eps probes
                     // never cross the |.| kink.
                     Tensor t(3, 5);
                     for (std::size_t i = 0; i < t.size(); ++i) {
                       const double off = 0.3 + rng.uniform(0.0, 0.7);
                       t[i] = params[0].tensor()[i] + (rng.uniform() < 0.5 ? off : -off);
                     }
                     auto loss = [&]() { return abs_diff_mean(params[0].value(), t); };
                     return check_gradient(loss, params);
                   }});
  cases.push_back(unary_case("sigmoid_focal_mean", 0x1018, [](const Value& x, Rng& pr) {
    Tensor t(x.val().rows(), x.val().cols());
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = pr.uniform() < 0.3 ? 1.0 : 0.0;
    return sigmoid_focal_mean(x, t, 0.25, 2.0);
  }));
  cases.push_back(unary_case("sigmoid_focal_mean_gamma0", 0x1019, [](const Value& x, Rng& pr) {
    Tensor t(x.val().rows(), x.val().cols());
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = pr.uniform() < 0.5 ? 1.0 : 0.0;
    return sigmoid_focal_mean(x, t, 0.5, 0.0);
  }));

  // Composite: full mixture layer forward plus the balance loss.
  cases.push_back({"lmoe_forward+balance", [](std::uint64_t seed) {
                     Rng rng(mix_seed(0x2001, seed));
                     LMoEConfig cfg;
                     cfg.experts = 3;
                     cfg.top_k = 2;
                     cfg.query_dim = 6;
                     cfg.lang_dim = 8;
                     cfg.routed_hidden = 7;
                     cfg.shared_hidden = 9;
                     LMoELayer layer(cfg, 5, "gc", rng);
                     std::vector<Parameter> params = layer.parameters();
                     // Spread the router away from its near-uniform init so the
                     // top-k selection has a stable margin under +-eps probes.
                     for (auto& p : params) {
                       if (p.name() == "gc.router.w") {
                         p.tensor() = rng.uniform_matrix(p.tensor().rows(),
                                                         p.tensor().cols(), -1.0, 1.0);
                       }
                     }
                     params.push_back(leaf("q", rng.gaussian_matrix(4, 6)));
                     Tensor p_language = rng.gaussian_matrix(5, 8);
                     auto loss = [&]() {
                       const LMoEForward fwd =
                           layer.forward(params.back().value(), p_language);
                       return add(mean_all(fwd.output),
                                  balance_loss(fwd.routing, cfg.experts));
                     };
                     return check_gradient(loss, params);
                   }});

  // Composite: camera alignment -> student similarity -> distillation loss.
  cases.push_back({"camera_align+kd_loss", [](std::uint64_t seed) {
                     Rng rng(mix_seed(0x2002, seed));
                     DistillParams dp = make_distill_params(6, 8, "gc", rng);
                     std::vector<Parameter> params = dp.parameters();
                     params.push_back(leaf("qbar", rng.gaussian_matrix(4, 6)));
                     Tensor extrinsics = rng.gaussian_matrix(3, 16);
                     Tensor p_language = rng.gaussian_matrix(5, 8);
                     std::vector<std::vector<double>> teachers;
                     for (int t = 0; t < 3; ++t) {
                       std::vector<double> row(5);
                       for (double& v : row) v = rng.uniform(-1.0, 1.0);
                       teachers.push_back(row);
                     }
                     auto loss = [&]() {
                       const std::vector<Value> qc =
                           camera_align(params.back().value(), extrinsics, dp);
                       std::vector<KdSample> samples;
                       samples.push_back(
                           {student_similarity_row(qc[0], 0, p_language), teachers[0], 0});
                       samples.push_back(
                           {student_similarity_row(qc[1], 0, p_language), teachers[1], 0});
                       samples.push_back(
                           {student_similarity_row(qc[2], 3, p_language), teachers[2], 1});
                       return kd_loss_grouped(samples, 0.7).loss;
                     };
                     return check_gradient(loss, params);
                   }});

  // Composite: projection -> contrastive focal loss. Moderate scales keep
  // most of the dot-product logits out of the saturated (flat) regime.
  cases.push_back({"contrastive_loss", [](std::uint64_t seed) {
                     Rng rng(mix_seed(0x2003, seed));
                     std::vector<Parameter> params{leaf("w", rng.gaussian_matrix(6, 8, 0.4)),
                                                   leaf("b", rng.gaussian_matrix(1, 8, 0.2))};
                     Tensor queries = rng.gaussian_matrix(4, 6);
                     Tensor p_language = rng.gaussian_matrix(5, 8, 0.4);
                     Tensor targets(4, 5);
                     for (std::size_t i = 0; i < targets.size(); ++i)
                       targets[i] = rng.uniform() < 0.25 ? 1.0 : 0.0;
                     auto loss = [&]() {
                       const Value q_hat =
                           add_rowvec(matmul(Value::constant(queries), params[0].value()),
                                      params[1].value());
                       return contrastive_loss(q_hat, p_language, targets);
                     };
                     return check_gradient(loss, params);
                   }});

  return cases;
}

}  // namespace moelab
