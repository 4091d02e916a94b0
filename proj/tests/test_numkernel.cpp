#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "moelab/adam.hpp"
#include "moelab/gradcheck.hpp"
#include "moelab/ops.hpp"
#include "moelab/rng.hpp"

using namespace moelab;

namespace {

// Independent oracles: naive implementations that never touch the graph ops.

Tensor matmul_oracle(const Tensor& a, const Tensor& b) {
  Tensor c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j)
      for (std::size_t t = 0; t < a.cols(); ++t) c(i, j) += a(i, t) * b(t, j);
  return c;
}

std::vector<double> softmax_oracle(const std::vector<double>& row) {
  std::vector<double> e(row.size());
  double s = 0.0;
  for (std::size_t i = 0; i < row.size(); ++i) {
    e[i] = std::exp(row[i]);
    s += e[i];
  }
  for (double& x : e) x /= s;
  return e;
}

std::vector<std::size_t> topk_oracle(const std::vector<double>& row, std::size_t k) {
  std::vector<std::size_t> idx(row.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&row](std::size_t a, std::size_t b) {
    return row[a] > row[b];  // stable: ties keep the lower index first
  });
  idx.resize(k);
  return idx;
}

}  // namespace

TEST_CASE("tensor construction and finiteness") {
  Tensor t = Tensor::from_rows({{1.0, 2.0}, {3.0, 4.0}});
  CHECK(t.rows() == 2);
  CHECK(t(1, 0) == 3.0);
  CHECK_THROWS(Tensor(2, 2, {1.0, 2.0, 3.0}));

  Tensor bad = Tensor::scalar(std::nan(""));
  CHECK_THROWS(Value::leaf(bad));
  CHECK_THROWS(Value::constant(Tensor::scalar(INFINITY)));
}

TEST_CASE("matmul identity and basis selection") {
  const Value i2 = Value::constant(Tensor::identity(2));
  const Value b = Value::constant(Tensor::from_rows({{1.0, 2.0}, {3.0, 4.0}}));
  CHECK(max_abs_diff(matmul(i2, b).val(), b.val()) == 0.0);

  const Value a = Value::constant(Tensor::from_rows({{1.0, 0.0}}));
  const Value col = Value::constant(Tensor::from_rows({{2.0}, {5.0}}));
  CHECK(matmul(a, col).val().item() == 2.0);
}

TEST_CASE("matmul against triple-loop oracle") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor a = rng.gaussian_matrix(3, 4);
    const Tensor b = rng.gaussian_matrix(4, 2);
    const Tensor got = matmul(Value::constant(a), Value::constant(b)).val();
    CHECK(max_abs_diff(got, matmul_oracle(a, b)) < 1e-12);
  }
}

TEST_CASE("matmul dimension error names both shapes") {
  const Value a = Value::constant(Tensor(3, 4));
  const Value b = Value::constant(Tensor(5, 2));
  CHECK_THROWS_WITH_AS(matmul(a, b),
                       doctest::Contains("3x4"), std::invalid_argument);
}

TEST_CASE("row_softmax uniform, stability, and frozen values") {
  const Value zeros = row_softmax(Value::constant(Tensor(1, 3)));
  for (std::size_t j = 0; j < 3; ++j) CHECK(zeros.val()(0, j) == doctest::Approx(1.0 / 3));

  const Value big =
      row_softmax(Value::constant(Tensor::from_rows({{1000.0, 0.0}})));
  CHECK(big.val()(0, 0) == doctest::Approx(1.0));
  CHECK(big.val()(0, 1) == doctest::Approx(0.0));
  CHECK(big.val().all_finite());

  const Value v = row_softmax(Value::constant(Tensor::from_rows({{1.0, 2.0, 3.0}})));
  CHECK(v.val()(0, 0) == doctest::Approx(0.09003).epsilon(1e-3));
  CHECK(v.val()(0, 1) == doctest::Approx(0.24473).epsilon(1e-3));
  CHECK(v.val()(0, 2) == doctest::Approx(0.66524).epsilon(1e-3));
  const std::vector<double> oracle = softmax_oracle({1.0, 2.0, 3.0});
  for (std::size_t j = 0; j < 3; ++j) CHECK(v.val()(0, j) == doctest::Approx(oracle[j]));
}

TEST_CASE("row_softmax rows sum to one within 1e-12 with positive entries") {
  Rng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor x = rng.gaussian_matrix(4, 9);
    const Tensor y = row_softmax(Value::constant(x)).val();
    for (std::size_t i = 0; i < 4; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < 9; ++j) {
        CHECK(y(i, j) > 0.0);
        s += y(i, j);
      }
      CHECK(std::fabs(s - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("l2_normalize_rows cases and degenerate flag") {
  const Value v = l2_normalize_rows(Value::constant(Tensor::from_rows({{3.0, 4.0}})));
  CHECK(v.val()(0, 0) == doctest::Approx(0.6));
  CHECK(v.val()(0, 1) == doctest::Approx(0.8));

  const Tensor unit = Tensor::from_rows({{0.6, 0.8}});
  CHECK(max_abs_diff(l2_normalize_rows(Value::constant(unit)).val(), unit) < 1e-15);

  std::vector<std::size_t> degenerate;
  const Value z = l2_normalize_rows(Value::constant(Tensor(1, 2)), &degenerate);
  CHECK(z.val()(0, 0) == 0.0);
  REQUIRE(degenerate.size() == 1);
  CHECK(degenerate[0] == 0);
}

TEST_CASE("cosine similarity values and symmetry") {
  const Tensor u = Tensor::from_rows({{0.6, 0.8}});
  CHECK(cosine_similarity(Value::constant(u), Value::constant(u)).val().item() ==
        doctest::Approx(1.0));

  const Value x = Value::constant(Tensor::from_rows({{1.0, 0.0}}));
  const Value y = Value::constant(Tensor::from_rows({{0.0, 1.0}}));
  CHECK(cosine_similarity(x, y).val().item() == doctest::Approx(0.0));

  const Value a = Value::constant(Tensor::from_rows({{1.0, 1.0}}));
  const Value b = Value::constant(Tensor::from_rows({{1.0, 0.0}}));
  CHECK(cosine_similarity(a, b).val().item() == doctest::Approx(1.0 / std::sqrt(2.0)));

  Rng rng(13);
  const Value p = Value::constant(rng.gaussian_matrix(4, 6));
  const Value q = Value::constant(rng.gaussian_matrix(3, 6));
  const Tensor pq = cosine_similarity(p, q).val();
  const Tensor qp = cosine_similarity(q, p).val();
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 3; ++j) CHECK(pq(i, j) == doctest::Approx(qp(j, i)));
  for (std::size_t i = 0; i < pq.size(); ++i) {
    CHECK(pq[i] <= 1.0 + 1e-9);
    CHECK(pq[i] >= -1.0 - 1e-9);
  }

  CHECK_THROWS(cosine_similarity(Value::constant(Tensor(2, 3)), Value::constant(Tensor(2, 4))));
}

TEST_CASE("topk_rows examples, tie break, and sort oracle") {
  const TopK t = topk_rows(Tensor::from_rows({{0.1, 0.7, 0.2}}), 2);
  CHECK(t.indices[0][0] == 1);
  CHECK(t.indices[0][1] == 2);
  CHECK(t.values(0, 0) == 0.7);

  const TopK tie = topk_rows(Tensor::from_rows({{0.5, 0.5, 0.5}}), 1);
  CHECK(tie.indices[0][0] == 0);

  CHECK_THROWS(topk_rows(Tensor(1, 3), 0));
  CHECK_THROWS(topk_rows(Tensor(1, 3), 4));

  Rng rng(14);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t cols = 2 + rng.uniform_index(8);
    const std::size_t k = 1 + rng.uniform_index(cols);
    Tensor x(2, cols);
    for (std::size_t i = 0; i < x.size(); ++i)
      x[i] = rng.uniform() < 0.2 ? 0.5 : rng.uniform();  // inject ties
    const TopK got = topk_rows(x, k);
    for (std::size_t r = 0; r < 2; ++r) {
      std::vector<double> row(cols);
      for (std::size_t j = 0; j < cols; ++j) row[j] = x(r, j);
      const std::vector<std::size_t> expect = topk_oracle(row, k);
      CHECK(got.indices[r] == expect);
    }
  }
}

TEST_CASE("kl_divergence identity, frozen value, and nonnegativity") {
  CHECK(kl_divergence({0.2, 0.3, 0.5}, {0.2, 0.3, 0.5}) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(kl_divergence({1.0, 0.0}, {0.5, 0.5}) == doctest::Approx(std::log(2.0)));

  Rng rng(15);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> p(5), q(5);
    double ps = 0.0, qs = 0.0;
    for (std::size_t i = 0; i < 5; ++i) {
      p[i] = rng.uniform() + 1e-3;
      q[i] = rng.uniform() + 1e-3;
      ps += p[i];
      qs += q[i];
    }
    for (std::size_t i = 0; i < 5; ++i) {
      p[i] /= ps;
      q[i] /= qs;
    }
    CHECK(kl_divergence(p, q) >= -1e-9);
  }

  CHECK_THROWS(kl_divergence({0.9, 0.3}, {0.5, 0.5}));
  CHECK_THROWS(kl_divergence({-0.1, 1.1}, {0.5, 0.5}));
}

TEST_CASE("kl is zero only at equality") {
  Rng rng(16);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> p(4), q(4);
    double ps = 0.0, qs = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
      p[i] = rng.uniform() + 0.05;
      q[i] = rng.uniform() + 0.05;
      ps += p[i];
      qs += q[i];
    }
    for (std::size_t i = 0; i < 4; ++i) {
      p[i] /= ps;
      q[i] /= qs;
    }
    double linf = 0.0;
    for (std::size_t i = 0; i < 4; ++i) linf = std::max(linf, std::fabs(p[i] - q[i]));
    if (linf > 0.05) CHECK(kl_divergence(p, q) > 1e-5);
    CHECK(kl_divergence(p, p) == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("focal_term frozen values") {
  // gamma = 0 collapses to plain cross-entropy.
  CHECK(focal_term(0.5, 1, 1.0, 0.0) == doctest::Approx(std::log(2.0)));
  // direct evaluation: 0.25 * (1-0.5)^2 * log 2.
  CHECK(focal_term(0.5, 1, 0.25, 2.0) == doctest::Approx(0.25 * 0.25 * std::log(2.0)));
  CHECK(focal_term(0.5, 1, 0.25, 2.0) == doctest::Approx(0.04332).epsilon(1e-3));
  // confident-correct limit.
  CHECK(focal_term(1.0 - 1e-9, 1, 0.25, 2.0) < 1e-12);
  CHECK_THROWS(focal_term(1.5, 1, 0.25, 2.0));
  CHECK_THROWS(focal_term(0.5, 2, 0.25, 2.0));
}

TEST_CASE("check_gradient on a quadratic is exact to rounding") {
  Rng rng(17);
  std::vector<Parameter> params{Parameter("theta", rng.gaussian_matrix(2, 3))};
  auto loss = [&]() {
    const Value theta = params[0].value();
    return scale(sum_all(hadamard(theta, theta)), 0.5);
  };
  const GradCheckReport report = check_gradient(loss, params, 1e-5, 1e-8);
  CHECK(report.pass);
  CHECK(report.worst() < 1e-8);
  // Analytic gradient of 0.5*||theta||^2 is theta itself.
  params[0].zero_grad();
  loss().backward();
  CHECK(max_abs_diff(params[0].grad(), params[0].tensor()) < 1e-12);
}

TEST_CASE("every registered op passes its gradient check") {
  for (const auto& check : builtin_gradient_checks()) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const GradCheckReport report = check.run(seed);
      INFO(check.name, " seed ", seed, " worst ", report.worst());
      CHECK(report.pass);
    }
  }
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  Parameter p("p", Tensor::from_rows({{1.0, -2.0}}));
  Adam adam({p}, {});
  p.zero_grad();
  adam.step();
  CHECK(p.tensor()(0, 0) == 1.0);
  CHECK(p.tensor()(0, 1) == -2.0);
}

TEST_CASE("adam single step matches hand computation") {
  // theta=1, g=0.5, lr=0.1: m=0.05, v=0.00025, mhat=0.5, vhat=0.25,
  // theta' = 1 - 0.1*0.5/(0.5+1e-8) = 0.900000002 (to 1e-9).
  Tensor value = Tensor::scalar(1.0);
  Tensor grad = Tensor::scalar(0.5);
  Tensor m(1, 1), v(1, 1);
  adam_step(value, grad, m, v, {0.1, 0.9, 0.999, 1e-8}, 1);
  CHECK(value.item() == doctest::Approx(0.900000002).epsilon(1e-9));
  CHECK(m.item() == doctest::Approx(0.05));
  CHECK(v.item() == doctest::Approx(0.00025));
}

TEST_CASE("adam on a quadratic decreases monotonically") {
  Parameter p("p", Tensor::from_rows({{1.0, -2.0, 3.0}}));
  Adam adam({p}, {0.01, 0.9, 0.999, 1e-8});
  auto loss_value = [&]() {
    double s = 0.0;
    for (std::size_t i = 0; i < 3; ++i) s += 0.5 * p.tensor()[i] * p.tensor()[i];
    return s;
  };
  double prev = loss_value();
  for (int step = 0; step < 50; ++step) {
    adam.zero_grad();
    scale(sum_all(hadamard(p.value(), p.value())), 0.5).backward();
    adam.step();
    const double cur = loss_value();
    CHECK(cur < prev);
    prev = cur;
  }
}

TEST_CASE("backward accumulates through shared nodes") {
  // f = sum(x*x) + sum(x): df/dx = 2x + 1.
  Parameter x("x", Tensor::from_rows({{1.5, -0.5}}));
  x.zero_grad();
  add(sum_all(hadamard(x.value(), x.value())), sum_all(x.value())).backward();
  CHECK(x.grad()(0, 0) == doctest::Approx(4.0));
  CHECK(x.grad()(0, 1) == doctest::Approx(0.0));
}
