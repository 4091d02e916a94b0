#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "moelab/matching.hpp"
#include "moelab/rng.hpp"

using namespace moelab;

TEST_CASE("build_cost perfect prediction and degenerate weights") {
  Tensor probs(2, 3);
  probs(0, 1) = 1.0;
  probs(1, 0) = 1.0;
  Tensor centers = Tensor::from_rows({{1.0, 2.0, 0.5}, {0.0, 0.0, 0.0}});
  const std::vector<int> gt_classes{1};
  Tensor gt_centers = Tensor::from_rows({{1.0, 2.0, 0.5}});

  const CostMatrix cm = build_cost(probs, centers, gt_classes, gt_centers, 2.0, 0.25);
  CHECK(cm.costs(0, 0) == doctest::Approx(0.0));
  CHECK(cm.costs(1, 0) == doctest::Approx(2.0 * 1.0 + 0.25 * 3.5));

  const CostMatrix pure_cls = build_cost(probs, centers, gt_classes, gt_centers, 2.0, 0.0);
  CHECK(pure_cls.costs(1, 0) == doctest::Approx(2.0));
  CHECK(pure_cls.costs(0, 0) == doctest::Approx(0.0));
}

TEST_CASE("build_cost matches the elementwise formula on random input") {
  Rng rng(21);
  const std::size_t k = 5, G = 3, n = 4;
  Tensor probs(k, n);
  for (std::size_t i = 0; i < probs.size(); ++i) probs[i] = rng.uniform();
  const Tensor centers = rng.gaussian_matrix(k, 3);
  const Tensor gt_centers = rng.gaussian_matrix(G, 3);
  const std::vector<int> gt_classes{2, 0, 3};
  const CostMatrix cm = build_cost(probs, centers, gt_classes, gt_centers, 1.7, 0.4);
  for (std::size_t q = 0; q < k; ++q) {
    for (std::size_t g = 0; g < G; ++g) {
      double l1 = 0.0;
      for (std::size_t j = 0; j < 3; ++j) l1 += std::fabs(centers(q, j) - gt_centers(g, j));
      const double expect = 1.7 * (1.0 - probs(q, gt_classes[g])) + 0.4 * l1;
      CHECK(cm.costs(q, g) == doctest::Approx(expect));
    }
  }
  CHECK_THROWS(build_cost(Tensor::full(1, 2, 1.5), Tensor(1, 3), {0}, Tensor(1, 3)));
}

TEST_CASE("hungarian picks the zero diagonal") {
  Tensor costs = Tensor::full(3, 3, 5.0);
  for (std::size_t i = 0; i < 3; ++i) costs(i, i) = 0.0;
  const Assignment a = hungarian(costs);
  REQUIRE(a.pairs.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(a.pairs[i].first == i);
    CHECK(a.pairs[i].second == i);
  }
  CHECK(a.total_cost == 0.0);
}

TEST_CASE("hungarian singleton") {
  const Assignment a = hungarian(Tensor::from_rows({{3.5}}));
  REQUIRE(a.pairs.size() == 1);
  CHECK(a.total_cost == 3.5);
}

TEST_CASE("hungarian equals brute force on random rectangular instances") {
  Rng rng(22);
  for (int trial = 0; trial < 150; ++trial) {
    const std::size_t k = 1 + rng.uniform_index(7);
    const std::size_t g = 1 + rng.uniform_index(7);
    Tensor costs(k, g);
    for (std::size_t i = 0; i < costs.size(); ++i) costs[i] = rng.uniform(-5.0, 10.0);
    const Assignment fast = hungarian(costs);
    const Assignment slow = brute_force_assignment(costs);
    CHECK(fast.pairs.size() == std::min(k, g));
    CHECK(fast.total_cost == doctest::Approx(slow.total_cost).epsilon(1e-12));
  }
}

TEST_CASE("exhaustive 2x2 integer grid") {
  for (int a = 0; a <= 2; ++a)
    for (int b = 0; b <= 2; ++b)
      for (int c = 0; c <= 2; ++c)
        for (int d = 0; d <= 2; ++d) {
          const Tensor costs = Tensor::from_rows(
              {{static_cast<double>(a), static_cast<double>(b)},
               {static_cast<double>(c), static_cast<double>(d)}});
          CHECK(hungarian(costs).total_cost ==
                doctest::Approx(brute_force_assignment(costs).total_cost));
        }
}

TEST_CASE("constant shift leaves the argmin assignment unchanged") {
  Rng rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t k = 2 + rng.uniform_index(5);
    const std::size_t g = 2 + rng.uniform_index(5);
    Tensor costs(k, g);
    for (std::size_t i = 0; i < costs.size(); ++i) costs[i] = rng.uniform(0.0, 10.0);
    Tensor shifted = costs;
    const double c = rng.uniform(-3.0, 3.0);
    for (std::size_t i = 0; i < shifted.size(); ++i) shifted[i] += c;
    CHECK(hungarian(costs).pairs == hungarian(shifted).pairs);
  }
}

TEST_CASE("brute force respects the size guard and row-permutation symmetry") {
  CHECK_THROWS(brute_force_assignment(Tensor(9, 9)));

  Rng rng(24);
  Tensor costs(5, 4);
  for (std::size_t i = 0; i < costs.size(); ++i) costs[i] = rng.uniform(0.0, 5.0);
  Tensor permuted(5, 4);
  const std::size_t perm[5] = {3, 1, 4, 0, 2};
  for (std::size_t q = 0; q < 5; ++q)
    for (std::size_t g = 0; g < 4; ++g) permuted(perm[q], g) = costs(q, g);
  CHECK(brute_force_assignment(costs).total_cost ==
        doctest::Approx(brute_force_assignment(permuted).total_cost));
}

TEST_CASE("target matrix shape and conservation") {
  SUBCASE("no ground truth") {
    const Tensor t = target_matrix(Assignment{}, {}, 4, 3);
    for (std::size_t i = 0; i < t.size(); ++i) CHECK(t[i] == 0.0);
  }
  SUBCASE("single match") {
    Assignment a;
    a.pairs = {{5, 0}};
    const Tensor t = target_matrix(a, {2}, 7, 4);
    CHECK(t(5, 2) == 1.0);
    double total = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) total += t[i];
    CHECK(total == 1.0);
  }
  SUBCASE("row sums are 0 or 1 and total equals matched count") {
    Rng rng(25);
    Tensor costs(6, 4);
    for (std::size_t i = 0; i < costs.size(); ++i) costs[i] = rng.uniform(0.0, 1.0);
    const Assignment a = hungarian(costs);
    const std::vector<int> classes{1, 1, 0, 2};
    const Tensor t = target_matrix(a, classes, 6, 3);
    double total = 0.0;
    for (std::size_t q = 0; q < 6; ++q) {
      double row = 0.0;
      for (std::size_t c = 0; c < 3; ++c) row += t(q, c);
      CHECK((row == 0.0 || row == 1.0));
      total += row;
    }
    CHECK(total == static_cast<double>(a.pairs.size()));
  }
  SUBCASE("index errors") {
    Assignment a;
    a.pairs = {{9, 0}};
    CHECK_THROWS(target_matrix(a, {0}, 4, 3));
  }
}
