#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "moelab/autodiff.hpp"

namespace moelab {

struct GradCheckEntry {
  std::string param;
  double max_rel_err = 0.0;
  bool pass = true;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double tolerance = 0.0;
  bool pass = true;
  double worst() const {
    double w = 0.0;
    for (const auto& e : entries) w = std::max(w, e.max_rel_err);
    return w;
  }
};

/// Central-difference oracle against the backward pass: perturbs every entry
/// of every parameter by +-eps, compares (f(+)-f(-))/2eps with the gradient
/// from one reverse pass at the base point. loss_fn must be deterministic
/// given the parameters. Failures are reported, not thrown.
GradCheckReport check_gradient(const std::function<Value()>& loss_fn,
                               std::vector<Parameter>& params, double eps = 1e-5,
                               double tol = 1e-4);

/// One registered gradient check: builds a fresh random instance per seed and
/// runs check_gradient on it.
struct GradCheckCase {
  std::string name;
  std::function<GradCheckReport(std::uint64_t seed)> run;
};

/// The full registry: one case per differentiable op plus the composite
/// checks (mixture layer + balance loss, camera alignment -> distillation
/// loss, contrastive loss). Defined in gradcheck_suite.cpp.
std::vector<GradCheckCase> builtin_gradient_checks();

}  // namespace moelab
