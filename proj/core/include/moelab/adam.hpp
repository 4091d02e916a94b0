#pragma once

#include <cstddef>
#include <vector>

#include "moelab/autodiff.hpp"

namespace moelab {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update on a single tensor. `t` is the 1-based step
/// index; m and v must match the value shape and start at zero.
void adam_step(Tensor& value, const Tensor& grad, Tensor& m, Tensor& v, const AdamConfig& cfg,
               std::size_t t);

class Adam {
 public:
  Adam(std::vector<Parameter> params, AdamConfig cfg);

  void step();
  void zero_grad();
  std::size_t step_count() const { return t_; }

 private:
  std::vector<Parameter> params_;
  std::vector<Tensor> m_, v_;
  AdamConfig cfg_;
  std::size_t t_ = 0;
};

}  // namespace moelab
