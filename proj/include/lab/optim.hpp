#pragma once

#include <vector>

#include "lab/params.hpp"

namespace lab {

// Heavy-ball SGD: v <- momentum * v + g;  p <- p - lr * v.
class SgdMomentum {
 public:
  SgdMomentum(double lr, double momentum);

  // Every parameter must carry a gradient; throws otherwise.
  void step(ParamSet& params);

  double lr() const noexcept { return lr_; }
  void set_lr(double lr);

 private:
  double lr_;
  double momentum_;
  std::vector<Tensor> velocity_;
};

// Adam with bias correction.
class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  void step(ParamSet& params);
  double lr() const noexcept { return lr_; }
  void set_lr(double lr);

 private:
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::vector<Tensor> m_, v_;
};

// Rescales all gradients so their global L2 norm is at most `max_norm`.
// Returns the norm before clipping.
double clip_grad_norm(ParamSet& params, double max_norm);

}  // namespace lab
