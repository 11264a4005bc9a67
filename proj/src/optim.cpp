#include "lab/optim.hpp"

#include <cmath>

#include "lab/errors.hpp"

namespace lab {

SgdMomentum::SgdMomentum(double lr, double momentum) : lr_(lr), momentum_(momentum) {
  if (!(lr > 0.0)) throw UsageError("sgd: learning rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw UsageError("sgd: momentum must lie in [0,1)");
}

void SgdMomentum::set_lr(double lr) {
  if (!(lr > 0.0)) throw UsageError("sgd: learning rate must be positive");
  lr_ = lr;
}

void SgdMomentum::step(ParamSet& params) {
  auto& items = params.items();
  for (const auto& p : items) {
    if (p.grad.is_null()) throw Error("sgd: parameter '" + p.name + "' has no gradient");
    if (p.grad.shape() != p.value.shape()) throw ShapeError("sgd: gradient shape mismatch for '" + p.name + "'");
  }
  if (velocity_.empty()) {
    for (const auto& p : items) velocity_.emplace_back(p.value.shape(), 0.0);
  }
  if (velocity_.size() != items.size()) throw Error("sgd: parameter set changed between steps");
  for (std::size_t i = 0; i < items.size(); ++i) {
    double* v = velocity_[i].raw();
    double* w = items[i].value.raw();
    const double* g = items[i].grad.raw();
    for (std::size_t j = 0; j < velocity_[i].numel(); ++j) {
      v[j] = momentum_ * v[j] + g[j];
      w[j] -= lr_ * v[j];
    }
  }
}

Adam::Adam(double lr, double beta1, double beta2, double eps) : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  if (!(lr > 0.0)) throw UsageError("adam: learning rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw UsageError("adam: betas must lie in [0,1)");
}

void Adam::set_lr(double lr) {
  if (!(lr > 0.0)) throw UsageError("adam: learning rate must be positive");
  lr_ = lr;
}

void Adam::step(ParamSet& params) {
  auto& items = params.items();
  for (const auto& p : items) {
    if (p.grad.is_null()) throw Error("adam: parameter '" + p.name + "' has no gradient");
  }
  if (m_.empty()) {
    for (const auto& p : items) {
      m_.emplace_back(p.value.shape(), 0.0);
      v_.emplace_back(p.value.shape(), 0.0);
    }
  }
  if (m_.size() != items.size()) throw Error("adam: parameter set changed between steps");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < items.size(); ++i) {
    double* m = m_[i].raw();
    double* v = v_[i].raw();
    double* w = items[i].value.raw();
    const double* g = items[i].grad.raw();
    for (std::size_t j = 0; j < m_[i].numel(); ++j) {
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
      w[j] -= lr_ * (m[j] / c1) / (std::sqrt(v[j] / c2) + eps_);
    }
  }
}

double clip_grad_norm(ParamSet& params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params.items()) {
    if (p.grad.is_null()) continue;
    for (double g : p.grad.data()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (auto& p : params.items()) {
      if (p.grad.is_null()) continue;
      for (double& g : p.grad.data()) g *= s;
    }
  }
  return norm;
}

}  // namespace lab
