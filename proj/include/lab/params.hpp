#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "lab/autograd.hpp"

namespace lab {

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;  // null until gradients are assigned
};

// Ordered, named collection of trainable tensors. Order is insertion order and
// defines serialization and optimizer state layout.
class ParamSet {
 public:
  Tensor& add(std::string name, Tensor init);
  bool contains(std::string_view name) const;
  const Parameter& at(std::string_view name) const;
  Parameter& at(std::string_view name);

  std::vector<Parameter>& items() noexcept { return params_; }
  const std::vector<Parameter>& items() const noexcept { return params_; }
  std::size_t size() const noexcept { return params_.size(); }
  std::size_t scalar_count() const;
  std::vector<std::string> names() const;

  void zero_grad();
  // Appends all parameters of `other` (names must not collide).
  void merge(const ParamSet& other);
  // Copies values of every same-named parameter found in `other`.
  void assign_from(const ParamSet& other);

  friend bool operator==(const ParamSet& a, const ParamSet& b);

 private:
  std::vector<Parameter> params_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

// Leaf variables for one forward pass over a ParamSet.
class BoundParams {
 public:
  BoundParams(const ParamSet& params, bool requires_grad);

  const Var& operator[](std::string_view name) const;
  bool requires_grad() const noexcept { return requires_grad_; }
  // Gradients in ParamSet order; parameters that received none get zeros.
  std::vector<Tensor> grads() const;

 private:
  std::vector<std::string> names_;
  std::vector<Var> vars_;
  std::map<std::string, std::size_t, std::less<>> index_;
  bool requires_grad_;
};

// Order-independent content fingerprint of parameter values (FNV-1a over the
// raw bytes, name-sorted). Used to check frozen modules stay untouched.
std::uint64_t param_fingerprint(const ParamSet& params);

}  // namespace lab
