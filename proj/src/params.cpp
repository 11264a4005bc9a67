#include "lab/params.hpp"

#include <algorithm>
#include <cstring>

#include "lab/errors.hpp"
#include "lab/hash.hpp"

namespace lab {

Tensor& ParamSet::add(std::string name, Tensor init) {
  if (index_.count(name)) throw Error("param set: duplicate parameter '" + name + "'");
  index_.emplace(name, params_.size());
  params_.push_back(Parameter{std::move(name), std::move(init), Tensor{}});
  return params_.back().value;
}

bool ParamSet::contains(std::string_view name) const { return index_.find(name) != index_.end(); }

const Parameter& ParamSet::at(std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error("param set: no parameter '" + std::string(name) + "'");
  return params_[it->second];
}

Parameter& ParamSet::at(std::string_view name) {
  return const_cast<Parameter&>(static_cast<const ParamSet&>(*this).at(name));
}

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.numel();
  return n;
}

std::vector<std::string> ParamSet::names() const {
  std::vector<std::string> out;
  for (const auto& p : params_) out.push_back(p.name);
  return out;
}

void ParamSet::zero_grad() {
  for (auto& p : params_) p.grad = Tensor{};
}

void ParamSet::merge(const ParamSet& other) {
  for (const auto& p : other.params_) add(p.name, p.value);
}

void ParamSet::assign_from(const ParamSet& other) {
  for (auto& p : params_) {
    if (!other.contains(p.name)) continue;
    const Tensor& src = other.at(p.name).value;
    if (src.shape() != p.value.shape()) {
      throw ShapeError("param set: shape mismatch for '" + p.name + "': " + shape_str(p.value.shape()) + " vs " +
                       shape_str(src.shape()));
    }
    p.value = src;
  }
}

bool operator==(const ParamSet& a, const ParamSet& b) {
  if (a.params_.size() != b.params_.size()) return false;
  for (std::size_t i = 0; i < a.params_.size(); ++i) {
    if (a.params_[i].name != b.params_[i].name || !(a.params_[i].value == b.params_[i].value)) return false;
  }
  return true;
}

BoundParams::BoundParams(const ParamSet& params, bool requires_grad) : requires_grad_(requires_grad) {
  for (const auto& p : params.items()) {
    index_.emplace(p.name, vars_.size());
    names_.push_back(p.name);
    vars_.push_back(Var::leaf(p.value, requires_grad));
  }
}

const Var& BoundParams::operator[](std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error("bound params: no parameter '" + std::string(name) + "'");
  return vars_[it->second];
}

std::vector<Tensor> BoundParams::grads() const {
  std::vector<Tensor> out;
  out.reserve(vars_.size());
  for (const auto& v : vars_) out.push_back(v.grad().is_null() ? Tensor(v.shape(), 0.0) : v.grad());
  return out;
}

std::uint64_t param_fingerprint(const ParamSet& params) {
  std::vector<const Parameter*> sorted;
  for (const auto& p : params.items()) sorted.push_back(&p);
  std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->name < b->name; });
  Fnv1a64 h;
  for (const auto* p : sorted) {
    h.update(p->name);
    h.update(std::as_bytes(p->value.data()));
  }
  return h.digest();
}

}  // namespace lab
