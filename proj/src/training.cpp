#include "lab/training.hpp"

#include <cmath>
#include <numeric>

#include "lab/errors.hpp"
#include "lab/parallel.hpp"
#include "lab/rng.hpp"

namespace lab {

double batch_gradients(ParamSet& params, std::span<const std::size_t> examples, const ExampleLoss& loss) {
  if (examples.empty()) throw Error("batch_gradients: empty batch");
  struct Slot {
    double loss = 0.0;
    std::vector<Tensor> grads;
  };
  std::vector<Slot> slots(examples.size());
  parallel_for(examples.size(), [&](std::size_t i) {
    BoundParams bound(params, true);
    const Var l = loss(bound, examples[i]);
    backward(l);
    slots[i].loss = l.value().item();
    slots[i].grads = bound.grads();
  });

  const double inv = 1.0 / static_cast<double>(examples.size());
  double total = 0.0;
  auto& items = params.items();
  for (std::size_t k = 0; k < items.size(); ++k) items[k].grad = Tensor(items[k].value.shape(), 0.0);
  for (const auto& slot : slots) {
    total += slot.loss;
    for (std::size_t k = 0; k < items.size(); ++k) items[k].grad.add_(slot.grads[k]);
  }
  for (auto& p : items) {
    for (double& g : p.grad.data()) g *= inv;
    if (!p.grad.all_finite()) throw NumericalError("non-finite gradient for parameter '" + p.name + "'");
  }
  const double mean_loss = total * inv;
  if (!std::isfinite(mean_loss)) throw NumericalError("non-finite training loss");
  return mean_loss;
}

std::vector<std::vector<std::size_t>> shuffled_batches(std::size_t n, std::size_t batch_size, std::uint64_t seed) {
  if (batch_size == 0) throw UsageError("batch size must be positive");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(order);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < n; i += batch_size) {
    batches.emplace_back(order.begin() + i, order.begin() + std::min(n, i + batch_size));
  }
  return batches;
}

}  // namespace lab
