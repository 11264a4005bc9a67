#pragma once

#include <functional>
#include <span>

#include "lab/params.hpp"

namespace lab {

// Builds the scalar loss for one example against freshly bound parameters.
using ExampleLoss = std::function<Var(const BoundParams& params, std::size_t example)>;

// Evaluates `loss` for every index (in parallel, one graph per example),
// stores the batch-mean gradient in each parameter's `grad`, and returns the
// batch-mean loss. Per-example gradients are summed in index order, so the
// result does not depend on the thread count. Throws NumericalError on a
// non-finite loss or gradient.
double batch_gradients(ParamSet& params, std::span<const std::size_t> examples, const ExampleLoss& loss);

// Minibatches of a seeded permutation of [0, n).
std::vector<std::vector<std::size_t>> shuffled_batches(std::size_t n, std::size_t batch_size, std::uint64_t seed);

}  // namespace lab
