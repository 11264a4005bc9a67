#pragma once

#include <span>
#include <vector>

#include "lab/autograd.hpp"

namespace lab {

// Softmax cross-entropy. `logits` is [C] (one target) or [N,C] (one target per
// row); the result is the mean over rows.
Var cross_entropy(const Var& logits, std::span<const int> targets);
Var cross_entropy(const Var& logits, int target);

enum class Reduction { kMean, kSum };

// Absolute error between prediction and a constant target of the same shape.
// Mean reduction gives mean absolute error.
Var l1_loss(const Var& prediction, const Tensor& target, Reduction reduction = Reduction::kMean);
// Absolute error restricted to rows flagged in `row_mask` (prediction is
// [rows, d]); mean reduction divides by the number of selected elements.
Var masked_l1_loss(const Var& prediction, const Tensor& target, const std::vector<bool>& row_mask);

}  // namespace lab
