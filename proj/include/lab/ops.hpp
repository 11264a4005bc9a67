#pragma once

#include <cstddef>
#include <vector>

#include "lab/autograd.hpp"

namespace lab {

// Elementwise binary ops broadcast numpy-style (trailing dimensions aligned,
// size-1 dimensions stretched).
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
// Elementwise max of two same-shaped tensors; ties route the gradient to `a`.
Var maximum(const Var& a, const Var& b);
Var scale(const Var& x, double factor);

// [m,k] x [k,n] -> [m,n]
Var matmul(const Var& a, const Var& b);

struct Conv2dOptions {
  std::size_t stride = 1;
  std::size_t padding = 0;
};
// input [C,H,W], weight [O,C,kh,kw], optional bias [O] (pass an undefined Var
// for none). Zero padding.
Var conv2d(const Var& input, const Var& weight, const Var& bias, Conv2dOptions options = {});
// input [C,H,W]; stride defaults to the kernel size.
Var max_pool2d(const Var& input, std::size_t kernel, std::size_t stride = 0);
// [C,H,W] -> [C]
Var global_avg_pool(const Var& input);

Var relu(const Var& x);
Var sigmoid(const Var& x);
Var abs(const Var& x);
// Softmax over the last axis.
Var softmax(const Var& x);
// Normalises over the last axis, then applies gamma/beta of shape [last].
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);

Var transpose(const Var& x);  // 2D only
Var reshape(const Var& x, Shape shape);
Var concat(const std::vector<Var>& parts, std::size_t axis);
// Half-open range [begin, end) along `axis`.
Var slice(const Var& x, std::size_t axis, std::size_t begin, std::size_t end);

Var sum(const Var& x);   // -> scalar
Var mean(const Var& x);  // -> scalar

}  // namespace lab
