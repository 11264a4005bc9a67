#include "lab/loss.hpp"

#include <algorithm>
#include <cmath>

#include "lab/errors.hpp"

namespace lab {

Var cross_entropy(const Var& logits, std::span<const int> targets) {
  const Shape& s = logits.shape();
  if (s.empty() || s.size() > 2) throw ShapeError("cross_entropy: logits must be [C] or [N,C], got " + shape_str(s));
  const std::size_t classes = s.back();
  const std::size_t rows = s.size() == 2 ? s[0] : 1;
  if (targets.size() != rows) {
    throw ShapeError("cross_entropy: " + std::to_string(rows) + " logit rows but " + std::to_string(targets.size()) +
                     " targets");
  }
  for (std::size_t r = 0; r < rows; ++r) {
    if (targets[r] < 0 || static_cast<std::size_t>(targets[r]) >= classes) {
      throw UsageError("cross_entropy: class index " + std::to_string(targets[r]) + " out of range for " +
                       std::to_string(classes) + " classes");
    }
  }
  const double* z = logits.value().raw();
  auto probs = std::make_shared<std::vector<double>>(rows * classes);
  double loss = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* zr = z + r * classes;
    const double m = *std::max_element(zr, zr + classes);
    double sum = 0.0;
    for (std::size_t c = 0; c < classes; ++c) sum += std::exp(zr[c] - m);
    const double log_z = m + std::log(sum);
    for (std::size_t c = 0; c < classes; ++c) (*probs)[r * classes + c] = std::exp(zr[c] - log_z);
    loss += log_z - zr[targets[r]];
  }
  loss /= static_cast<double>(rows);
  std::vector<int> tgt(targets.begin(), targets.end());
  return make_result(Tensor::scalar(loss), "cross_entropy", {logits}, [probs, tgt, rows, classes](Node& self) {
    const double g = self.grad[0] / static_cast<double>(rows);
    double* dz = self.parents[0]->grad_buffer().raw();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < classes; ++c) {
        const double onehot = static_cast<int>(c) == tgt[r] ? 1.0 : 0.0;
        dz[r * classes + c] += g * ((*probs)[r * classes + c] - onehot);
      }
    }
  });
}

Var cross_entropy(const Var& logits, int target) {
  const int t[1] = {target};
  return cross_entropy(logits, std::span<const int>(t, 1));
}

namespace {

Var weighted_abs_error(const char* op, const Var& prediction, const Tensor& target, std::vector<double> weights) {
  const double* p = prediction.value().raw();
  const double* t = target.raw();
  double loss = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) loss += weights[i] * std::abs(p[i] - t[i]);
  auto w = std::make_shared<std::vector<double>>(std::move(weights));
  return make_result(Tensor::scalar(loss), op, {prediction}, [w, target](Node& self) {
    const double g = self.grad[0];
    Node& np = *self.parents[0];
    double* dp = np.grad_buffer().raw();
    const double* p = np.value.raw();
    for (std::size_t i = 0; i < w->size(); ++i) {
      const double diff = p[i] - target[i];
      const double sgn = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
      dp[i] += g * (*w)[i] * sgn;
    }
  });
}

}  // namespace

Var l1_loss(const Var& prediction, const Tensor& target, Reduction reduction) {
  if (prediction.shape() != target.shape()) {
    throw ShapeError("l1_loss: prediction " + shape_str(prediction.shape()) + " vs target " + shape_str(target.shape()));
  }
  const std::size_t n = target.numel();
  const double w = reduction == Reduction::kMean ? 1.0 / static_cast<double>(n) : 1.0;
  return weighted_abs_error("l1_loss", prediction, target, std::vector<double>(n, w));
}

Var masked_l1_loss(const Var& prediction, const Tensor& target, const std::vector<bool>& row_mask) {
  if (prediction.shape() != target.shape() || prediction.shape().size() != 2) {
    throw ShapeError("masked_l1_loss: prediction " + shape_str(prediction.shape()) + " vs target " +
                     shape_str(target.shape()));
  }
  const std::size_t rows = target.shape()[0], d = target.shape()[1];
  if (row_mask.size() != rows) throw ShapeError("masked_l1_loss: mask length does not match row count");
  const auto selected = static_cast<std::size_t>(std::count(row_mask.begin(), row_mask.end(), true));
  std::vector<double> weights(rows * d, 0.0);
  if (selected > 0) {
    const double w = 1.0 / static_cast<double>(selected * d);
    for (std::size_t r = 0; r < rows; ++r) {
      if (row_mask[r]) std::fill(weights.begin() + r * d, weights.begin() + (r + 1) * d, w);
    }
  }
  return weighted_abs_error("masked_l1_loss", prediction, target, std::move(weights));
}

}  // namespace lab
