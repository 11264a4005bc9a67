#pragma once

#include <cstddef>
#include <vector>

#include "lab/tensor.hpp"

namespace lab {

// frames x bins matrix of finite values.
class Spectrogram {
 public:
  Spectrogram() = default;
  Spectrogram(std::size_t frames, std::size_t bins, double fill = 0.0);
  // `values` must be 2-D [frames, bins] and finite.
  explicit Spectrogram(Tensor values);

  std::size_t frames() const noexcept { return frames_; }
  std::size_t bins() const noexcept { return bins_; }
  const Tensor& values() const noexcept { return values_; }
  double at(std::size_t frame, std::size_t bin) const { return values_[frame * bins_ + bin]; }
  double& at(std::size_t frame, std::size_t bin) { return values_[frame * bins_ + bin]; }
  std::span<const double> data() const noexcept { return values_.data(); }
  std::span<double> data() noexcept { return values_.data(); }

  friend bool operator==(const Spectrogram&, const Spectrogram&) = default;

 private:
  std::size_t frames_ = 0;
  std::size_t bins_ = 0;
  Tensor values_;
};

inline constexpr int kBonafide = 0;
inline constexpr int kSpoof = 1;

struct LabeledExample {
  Spectrogram spec;
  int label = kBonafide;

  friend bool operator==(const LabeledExample&, const LabeledExample&) = default;
};

}  // namespace lab
