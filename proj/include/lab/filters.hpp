#pragma once

#include <string>

#include "lab/spectrogram.hpp"

namespace lab {

enum class FilterKind { kGaussian, kMedian, kMean };
std::string to_string(FilterKind k);
FilterKind parse_filter_kind(const std::string& s);

struct FilterConfig {
  FilterKind kind = FilterKind::kMedian;
  std::size_t kernel_size = 3;  // odd
  double sigma = 1.0;           // gaussian only

  void validate() const;
  friend bool operator==(const FilterConfig&, const FilterConfig&) = default;
};

// Normalised, truncated size x size Gaussian kernel.
Tensor gaussian_kernel(std::size_t size, double sigma);

// Square sliding-window smoothing with edge-replicating borders; output has
// the input's shape.
Spectrogram apply_filter(const Spectrogram& spec, const FilterConfig& config);

}  // namespace lab
