#include "lab/filters.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "lab/errors.hpp"

namespace lab {

std::string to_string(FilterKind k) {
  switch (k) {
    case FilterKind::kGaussian:
      return "gaussian";
    case FilterKind::kMedian:
      return "median";
    case FilterKind::kMean:
      return "mean";
  }
  return "?";
}

FilterKind parse_filter_kind(const std::string& s) {
  if (s == "gaussian") return FilterKind::kGaussian;
  if (s == "median") return FilterKind::kMedian;
  if (s == "mean") return FilterKind::kMean;
  throw UsageError("unknown filter kind '" + s + "'");
}

void FilterConfig::validate() const {
  if (kernel_size == 0 || kernel_size % 2 == 0) throw UsageError("filter: kernel size must be odd and positive");
  if (kind == FilterKind::kGaussian && !(sigma > 0.0)) throw UsageError("filter: sigma must be positive");
}

Tensor gaussian_kernel(std::size_t size, double sigma) {
  Tensor k(Shape{size, size});
  const double c = static_cast<double>(size / 2);
  double total = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    for (std::size_t j = 0; j < size; ++j) {
      const double di = static_cast<double>(i) - c, dj = static_cast<double>(j) - c;
      total += k.at(i, j) = std::exp(-(di * di + dj * dj) / (2.0 * sigma * sigma));
    }
  }
  for (double& v : k.data()) v /= total;
  return k;
}

Spectrogram apply_filter(const Spectrogram& spec, const FilterConfig& config) {
  config.validate();
  const std::size_t T = spec.frames(), F = spec.bins(), K = config.kernel_size;
  if (K > T || K > F) {
    throw UsageError("filter: kernel " + std::to_string(K) + " larger than spectrogram " + std::to_string(T) + "x" +
                     std::to_string(F));
  }
  const auto r = static_cast<std::ptrdiff_t>(K / 2);
  auto clamp_index = [](std::ptrdiff_t i, std::size_t n) {
    return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(i, 0, static_cast<std::ptrdiff_t>(n) - 1));
  };
  Tensor weights = config.kind == FilterKind::kGaussian ? gaussian_kernel(K, config.sigma)
                                                        : Tensor(Shape{K, K}, 1.0 / static_cast<double>(K * K));
  Spectrogram out(T, F);
  std::vector<double> window(K * K);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t f = 0; f < F; ++f) {
      std::size_t n = 0;
      for (std::ptrdiff_t dt = -r; dt <= r; ++dt) {
        const std::size_t tt = clamp_index(static_cast<std::ptrdiff_t>(t) + dt, T);
        for (std::ptrdiff_t df = -r; df <= r; ++df) {
          window[n++] = spec.at(tt, clamp_index(static_cast<std::ptrdiff_t>(f) + df, F));
        }
      }
      double v = 0.0;
      if (config.kind == FilterKind::kMedian) {
        // Odd window: the median is the middle element.
        auto mid = window.begin() + static_cast<std::ptrdiff_t>(window.size() / 2);
        std::nth_element(window.begin(), mid, window.end());
        v = *mid;
      } else {
        for (std::size_t i = 0; i < window.size(); ++i) v += weights[i] * window[i];
      }
      out.at(t, f) = v;
    }
  }
  return out;
}

}  // namespace lab
