#include "lab/spectrogram.hpp"

#include "lab/errors.hpp"

namespace lab {

Spectrogram::Spectrogram(std::size_t frames, std::size_t bins, double fill)
    : frames_(frames), bins_(bins), values_(Shape{frames, bins}, fill) {}

Spectrogram::Spectrogram(Tensor values) : values_(std::move(values)) {
  if (values_.ndim() != 2) throw ShapeError("spectrogram: expected [frames, bins], got " + shape_str(values_.shape()));
  if (!values_.all_finite()) throw NumericalError("spectrogram: non-finite value");
  frames_ = values_.dim(0);
  bins_ = values_.dim(1);
}

}  // namespace lab
