#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "lab/spectrogram.hpp"

namespace lab {

// Masked-prediction corruption parameters.
struct MaskingPolicy {
  double select_rate = 0.15;  // fraction of steps selected; 0 disables masking
  double zero_prob = 0.80;    // case A: selected steps set to zero
  double random_prob = 0.10;  // case B: selected steps replaced by random steps
  double keep_prob = 0.10;    // case C: selected steps left untouched
  std::size_t segment_length = 3;
  std::size_t stack_factor = 2;
  // Draw the case once per segment instead of once per utterance.
  bool per_segment_case = false;

  void validate() const;
};

enum class MaskCase { kZero, kRandom, kKeep };

struct MaskSegment {
  std::size_t begin = 0;
  std::size_t length = 0;
  MaskCase applied = MaskCase::kZero;
};

struct MaskedSequence {
  Tensor corrupted;         // same shape as the input steps
  std::vector<bool> mask;   // true for selected steps
  std::vector<MaskSegment> segments;
};

// Stacks `factor` consecutive frames into one step: [T,F] -> [ceil(T/factor),
// F*factor]. A trailing partial group is padded with zero frames.
Tensor downsample(const Spectrogram& spec, std::size_t factor);
// Inverse of downsample; `frames` crops the zero padding (defaults to all).
Spectrogram unstack(const Tensor& steps, std::size_t factor, std::optional<std::size_t> frames = std::nullopt);

// ceil(rate * steps), robust to binary rounding of the product.
std::size_t masked_step_count(std::size_t steps, double rate);

// Selects ceil(select_rate * steps) steps as disjoint contiguous segments of
// segment_length (one segment may be shorter so the count is exact) and applies
// the sampled case. Segments are separated by at least one unselected step
// whenever the sequence is long enough.
MaskedSequence apply_masking(const Tensor& steps, const MaskingPolicy& policy, std::uint64_t seed);

}  // namespace lab
