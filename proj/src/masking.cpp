#include "lab/masking.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lab/errors.hpp"
#include "lab/rng.hpp"

namespace lab {

void MaskingPolicy::validate() const {
  if (!(select_rate >= 0.0 && select_rate < 1.0)) throw UsageError("masking: select_rate must lie in [0,1)");
  if (zero_prob < 0.0 || random_prob < 0.0 || keep_prob < 0.0) throw UsageError("masking: negative case probability");
  if (std::abs(zero_prob + random_prob + keep_prob - 1.0) > 1e-9) {
    throw UsageError("masking: case probabilities must sum to 1");
  }
  if (segment_length == 0) throw UsageError("masking: segment_length must be >= 1");
  if (stack_factor == 0) throw UsageError("masking: stack_factor must be >= 1");
}

Tensor downsample(const Spectrogram& spec, std::size_t factor) {
  if (factor == 0) throw UsageError("downsample: factor must be >= 1");
  const std::size_t T = spec.frames(), F = spec.bins();
  const std::size_t steps = (T + factor - 1) / factor;
  Tensor out(Shape{steps, F * factor}, 0.0);
  const double* src = spec.values().raw();
  // Row-major [T,F] regrouped as [steps, factor*F]: a plain copy of the prefix.
  std::copy(src, src + T * F, out.raw());
  return out;
}

Spectrogram unstack(const Tensor& steps, std::size_t factor, std::optional<std::size_t> frames) {
  if (steps.ndim() != 2 || factor == 0 || steps.dim(1) % factor != 0) {
    throw ShapeError("unstack: cannot split " + shape_str(steps.shape()) + " by factor " + std::to_string(factor));
  }
  const std::size_t F = steps.dim(1) / factor;
  const std::size_t total = steps.dim(0) * factor;
  const std::size_t T = frames.value_or(total);
  if (T == 0 || T > total) throw ShapeError("unstack: frame count out of range");
  std::vector<double> data(steps.raw(), steps.raw() + T * F);
  return Spectrogram(Tensor(Shape{T, F}, std::move(data)));
}

std::size_t masked_step_count(std::size_t steps, double rate) {
  const double exact = rate * static_cast<double>(steps);
  return static_cast<std::size_t>(std::ceil(exact - 1e-9 * std::max(1.0, exact)));
}

namespace {

MaskCase draw_case(Rng& rng, const MaskingPolicy& p) {
  const double u = rng.uniform();
  if (u < p.zero_prob) return MaskCase::kZero;
  if (u < p.zero_prob + p.random_prob) return MaskCase::kRandom;
  return MaskCase::kKeep;
}

}  // namespace

MaskedSequence apply_masking(const Tensor& steps, const MaskingPolicy& policy, std::uint64_t seed) {
  policy.validate();
  if (steps.ndim() != 2) throw ShapeError("apply_masking: expected [steps, dim], got " + shape_str(steps.shape()));
  const std::size_t L = steps.dim(0), D = steps.dim(1);
  if (policy.segment_length > L) {
    throw UsageError("apply_masking: segment length " + std::to_string(policy.segment_length) + " exceeds " +
                     std::to_string(L) + " steps");
  }
  MaskedSequence out{steps, std::vector<bool>(L, false), {}};
  const std::size_t selected = masked_step_count(L, policy.select_rate);
  if (selected == 0) return out;

  Rng rng(seed);
  const std::size_t C = policy.segment_length;
  const std::size_t count = (selected + C - 1) / C;
  std::vector<std::size_t> lengths(count, C);
  const std::size_t remainder = selected - (count - 1) * C;
  if (remainder != C) lengths[rng.uniform_index(count)] = remainder;

  // Stars and bars: choose `count` slots among free + count, then lay the
  // segments out left to right with the chosen slack in front of each.
  const std::size_t separators = L >= selected + (count - 1) ? count - 1 : 0;
  const std::size_t free_steps = L - selected - separators;
  std::vector<std::size_t> slots(free_steps + count);
  std::iota(slots.begin(), slots.end(), std::size_t{0});
  for (std::size_t i = 0; i < count; ++i) std::swap(slots[i], slots[i + rng.uniform_index(slots.size() - i)]);
  slots.resize(count);
  std::sort(slots.begin(), slots.end());

  const MaskCase utterance_case = draw_case(rng, policy);
  std::size_t used = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t begin = (slots[i] - i) + used + (separators ? i : 0);
    used += lengths[i];
    const MaskCase applied = policy.per_segment_case ? draw_case(rng, policy) : utterance_case;
    out.segments.push_back({begin, lengths[i], applied});
  }

  const double* src = steps.raw();
  double* dst = out.corrupted.raw();
  for (const auto& seg : out.segments) {
    for (std::size_t s = seg.begin; s < seg.begin + seg.length; ++s) {
      out.mask[s] = true;
      switch (seg.applied) {
        case MaskCase::kZero:
          std::fill(dst + s * D, dst + (s + 1) * D, 0.0);
          break;
        case MaskCase::kRandom: {
          const std::size_t from = rng.uniform_index(L);
          std::copy(src + from * D, src + (from + 1) * D, dst + s * D);
          break;
        }
        case MaskCase::kKeep:
          break;
      }
    }
  }
  return out;
}

}  // namespace lab
