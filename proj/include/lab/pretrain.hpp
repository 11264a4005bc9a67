#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lab/encoder.hpp"

namespace lab {

enum class OptimizerKind { kSgdMomentum, kAdam };

struct PretrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 8;
  double lr = 1e-3;
  double momentum = 0.9;  // SGD only
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double clip_norm = 1.0;  // <= 0 disables clipping
  std::uint64_t seed = 0;
  // Score reconstruction only on masked steps instead of every step.
  bool masked_only_loss = false;
};

struct PretrainResult {
  EncoderModel model;
  std::vector<double> loss_history;  // mean loss per epoch
};

// Masked-prediction pre-training with an L1 reconstruction loss. Each
// utterance is corrupted with `policy`, encoded, and the head reconstructs the
// clean stacked frames.
PretrainResult pretrain(EncoderModel model, std::span<const Spectrogram> corpus, const MaskingPolicy& policy,
                        const PretrainConfig& config);

// Mean L1 reconstruction error on masked steps of held-out utterances, using
// deterministic masks drawn from `seed`.
double masked_reconstruction_error(const EncoderModel& model, std::span<const Spectrogram> corpus,
                                   const MaskingPolicy& policy, std::uint64_t seed);

}  // namespace lab
