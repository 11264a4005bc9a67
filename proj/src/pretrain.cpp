#include "lab/pretrain.hpp"

#include <variant>

#include "lab/errors.hpp"
#include "lab/loss.hpp"
#include "lab/optim.hpp"
#include "lab/parallel.hpp"
#include "lab/rng.hpp"
#include "lab/training.hpp"

namespace lab {

namespace {

void check_policy(const EncoderModel& model, const MaskingPolicy& policy) {
  policy.validate();
  if (policy.stack_factor != model.config().stack_factor) {
    throw UsageError("pretrain: masking stack factor " + std::to_string(policy.stack_factor) +
                     " differs from encoder stack factor " + std::to_string(model.config().stack_factor));
  }
}

}  // namespace

PretrainResult pretrain(EncoderModel model, std::span<const Spectrogram> corpus, const MaskingPolicy& policy,
                        const PretrainConfig& config) {
  if (corpus.empty()) throw UsageError("pretrain: empty corpus");
  check_policy(model, policy);
  const EncoderConfig& ec = model.config();

  std::vector<Tensor> clean;
  clean.reserve(corpus.size());
  for (const auto& s : corpus) {
    if (s.bins() != ec.bins) throw ShapeError("pretrain: spectrogram bin count does not match encoder");
    clean.push_back(downsample(s, ec.stack_factor));
  }

  std::variant<SgdMomentum, Adam> opt = config.optimizer == OptimizerKind::kAdam
                                            ? std::variant<SgdMomentum, Adam>(Adam(config.lr))
                                            : std::variant<SgdMomentum, Adam>(SgdMomentum(config.lr, config.momentum));
  PretrainResult result{std::move(model), {}};
  ParamSet& params = result.model.params();

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const std::uint64_t epoch_seed = derive_seed(config.seed, epoch);
    const auto batches = shuffled_batches(clean.size(), config.batch_size, derive_seed(epoch_seed, "order"));
    double epoch_loss = 0.0;
    for (const auto& batch : batches) {
      const double loss = batch_gradients(params, batch, [&](const BoundParams& p, std::size_t i) {
        const auto masked = apply_masking(clean[i], policy, derive_seed(derive_seed(epoch_seed, "mask"), i));
        const auto hidden = encoder_forward(ec, p, Var::leaf(masked.corrupted));
        const Var prediction = reconstruction_head(ec, p, hidden.back());
        if (config.masked_only_loss) return masked_l1_loss(prediction, clean[i], masked.mask);
        return l1_loss(prediction, clean[i]);
      });
      if (config.clip_norm > 0.0) clip_grad_norm(params, config.clip_norm);
      std::visit([&](auto& o) { o.step(params); }, opt);
      epoch_loss += loss * static_cast<double>(batch.size());
    }
    result.loss_history.push_back(epoch_loss / static_cast<double>(clean.size()));
  }
  params.zero_grad();
  return result;
}

double masked_reconstruction_error(const EncoderModel& model, std::span<const Spectrogram> corpus,
                                   const MaskingPolicy& policy, std::uint64_t seed) {
  if (corpus.empty()) throw UsageError("reconstruction error: empty corpus");
  check_policy(model, policy);
  const FrozenEncoder enc(model);
  std::vector<double> errors(corpus.size(), 0.0);
  parallel_for(corpus.size(), [&](std::size_t i) {
    const Tensor steps = downsample(corpus[i], policy.stack_factor);
    const auto masked = apply_masking(steps, policy, derive_seed(seed, i));
    errors[i] = masked_l1_loss(enc.reconstruct(Var::leaf(masked.corrupted)), steps, masked.mask).value().item();
  });
  double total = 0.0;
  for (double e : errors) total += e;
  return total / static_cast<double>(errors.size());
}

}  // namespace lab
