#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <json.hpp>

#include "lab/masking.hpp"
#include "lab/params.hpp"

namespace lab {

struct EncoderConfig {
  std::size_t layers = 4;
  std::size_t model_dim = 64;
  std::size_t heads = 4;
  std::size_t ff_dim = 128;
  std::size_t bins = 40;
  std::size_t stack_factor = 2;

  std::size_t input_dim() const noexcept { return bins * stack_factor; }
  void validate() const;

  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

nlohmann::json to_json(const EncoderConfig& c);
EncoderConfig encoder_config_from_json(const nlohmann::json& j);

// Post-LN transformer encoder over stacked frames with a frame-reconstruction
// head. Parameter names: "enc.*" for the encoder body, "head.*" for the
// prediction head.
class EncoderModel {
 public:
  EncoderModel(EncoderConfig config, ParamSet params);

  const EncoderConfig& config() const noexcept { return config_; }
  const ParamSet& params() const noexcept { return params_; }
  ParamSet& params() noexcept { return params_; }
  // Encoder-body parameters only (no reconstruction head).
  ParamSet body_params() const;

 private:
  EncoderConfig config_;
  ParamSet params_;
};

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases; layer norms
// start at gamma=1, beta=0.
EncoderModel random_init_encoder(const EncoderConfig& config, std::uint64_t seed);

// Fixed sinusoidal position table [steps, dim].
Tensor sinusoidal_positions(std::size_t steps, std::size_t dim);

// Graph-level forward. `steps` is the stacked-frame sequence [L, input_dim].
// Returns h_0..h_K where h_0 is `steps` itself.
std::vector<Var> encoder_forward(const EncoderConfig& config, const BoundParams& params, const Var& steps);
// Reconstruction head on the last hidden state: [L, model_dim] -> [L, input_dim].
Var reconstruction_head(const EncoderConfig& config, const BoundParams& params, const Var& hidden);

// Inference wrapper with parameters bound once; safe to share across threads.
class FrozenEncoder {
 public:
  explicit FrozenEncoder(const EncoderModel& model);

  const EncoderConfig& config() const noexcept { return config_; }
  // h_0..h_K for a spectrogram.
  std::vector<Tensor> hidden_states(const Spectrogram& spec) const;
  // h_K only.
  Tensor features(const Spectrogram& spec) const;
  // Differentiable path from a [T,F] spectrogram variable to h_0..h_K.
  std::vector<Var> forward(const Var& spectrogram) const;
  Var reconstruct(const Var& steps) const;

 private:
  EncoderConfig config_;
  BoundParams bound_;
};

// Convenience: hidden states h_0..h_K of `model` for `spec`.
std::vector<Tensor> encode(const EncoderModel& model, const Spectrogram& spec);

// Differentiable [T,F] -> [ceil(T/R), F*R] stacking (zero-padded).
Var stack_frames(const Var& spectrogram, std::size_t factor);

struct EncoderCheckpointInfo {
  std::uint64_t seed = 0;
  std::string kind;  // e.g. "pretrained", "random", "scratch"
};
void save_encoder(const std::filesystem::path& path, const EncoderModel& model, const EncoderCheckpointInfo& info);
// Throws if `expected` is given and the stored config differs.
EncoderModel load_encoder(const std::filesystem::path& path, const EncoderConfig* expected = nullptr,
                          EncoderCheckpointInfo* info = nullptr);

}  // namespace lab
