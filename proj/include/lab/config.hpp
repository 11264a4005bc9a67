#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "lab/attacks.hpp"
#include "lab/classifier.hpp"
#include "lab/corpus.hpp"
#include "lab/encoder.hpp"
#include "lab/masking.hpp"
#include "lab/pretrain.hpp"

namespace lab {

struct AttackSweep {
  std::vector<AttackAlgorithm> algorithms{AttackAlgorithm::kFgsm, AttackAlgorithm::kPgd};
  std::vector<double> epsilons{0.1, 1, 2, 4, 8, 16};  // 0 (clean) is always added
  std::size_t pgd_steps = 10;
  std::optional<double> pgd_step_size;  // default epsilon / 4
  bool random_start = true;
};

struct LnsrSettings {
  std::vector<double> epsilons{8, 16};
  AttackAlgorithm algorithm = AttackAlgorithm::kPgd;
};

// Full experiment description. Every field has a default, so "{}" is a valid
// config file. Unknown keys are rejected.
struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::filesystem::path output_dir = "run";
  CorpusSpec corpus;
  std::size_t n_unlabeled = 1000;
  MaskingPolicy masking;
  EncoderConfig encoder;
  PretrainConfig pretrain{.epochs = 20};
  TrainConfig classifier;
  TrainConfig scratch{.epochs = 30};  // classifier + pre-training epochs unless set
  std::size_t filter_kernel = 3;
  double gaussian_sigma = 1.0;
  AttackSweep attack;
  LnsrSettings lnsr;

  void validate() const;
  // Seed for a named stage: derive_seed(seed, stage).
  std::uint64_t stage_seed(std::string_view stage) const;
};

ExperimentConfig config_from_json(const nlohmann::json& j);
// Canonical form with every field spelled out (output_dir excluded).
nlohmann::json to_json(const ExperimentConfig& c);
ExperimentConfig load_config(const std::filesystem::path& path);
// SHA-256 of the canonical JSON.
std::string config_hash(const ExperimentConfig& c);

// Sorted grid including 0.
std::vector<double> epsilon_grid(const AttackSweep& sweep);

}  // namespace lab
