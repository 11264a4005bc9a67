#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lab/autograd.hpp"
#include "lab/classifier.hpp"
#include "lab/spectrogram.hpp"

namespace lab {

enum class AttackAlgorithm { kFgsm, kPgd };
std::string to_string(AttackAlgorithm a);
AttackAlgorithm parse_attack_algorithm(const std::string& s);

struct AttackConfig {
  AttackAlgorithm algorithm = AttackAlgorithm::kPgd;
  double epsilon = 0.0;
  std::size_t steps = 10;              // PGD only
  std::optional<double> step_size;     // PGD only; defaults to epsilon / 4
  bool random_start = true;            // PGD only
  std::uint64_t seed = 0;

  double resolved_step_size() const { return step_size.value_or(epsilon / 4.0); }
  // Throws on invalid values; warns on stderr when step size exceeds epsilon.
  void validate() const;
};

// x~ = x + delta with |delta|_inf <= epsilon. `adversarial` is always
// recomputed as original + delta, so the two agree bitwise.
struct AdversarialPair {
  Spectrogram original;
  Spectrogram delta;
  Spectrogram adversarial;
  int label = 0;
  std::string source_model_id;
};

// A differentiable map from a [frames, bins] spectrogram to 2 logits.
class AttackSurface {
 public:
  virtual ~AttackSurface() = default;
  virtual Var logits(const Var& spectrogram) const = 0;
  virtual std::string id() const = 0;
};

// Attack surface over a raw-spectrogram classifier. Encoder-features
// classifiers have no spectrogram input path and are rejected.
class ClassifierSurface final : public AttackSurface {
 public:
  ClassifierSurface(const ClassifierModel& model, std::string id);
  Var logits(const Var& spectrogram) const override { return frozen_.forward(spectrogram); }
  std::string id() const override { return id_; }

 private:
  FrozenClassifier frozen_;
  std::string id_;
};

// d CE(f(x), label) / dx.
Tensor input_gradient(const AttackSurface& model, const Tensor& x, int label);
double loss_at(const AttackSurface& model, const Tensor& x, int label);

// Elementwise clamp of `candidate` to [center - eps, center + eps].
Tensor project_linf(const Tensor& candidate, const Tensor& center, double epsilon);

AdversarialPair make_pair(const LabeledExample& example, Tensor delta, std::string source_model_id);

// delta = eps * sign(grad), sign(0) = 0.
AdversarialPair fgsm(const AttackSurface& model, const LabeledExample& example, double epsilon);
// Sign-gradient ascent on cross-entropy against the true label, projected onto
// the L-inf ball after each step.
AdversarialPair pgd(const AttackSurface& model, const LabeledExample& example, const AttackConfig& config);
AdversarialPair run_attack(const AttackSurface& model, const LabeledExample& example, const AttackConfig& config);

// Independent attack per example; example i uses seed derive_seed(config.seed, i).
// Output order matches input order regardless of thread count.
std::vector<AdversarialPair> attack_corpus(const AttackSurface& model, std::span<const LabeledExample> examples,
                                           const AttackConfig& config);

// JSON-lines pair file: {index, label, source-model-id, epsilon, algorithm,
// shape, original, delta}. Deltas are stored truncated toward zero to
// kDeltaResolution, so the stored perturbation never leaves the L-inf ball.
inline constexpr double kDeltaResolution = 1e-6;

struct PairSetInfo {
  AttackAlgorithm algorithm = AttackAlgorithm::kPgd;
  double epsilon = 0.0;
};

void save_pairs(const std::filesystem::path& path, std::span<const AdversarialPair> pairs, const PairSetInfo& info);
std::vector<AdversarialPair> load_pairs(const std::filesystem::path& path, PairSetInfo* info = nullptr);

}  // namespace lab
