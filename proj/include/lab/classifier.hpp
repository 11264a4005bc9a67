#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "lab/params.hpp"
#include "lab/spectrogram.hpp"

namespace lab {

enum class Architecture {
  kMaxFeatureMap,  // "A": conv + max-feature-map blocks (LCNN-style)
  kSqueezeExcite,  // "B": conv + ReLU + squeeze-excitation blocks (SENet-style)
};
enum class InputMode { kRawSpectrogram, kEncoderFeatures };

std::string to_string(Architecture a);
std::string to_string(InputMode m);
Architecture parse_architecture(const std::string& s);
InputMode parse_input_mode(const std::string& s);
// "A" / "B".
std::string architecture_letter(Architecture a);

// Size of the 2-D input image: frames x bins for raw spectrograms,
// steps x model_dim for encoder features.
struct InputGeometry {
  std::size_t height = 128;
  std::size_t width = 40;
  friend bool operator==(const InputGeometry&, const InputGeometry&) = default;
};

// Fixed affine input standardization (x - mean) / stddev, fitted on the
// training inputs and stored with the model; not trained.
struct InputNorm {
  double mean = 0.0;
  double stddev = 1.0;
  friend bool operator==(const InputNorm&, const InputNorm&) = default;
};

// Scalar mean and standard deviation over every value of `inputs`.
InputNorm fit_input_norm(std::span<const Tensor> inputs);

// Binary anti-spoofing classifier; always emits 2 logits.
class ClassifierModel {
 public:
  ClassifierModel(Architecture arch, InputMode mode, InputGeometry geometry, ParamSet params);

  Architecture architecture() const noexcept { return arch_; }
  InputMode input_mode() const noexcept { return mode_; }
  const InputGeometry& geometry() const noexcept { return geometry_; }
  const ParamSet& params() const noexcept { return params_; }
  ParamSet& params() noexcept { return params_; }
  const InputNorm& input_norm() const noexcept { return norm_; }
  void set_input_norm(const InputNorm& norm);

  // input: [height, width] -> logits [2].
  Var forward(const BoundParams& params, const Var& input) const;

 private:
  Architecture arch_;
  InputMode mode_;
  InputGeometry geometry_;
  ParamSet params_;
  InputNorm norm_;
};

ClassifierModel build_classifier(Architecture arch, InputMode mode, std::uint64_t seed, InputGeometry geometry = {});

// Parameters bound once for inference or input-gradient use.
class FrozenClassifier {
 public:
  explicit FrozenClassifier(const ClassifierModel& model);
  const ClassifierModel& model() const noexcept { return *model_; }
  Var forward(const Var& input) const;

 private:
  const ClassifierModel* model_;
  BoundParams bound_;
};

struct Prediction {
  Tensor logits;  // [2]
  int label = 0;  // argmax, ties to class 0
};

Prediction predict(const ClassifierModel& model, const Tensor& input);
Prediction predict(const FrozenClassifier& model, const Tensor& input);
int argmax_label(const Tensor& logits);

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 16;
  double lr = 0.003;
  double momentum = 0.9;
  std::uint64_t seed = 0;
  void validate() const;
};

struct TrainHistory {
  std::vector<double> train_loss;
  std::vector<double> dev_accuracy;  // empty when no dev set is given
};

// Cross-entropy SGD on precomputed inputs (raw spectrogram values or encoder
// features, matching the model's input mode). Fits the input norm first when
// `fit_norm` is set.
TrainHistory train_classifier(ClassifierModel& model, std::span<const Tensor> inputs, std::span<const int> labels,
                              const TrainConfig& config, std::span<const Tensor> dev_inputs = {},
                              std::span<const int> dev_labels = {}, bool fit_norm = true);
// Raw-spectrogram convenience overload.
TrainHistory train_classifier(ClassifierModel& model, std::span<const LabeledExample> train, const TrainConfig& config,
                              std::span<const LabeledExample> dev = {});

// Fraction of examples whose predicted label matches; throws on an empty set.
double accuracy(std::span<const int> predicted, std::span<const int> truth);
double accuracy(const ClassifierModel& model, std::span<const LabeledExample> examples);

void save_classifier(const std::filesystem::path& path, const ClassifierModel& model, const nlohmann::json& extra = {});
// Rejects checkpoints whose architecture or input mode differ from the
// expectation (when given).
ClassifierModel load_classifier(const std::filesystem::path& path, const Architecture* expected_arch = nullptr,
                                const InputMode* expected_mode = nullptr);

}  // namespace lab
