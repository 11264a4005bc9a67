#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "lab/classifier.hpp"
#include "lab/encoder.hpp"
#include "lab/filters.hpp"

namespace lab {

enum class FrontEndKind { kIdentity, kFilter, kEncoder };
std::string to_string(FrontEndKind k);

// Front-end + classifier. Immutable after construction; predict() may be
// called concurrently.
class Defender {
 public:
  static Defender identity(std::shared_ptr<const ClassifierModel> classifier);
  static Defender filtered(const FilterConfig& filter, std::shared_ptr<const ClassifierModel> classifier);
  static Defender cascade(std::shared_ptr<const EncoderModel> encoder, std::shared_ptr<const ClassifierModel> classifier);

  FrontEndKind kind() const noexcept { return kind_; }
  const ClassifierModel& classifier() const noexcept { return *classifier_; }
  std::shared_ptr<const ClassifierModel> shared_classifier() const noexcept { return classifier_; }
  // Null unless kind() == kEncoder.
  const EncoderModel* encoder() const noexcept { return encoder_.get(); }
  const std::optional<FilterConfig>& filter() const noexcept { return filter_; }

  // Classifier input after the front-end.
  Tensor front_end(const Spectrogram& spec) const;
  Prediction predict(const Spectrogram& spec) const;

 private:
  Defender(FrontEndKind kind, std::shared_ptr<const ClassifierModel> classifier);

  FrontEndKind kind_;
  std::shared_ptr<const ClassifierModel> classifier_;
  std::shared_ptr<const FrozenClassifier> frozen_classifier_;
  std::shared_ptr<const EncoderModel> encoder_;
  std::shared_ptr<const FrozenEncoder> frozen_encoder_;
  std::optional<FilterConfig> filter_;
};

Prediction defend_predict(const Defender& defender, const Spectrogram& spec);
double accuracy(const Defender& defender, std::span<const LabeledExample> examples);
// Predicted labels for a batch of inputs, in order.
std::vector<int> predict_labels(const Defender& defender, std::span<const Spectrogram> inputs);

// Arm names in suite order.
inline const std::vector<std::string>& defender_arm_names() {
  static const std::vector<std::string> names{"mel", "median", "mean", "gaussian", "mock", "rand", "scratch"};
  return names;
}
bool is_filter_arm(const std::string& arm);
FilterConfig filter_for_arm(const std::string& arm, std::size_t kernel_size = 3, double sigma = 1.0);

// Geometry of h_K for a [frames, bins] spectrogram.
InputGeometry feature_geometry(const EncoderConfig& config, std::size_t frames);

// h_K of every spectrogram, computed in parallel.
std::vector<Tensor> encoder_features(const EncoderModel& encoder, std::span<const LabeledExample> examples);

// Classifier on raw spectrograms (the Mel arm).
TrainHistory train_mel_classifier(ClassifierModel& model, std::span<const LabeledExample> train,
                                  std::span<const LabeledExample> dev, const TrainConfig& config);
// Classifier on frozen-encoder features (Mock / rand). The encoder is not
// modified.
TrainHistory train_feature_classifier(ClassifierModel& model, const EncoderModel& encoder,
                                      std::span<const LabeledExample> train, std::span<const LabeledExample> dev,
                                      const TrainConfig& config);
// Encoder body and classifier trained jointly on labels only.
TrainHistory train_cascade_jointly(EncoderModel& encoder, ClassifierModel& model, std::span<const LabeledExample> train,
                                   std::span<const LabeledExample> dev, const TrainConfig& config);

struct SuiteConfig {
  TrainConfig classifier;
  TrainConfig scratch;  // compute-fair: classifier epochs + pre-training epochs
  std::size_t filter_kernel = 3;
  double gaussian_sigma = 1.0;
  std::uint64_t seed = 0;
};

struct NamedDefender {
  std::string name;
  Defender defender;
};

struct DefenderSuite {
  Architecture architecture;
  std::vector<NamedDefender> arms;

  const Defender& at(const std::string& name) const;
};

// Trains the seven ablation arms for one target architecture.
DefenderSuite build_defender_suite(Architecture arch, std::span<const LabeledExample> train,
                                   std::span<const LabeledExample> dev, const EncoderModel& pretrained,
                                   const SuiteConfig& config);
// Same, loading the pretrained encoder from a checkpoint.
DefenderSuite build_defender_suite(Architecture arch, std::span<const LabeledExample> train,
                                   std::span<const LabeledExample> dev, const std::filesystem::path& encoder_checkpoint,
                                   const SuiteConfig& config);

// {arm: {"front_end": kind, "encoder": path|null, "filter": {...}|null,
// "classifier": path}}
struct SuiteEntry {
  FrontEndKind kind = FrontEndKind::kIdentity;
  std::optional<std::filesystem::path> encoder;
  std::optional<FilterConfig> filter;
  std::filesystem::path classifier;
};
nlohmann::json suite_manifest_json(const std::vector<std::pair<std::string, SuiteEntry>>& entries);
// Rebuilds defenders from a suite manifest; checkpoint paths are resolved
// against `base`. Classifiers referenced by several arms are loaded once and
// shared.
DefenderSuite load_defender_suite(const nlohmann::json& manifest, Architecture arch, const std::filesystem::path& base);

}  // namespace lab
