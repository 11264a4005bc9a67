#include "lab/classifier.hpp"

#include <cmath>

#include "lab/errors.hpp"
#include "lab/loss.hpp"
#include "lab/ops.hpp"
#include "lab/optim.hpp"
#include "lab/parallel.hpp"
#include "lab/rng.hpp"
#include "lab/serialize.hpp"
#include "lab/training.hpp"

namespace lab {

namespace {

constexpr std::size_t kChannels1 = 8;
constexpr std::size_t kChannels2 = 16;
constexpr std::size_t kKernel = 3;
constexpr std::size_t kPool = 2;

std::size_t se_bottleneck(std::size_t channels) { return std::max<std::size_t>(channels / 4, 2); }

std::string prefix(Architecture a) { return a == Architecture::kMaxFeatureMap ? "lcnn." : "senet."; }

Tensor uniform_tensor(Rng& rng, Shape shape, std::size_t fan_in) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng.uniform(-bound, bound);
  return t;
}

void add_conv(ParamSet& ps, Rng& rng, const std::string& name, std::size_t in, std::size_t out) {
  const std::size_t fan_in = in * kKernel * kKernel;
  ps.add(name + ".w", uniform_tensor(rng, {out, in, kKernel, kKernel}, fan_in));
  ps.add(name + ".b", uniform_tensor(rng, {out}, fan_in));
}

void add_linear(ParamSet& ps, Rng& rng, const std::string& name, std::size_t in, std::size_t out) {
  ps.add(name + ".w", uniform_tensor(rng, {in, out}, in));
  ps.add(name + ".b", uniform_tensor(rng, {out}, in));
}

std::size_t pooled(std::size_t n) { return (n / kPool) / kPool; }

Var conv(const BoundParams& p, const std::string& name, const Var& x) {
  return conv2d(x, p[name + ".w"], p[name + ".b"], {1, kKernel / 2});
}

Var linear(const BoundParams& p, const std::string& name, const Var& x) {
  return add(matmul(x, p[name + ".w"]), p[name + ".b"]);
}

// Max-feature-map: split channels in half and keep the elementwise max.
Var max_feature_map(const Var& x) {
  const std::size_t c = x.shape()[0];
  return maximum(slice(x, 0, 0, c / 2), slice(x, 0, c / 2, c));
}

// Squeeze-excitation channel gating.
Var squeeze_excite(const BoundParams& p, const std::string& name, const Var& x) {
  const std::size_t c = x.shape()[0];
  const Var z = reshape(global_avg_pool(x), Shape{1, c});
  const Var s = sigmoid(linear(p, name + ".fc2", relu(linear(p, name + ".fc1", z))));
  return mul(x, reshape(s, Shape{c, 1, 1}));
}

Var head(const BoundParams& p, const std::string& name, const Var& x) {
  return reshape(linear(p, name, reshape(x, Shape{1, x.value().numel()})), Shape{2});
}

}  // namespace

std::string to_string(Architecture a) { return a == Architecture::kMaxFeatureMap ? "maxout-cnn" : "squeeze-excite-cnn"; }
std::string to_string(InputMode m) { return m == InputMode::kRawSpectrogram ? "raw-spectrogram" : "encoder-features"; }
std::string architecture_letter(Architecture a) { return a == Architecture::kMaxFeatureMap ? "A" : "B"; }

Architecture parse_architecture(const std::string& s) {
  if (s == "maxout-cnn" || s == "A") return Architecture::kMaxFeatureMap;
  if (s == "squeeze-excite-cnn" || s == "B") return Architecture::kSqueezeExcite;
  throw UsageError("unknown architecture '" + s + "'");
}

InputMode parse_input_mode(const std::string& s) {
  if (s == "raw-spectrogram") return InputMode::kRawSpectrogram;
  if (s == "encoder-features") return InputMode::kEncoderFeatures;
  throw UsageError("unknown input mode '" + s + "'");
}

namespace {

void check_geometry(const InputGeometry& g) {
  if (pooled(g.height) == 0 || pooled(g.width) == 0) {
    throw UsageError("classifier: input " + std::to_string(g.height) + "x" + std::to_string(g.width) +
                     " too small for two pooling stages");
  }
}

}  // namespace

ClassifierModel::ClassifierModel(Architecture arch, InputMode mode, InputGeometry geometry, ParamSet params)
    : arch_(arch), mode_(mode), geometry_(geometry), params_(std::move(params)) {
  check_geometry(geometry_);
}

InputNorm fit_input_norm(std::span<const Tensor> inputs) {
  if (inputs.empty()) throw UsageError("input norm: no inputs");
  double sum = 0.0, sq = 0.0;
  std::size_t n = 0;
  for (const auto& t : inputs) {
    for (double v : t.data()) sum += v;
    n += t.numel();
  }
  const double mean = sum / static_cast<double>(n);
  for (const auto& t : inputs) {
    for (double v : t.data()) sq += (v - mean) * (v - mean);
  }
  const double sd = std::sqrt(sq / static_cast<double>(n));
  return {mean, sd > 0.0 ? sd : 1.0};
}

void ClassifierModel::set_input_norm(const InputNorm& norm) {
  if (!(norm.stddev > 0.0) || !std::isfinite(norm.mean)) throw UsageError("classifier: invalid input norm");
  norm_ = norm;
}

Var ClassifierModel::forward(const BoundParams& p, const Var& input) const {
  if (input.shape() != Shape{geometry_.height, geometry_.width}) {
    throw ShapeError("classifier (" + to_string(mode_) + "): expected input " +
                     shape_str({geometry_.height, geometry_.width}) + ", got " + shape_str(input.shape()));
  }
  const std::string pre = prefix(arch_);
  Var x = reshape(input, Shape{1, geometry_.height, geometry_.width});
  if (!(norm_ == InputNorm{})) {
    x = scale(add(x, Var::leaf(Tensor::scalar(-norm_.mean))), 1.0 / norm_.stddev);
  }
  if (arch_ == Architecture::kMaxFeatureMap) {
    x = max_pool2d(max_feature_map(conv(p, pre + "conv1", x)), kPool);
    x = max_pool2d(max_feature_map(conv(p, pre + "conv2", x)), kPool);
  } else {
    x = max_pool2d(squeeze_excite(p, pre + "se1", relu(conv(p, pre + "conv1", x))), kPool);
    x = max_pool2d(squeeze_excite(p, pre + "se2", relu(conv(p, pre + "conv2", x))), kPool);
  }
  return head(p, pre + "fc", x);
}

ClassifierModel build_classifier(Architecture arch, InputMode mode, std::uint64_t seed, InputGeometry geometry) {
  check_geometry(geometry);
  Rng rng(seed);
  ParamSet ps;
  const std::string pre = prefix(arch);
  const std::size_t flat = kChannels2 * pooled(geometry.height) * pooled(geometry.width);
  if (arch == Architecture::kMaxFeatureMap) {
    add_conv(ps, rng, pre + "conv1", 1, 2 * kChannels1);
    add_conv(ps, rng, pre + "conv2", kChannels1, 2 * kChannels2);
  } else {
    add_conv(ps, rng, pre + "conv1", 1, kChannels1);
    add_linear(ps, rng, pre + "se1.fc1", kChannels1, se_bottleneck(kChannels1));
    add_linear(ps, rng, pre + "se1.fc2", se_bottleneck(kChannels1), kChannels1);
    add_conv(ps, rng, pre + "conv2", kChannels1, kChannels2);
    add_linear(ps, rng, pre + "se2.fc1", kChannels2, se_bottleneck(kChannels2));
    add_linear(ps, rng, pre + "se2.fc2", se_bottleneck(kChannels2), kChannels2);
  }
  add_linear(ps, rng, pre + "fc", flat, 2);
  return ClassifierModel(arch, mode, geometry, std::move(ps));
}

FrozenClassifier::FrozenClassifier(const ClassifierModel& model) : model_(&model), bound_(model.params(), false) {}

Var FrozenClassifier::forward(const Var& input) const { return model_->forward(bound_, input); }

int argmax_label(const Tensor& logits) { return logits[1] > logits[0] ? 1 : 0; }

Prediction predict(const FrozenClassifier& model, const Tensor& input) {
  Tensor logits = model.forward(Var::leaf(input)).value();
  const int label = argmax_label(logits);
  return {std::move(logits), label};
}

Prediction predict(const ClassifierModel& model, const Tensor& input) { return predict(FrozenClassifier(model), input); }

void TrainConfig::validate() const {
  if (batch_size == 0) throw UsageError("train config: batch_size must be positive");
  if (!(lr > 0.0)) throw UsageError("train config: lr must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw UsageError("train config: momentum must lie in [0,1)");
}

TrainHistory train_classifier(ClassifierModel& model, std::span<const Tensor> inputs, std::span<const int> labels,
                              const TrainConfig& config, std::span<const Tensor> dev_inputs,
                              std::span<const int> dev_labels, bool fit_norm) {
  config.validate();
  if (inputs.empty()) throw UsageError("train: empty training set");
  if (inputs.size() != labels.size() || dev_inputs.size() != dev_labels.size()) {
    throw UsageError("train: inputs and labels differ in length");
  }
  if (fit_norm && config.epochs > 0) model.set_input_norm(fit_input_norm(inputs));
  TrainHistory history;
  SgdMomentum opt(config.lr, config.momentum);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto batches = shuffled_batches(inputs.size(), config.batch_size, derive_seed(config.seed, epoch));
    double total = 0.0;
    for (const auto& batch : batches) {
      const double loss = batch_gradients(model.params(), batch, [&](const BoundParams& p, std::size_t i) {
        return cross_entropy(model.forward(p, Var::leaf(inputs[i])), labels[i]);
      });
      opt.step(model.params());
      total += loss * static_cast<double>(batch.size());
    }
    history.train_loss.push_back(total / static_cast<double>(inputs.size()));
    if (!dev_inputs.empty()) {
      const FrozenClassifier frozen(model);
      std::vector<int> predicted(dev_inputs.size());
      parallel_for(dev_inputs.size(), [&](std::size_t i) { predicted[i] = predict(frozen, dev_inputs[i]).label; });
      history.dev_accuracy.push_back(accuracy(predicted, dev_labels));
    }
  }
  model.params().zero_grad();
  return history;
}

TrainHistory train_classifier(ClassifierModel& model, std::span<const LabeledExample> train, const TrainConfig& config,
                              std::span<const LabeledExample> dev) {
  if (model.input_mode() != InputMode::kRawSpectrogram) {
    throw UsageError("train: spectrogram examples given to an encoder-features classifier");
  }
  std::vector<Tensor> x, dx;
  std::vector<int> y, dy;
  for (const auto& ex : train) {
    x.push_back(ex.spec.values());
    y.push_back(ex.label);
  }
  for (const auto& ex : dev) {
    dx.push_back(ex.spec.values());
    dy.push_back(ex.label);
  }
  return train_classifier(model, x, y, config, dx, dy);
}

double accuracy(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.empty()) throw UsageError("accuracy: empty example set");
  if (predicted.size() != truth.size()) throw UsageError("accuracy: prediction/label count mismatch");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) correct += predicted[i] == truth[i] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(predicted.size());
}

double accuracy(const ClassifierModel& model, std::span<const LabeledExample> examples) {
  if (examples.empty()) throw UsageError("accuracy: empty example set");
  const FrozenClassifier frozen(model);
  std::vector<int> predicted(examples.size()), truth(examples.size());
  parallel_for(examples.size(), [&](std::size_t i) {
    predicted[i] = predict(frozen, examples[i].spec.values()).label;
    truth[i] = examples[i].label;
  });
  return accuracy(predicted, truth);
}

void save_classifier(const std::filesystem::path& path, const ClassifierModel& model, const nlohmann::json& extra) {
  nlohmann::json meta{{"type", "classifier"},
                      {"architecture", to_string(model.architecture())},
                      {"input_mode", to_string(model.input_mode())},
                      {"geometry", {model.geometry().height, model.geometry().width}},
                      {"input_norm", {model.input_norm().mean, model.input_norm().stddev}}};
  if (!extra.is_null()) meta["extra"] = extra;
  save_checkpoint(path, meta, model.params());
}

ClassifierModel load_classifier(const std::filesystem::path& path, const Architecture* expected_arch,
                                const InputMode* expected_mode) {
  auto ck = load_checkpoint(path);
  if (ck.meta.value("type", "") != "classifier") {
    throw FormatError("classifier: " + path.string() + " is not a classifier checkpoint");
  }
  const Architecture arch = parse_architecture(ck.meta.at("architecture").get<std::string>());
  const InputMode mode = parse_input_mode(ck.meta.at("input_mode").get<std::string>());
  if (expected_arch && arch != *expected_arch) {
    throw UsageError("classifier: " + path.string() + " holds a " + to_string(arch) + ", expected " +
                     to_string(*expected_arch));
  }
  if (expected_mode && mode != *expected_mode) {
    throw UsageError("classifier: " + path.string() + " expects " + to_string(mode) + " input, expected " +
                     to_string(*expected_mode));
  }
  const auto geo = ck.meta.at("geometry");
  const InputGeometry geometry{geo.at(0).get<std::size_t>(), geo.at(1).get<std::size_t>()};
  const ClassifierModel reference = build_classifier(arch, mode, 0, geometry);
  for (const auto& p : reference.params().items()) {
    if (!ck.params.contains(p.name) || ck.params.at(p.name).value.shape() != p.value.shape()) {
      throw FormatError("classifier: checkpoint " + path.string() + " lacks a valid '" + p.name + "'");
    }
  }
  ClassifierModel model(arch, mode, geometry, std::move(ck.params));
  if (ck.meta.contains("input_norm")) {
    const auto& n = ck.meta.at("input_norm");
    model.set_input_norm({n.at(0).get<double>(), n.at(1).get<double>()});
  }
  return model;
}

}  // namespace lab
