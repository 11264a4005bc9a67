#include "lab/defenses.hpp"

#include <map>

#include "lab/errors.hpp"
#include "lab/loss.hpp"
#include "lab/optim.hpp"
#include "lab/parallel.hpp"
#include "lab/rng.hpp"
#include "lab/training.hpp"

namespace lab {

std::string to_string(FrontEndKind k) {
  switch (k) {
    case FrontEndKind::kIdentity:
      return "identity";
    case FrontEndKind::kFilter:
      return "filter";
    case FrontEndKind::kEncoder:
      return "encoder";
  }
  return "?";
}

namespace {

FrontEndKind parse_front_end(const std::string& s) {
  if (s == "identity") return FrontEndKind::kIdentity;
  if (s == "filter") return FrontEndKind::kFilter;
  if (s == "encoder") return FrontEndKind::kEncoder;
  throw FormatError("unknown front-end kind '" + s + "'");
}

void require_mode(const ClassifierModel& c, InputMode mode, const std::string& front) {
  if (c.input_mode() != mode) {
    throw UsageError("defender: " + front + " front-end needs a classifier on " + to_string(mode) + " input, got " +
                     to_string(c.input_mode()));
  }
}

}  // namespace

Defender::Defender(FrontEndKind kind, std::shared_ptr<const ClassifierModel> classifier)
    : kind_(kind), classifier_(std::move(classifier)) {
  if (!classifier_) throw UsageError("defender: no classifier");
  frozen_classifier_ = std::make_shared<const FrozenClassifier>(*classifier_);
}

Defender Defender::identity(std::shared_ptr<const ClassifierModel> classifier) {
  Defender d(FrontEndKind::kIdentity, std::move(classifier));
  require_mode(*d.classifier_, InputMode::kRawSpectrogram, "identity");
  return d;
}

Defender Defender::filtered(const FilterConfig& filter, std::shared_ptr<const ClassifierModel> classifier) {
  filter.validate();
  Defender d(FrontEndKind::kFilter, std::move(classifier));
  require_mode(*d.classifier_, InputMode::kRawSpectrogram, "filter");
  d.filter_ = filter;
  return d;
}

Defender Defender::cascade(std::shared_ptr<const EncoderModel> encoder,
                           std::shared_ptr<const ClassifierModel> classifier) {
  if (!encoder) throw UsageError("defender: no encoder");
  Defender d(FrontEndKind::kEncoder, std::move(classifier));
  require_mode(*d.classifier_, InputMode::kEncoderFeatures, "encoder");
  const auto& g = d.classifier_->geometry();
  if (g.width != encoder->config().model_dim) {
    throw UsageError("defender: classifier width " + std::to_string(g.width) + " does not match encoder dim " +
                     std::to_string(encoder->config().model_dim));
  }
  d.encoder_ = std::move(encoder);
  d.frozen_encoder_ = std::make_shared<const FrozenEncoder>(*d.encoder_);
  return d;
}

Tensor Defender::front_end(const Spectrogram& spec) const {
  switch (kind_) {
    case FrontEndKind::kIdentity:
      return spec.values();
    case FrontEndKind::kFilter:
      return apply_filter(spec, *filter_).values();
    case FrontEndKind::kEncoder:
      return frozen_encoder_->features(spec);
  }
  return {};
}

Prediction Defender::predict(const Spectrogram& spec) const { return lab::predict(*frozen_classifier_, front_end(spec)); }

Prediction defend_predict(const Defender& defender, const Spectrogram& spec) { return defender.predict(spec); }

std::vector<int> predict_labels(const Defender& defender, std::span<const Spectrogram> inputs) {
  std::vector<int> out(inputs.size());
  parallel_for(inputs.size(), [&](std::size_t i) { out[i] = defender.predict(inputs[i]).label; });
  return out;
}

double accuracy(const Defender& defender, std::span<const LabeledExample> examples) {
  if (examples.empty()) throw UsageError("accuracy: empty example set");
  std::vector<int> predicted(examples.size()), truth(examples.size());
  parallel_for(examples.size(), [&](std::size_t i) {
    predicted[i] = defender.predict(examples[i].spec).label;
    truth[i] = examples[i].label;
  });
  return accuracy(predicted, truth);
}

bool is_filter_arm(const std::string& arm) { return arm == "median" || arm == "mean" || arm == "gaussian"; }

FilterConfig filter_for_arm(const std::string& arm, std::size_t kernel_size, double sigma) {
  if (!is_filter_arm(arm)) throw UsageError("'" + arm + "' is not a filter arm");
  FilterConfig c{parse_filter_kind(arm), kernel_size, sigma};
  c.validate();
  return c;
}

InputGeometry feature_geometry(const EncoderConfig& config, std::size_t frames) {
  return {(frames + config.stack_factor - 1) / config.stack_factor, config.model_dim};
}

std::vector<Tensor> encoder_features(const EncoderModel& encoder, std::span<const LabeledExample> examples) {
  const FrozenEncoder frozen(encoder);
  std::vector<Tensor> out(examples.size());
  parallel_for(examples.size(), [&](std::size_t i) { out[i] = frozen.features(examples[i].spec); });
  return out;
}

TrainHistory train_mel_classifier(ClassifierModel& model, std::span<const LabeledExample> train,
                                  std::span<const LabeledExample> dev, const TrainConfig& config) {
  return train_classifier(model, train, config, dev);
}

TrainHistory train_feature_classifier(ClassifierModel& model, const EncoderModel& encoder,
                                      std::span<const LabeledExample> train, std::span<const LabeledExample> dev,
                                      const TrainConfig& config) {
  require_mode(model, InputMode::kEncoderFeatures, "encoder");
  // Features are computed once up front: the encoder is outside the graph.
  const auto x = encoder_features(encoder, train);
  const auto dx = encoder_features(encoder, dev);
  std::vector<int> y, dy;
  for (const auto& ex : train) y.push_back(ex.label);
  for (const auto& ex : dev) dy.push_back(ex.label);
  return train_classifier(model, x, y, config, dx, dy);
}

TrainHistory train_cascade_jointly(EncoderModel& encoder, ClassifierModel& model, std::span<const LabeledExample> train,
                                   std::span<const LabeledExample> dev, const TrainConfig& config) {
  config.validate();
  require_mode(model, InputMode::kEncoderFeatures, "encoder");
  if (train.empty()) throw UsageError("train: empty training set");
  ParamSet joint = encoder.body_params();
  joint.merge(model.params());
  const EncoderConfig ec = encoder.config();
  TrainHistory history;
  SgdMomentum opt(config.lr, config.momentum);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto batches = shuffled_batches(train.size(), config.batch_size, derive_seed(config.seed, epoch));
    double total = 0.0;
    for (const auto& batch : batches) {
      const double loss = batch_gradients(joint, batch, [&](const BoundParams& p, std::size_t i) {
        const auto hidden = encoder_forward(ec, p, stack_frames(Var::leaf(train[i].spec.values()), ec.stack_factor));
        return cross_entropy(model.forward(p, hidden.back()), train[i].label);
      });
      opt.step(joint);
      total += loss * static_cast<double>(batch.size());
    }
    history.train_loss.push_back(total / static_cast<double>(train.size()));
    encoder.params().assign_from(joint);
    model.params().assign_from(joint);
    if (!dev.empty()) {
      const auto e = std::make_shared<const EncoderModel>(encoder);
      const auto c = std::make_shared<const ClassifierModel>(model);
      history.dev_accuracy.push_back(accuracy(Defender::cascade(e, c), dev));
    }
  }
  return history;
}

const Defender& DefenderSuite::at(const std::string& name) const {
  for (const auto& arm : arms) {
    if (arm.name == name) return arm.defender;
  }
  throw UsageError("defender suite: no arm named '" + name + "'");
}

DefenderSuite build_defender_suite(Architecture arch, std::span<const LabeledExample> train,
                                   std::span<const LabeledExample> dev, const EncoderModel& pretrained,
                                   const SuiteConfig& config) {
  if (train.empty()) throw UsageError("defender suite: empty training set");
  const std::size_t frames = train.front().spec.frames();
  const InputGeometry raw{frames, train.front().spec.bins()};
  const InputGeometry feat = feature_geometry(pretrained.config(), frames);
  auto seeded = [&](TrainConfig c, const char* arm) {
    c.seed = derive_seed(config.seed, std::string("train/") + arm);
    return c;
  };

  auto mel = build_classifier(arch, InputMode::kRawSpectrogram, derive_seed(config.seed, "init/mel"), raw);
  train_mel_classifier(mel, train, dev, seeded(config.classifier, "mel"));
  const auto mel_shared = std::make_shared<const ClassifierModel>(std::move(mel));

  auto mock_encoder = std::make_shared<const EncoderModel>(pretrained);
  auto mock = build_classifier(arch, InputMode::kEncoderFeatures, derive_seed(config.seed, "init/mock"), feat);
  train_feature_classifier(mock, *mock_encoder, train, dev, seeded(config.classifier, "mock"));

  auto rand_encoder = std::make_shared<const EncoderModel>(
      random_init_encoder(pretrained.config(), derive_seed(config.seed, "init/rand-encoder")));
  auto rand = build_classifier(arch, InputMode::kEncoderFeatures, derive_seed(config.seed, "init/rand"), feat);
  train_feature_classifier(rand, *rand_encoder, train, dev, seeded(config.classifier, "rand"));

  auto scratch_encoder = random_init_encoder(pretrained.config(), derive_seed(config.seed, "init/scratch-encoder"));
  auto scratch = build_classifier(arch, InputMode::kEncoderFeatures, derive_seed(config.seed, "init/scratch"), feat);
  train_cascade_jointly(scratch_encoder, scratch, train, dev, seeded(config.scratch, "scratch"));

  DefenderSuite suite{arch, {}};
  suite.arms.push_back({"mel", Defender::identity(mel_shared)});
  for (const char* f : {"median", "mean", "gaussian"}) {
    suite.arms.push_back(
        {f, Defender::filtered(filter_for_arm(f, config.filter_kernel, config.gaussian_sigma), mel_shared)});
  }
  suite.arms.push_back({"mock", Defender::cascade(mock_encoder, std::make_shared<const ClassifierModel>(std::move(mock)))});
  suite.arms.push_back({"rand", Defender::cascade(rand_encoder, std::make_shared<const ClassifierModel>(std::move(rand)))});
  suite.arms.push_back({"scratch", Defender::cascade(std::make_shared<const EncoderModel>(std::move(scratch_encoder)),
                                                     std::make_shared<const ClassifierModel>(std::move(scratch)))});
  return suite;
}

DefenderSuite build_defender_suite(Architecture arch, std::span<const LabeledExample> train,
                                   std::span<const LabeledExample> dev, const std::filesystem::path& encoder_checkpoint,
                                   const SuiteConfig& config) {
  if (!std::filesystem::exists(encoder_checkpoint)) {
    throw MissingUpstreamError("defender suite: encoder checkpoint " + encoder_checkpoint.string() + " not found",
                               "pretrain");
  }
  return build_defender_suite(arch, train, dev, load_encoder(encoder_checkpoint), config);
}

nlohmann::json suite_manifest_json(const std::vector<std::pair<std::string, SuiteEntry>>& entries) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [name, e] : entries) {
    nlohmann::json rec{{"front_end", to_string(e.kind)},
                       {"encoder", nullptr},
                       {"filter", nullptr},
                       {"classifier", e.classifier.generic_string()}};
    if (e.encoder) rec["encoder"] = e.encoder->generic_string();
    if (e.filter) {
      rec["filter"] = {{"kind", to_string(e.filter->kind)},
                       {"kernel_size", e.filter->kernel_size},
                       {"sigma", e.filter->sigma}};
    }
    j[name] = rec;
  }
  return j;
}

DefenderSuite load_defender_suite(const nlohmann::json& manifest, Architecture arch, const std::filesystem::path& base) {
  const InputMode raw = InputMode::kRawSpectrogram, feat = InputMode::kEncoderFeatures;
  std::map<std::string, std::shared_ptr<const ClassifierModel>> classifiers;
  std::map<std::string, std::shared_ptr<const EncoderModel>> encoders;
  auto classifier = [&](const std::string& rel, InputMode mode) {
    auto& slot = classifiers[rel];
    if (!slot) slot = std::make_shared<const ClassifierModel>(load_classifier(base / rel, &arch, &mode));
    return slot;
  };
  auto encoder = [&](const std::string& rel) {
    auto& slot = encoders[rel];
    if (!slot) slot = std::make_shared<const EncoderModel>(load_encoder(base / rel));
    return slot;
  };
  DefenderSuite suite{arch, {}};
  for (const auto& name : defender_arm_names()) {
    if (!manifest.contains(name)) continue;
    const auto& rec = manifest.at(name);
    const auto kind = parse_front_end(rec.at("front_end").get<std::string>());
    const auto cls = rec.at("classifier").get<std::string>();
    switch (kind) {
      case FrontEndKind::kIdentity:
        suite.arms.push_back({name, Defender::identity(classifier(cls, raw))});
        break;
      case FrontEndKind::kFilter: {
        const auto& f = rec.at("filter");
        FilterConfig fc{parse_filter_kind(f.at("kind").get<std::string>()), f.at("kernel_size").get<std::size_t>(),
                        f.at("sigma").get<double>()};
        suite.arms.push_back({name, Defender::filtered(fc, classifier(cls, raw))});
        break;
      }
      case FrontEndKind::kEncoder:
        suite.arms.push_back(
            {name, Defender::cascade(encoder(rec.at("encoder").get<std::string>()), classifier(cls, feat))});
        break;
    }
  }
  return suite;
}

}  // namespace lab
