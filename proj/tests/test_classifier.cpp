#include <algorithm>
#include <set>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "gradcheck.hpp"
#include "lab/corpus.hpp"
#include "lab/encoder.hpp"
#include "lab/errors.hpp"
#include "lab/rng.hpp"

using namespace lab;

namespace {

constexpr InputGeometry kSmall{16, 12};

LabeledCorpus small_corpus(std::size_t n = 24) {
  CorpusSpec spec;
  spec.n_train = n;
  spec.n_dev = 8;
  spec.n_eval = 8;
  spec.frames = kSmall.height;
  spec.bins = kSmall.width;
  return generate_labeled_corpus(spec);
}

const Architecture kBoth[] = {Architecture::kMaxFeatureMap, Architecture::kSqueezeExcite};

}  // namespace

TEST(Classifier, SameSeedSameInit) {
  for (auto arch : kBoth) {
    EXPECT_TRUE(build_classifier(arch, InputMode::kRawSpectrogram, 3).params() ==
                build_classifier(arch, InputMode::kRawSpectrogram, 3).params());
    EXPECT_FALSE(build_classifier(arch, InputMode::kRawSpectrogram, 3).params() ==
                 build_classifier(arch, InputMode::kRawSpectrogram, 4).params());
  }
}

TEST(Classifier, FourInputsGiveFourByTwoLogits) {
  for (auto arch : kBoth) {
    const auto model = build_classifier(arch, InputMode::kRawSpectrogram, 1);
    const FrozenClassifier frozen(model);
    std::vector<Tensor> rows;
    for (std::uint64_t i = 0; i < 4; ++i) rows.push_back(predict(frozen, labtest::random_tensor({128, 40}, i)).logits);
    for (const auto& r : rows) EXPECT_EQ(r.shape(), (Shape{2}));
  }
}

TEST(Classifier, ArchitecturesHaveDisjointParameterNames) {
  const auto a = build_classifier(Architecture::kMaxFeatureMap, InputMode::kRawSpectrogram, 1).params().names();
  const auto b = build_classifier(Architecture::kSqueezeExcite, InputMode::kRawSpectrogram, 1).params().names();
  for (const auto& name : a) EXPECT_EQ(std::count(b.begin(), b.end(), name), 0) << name;
}

TEST(Classifier, ParameterBudget) {
  for (auto arch : kBoth) {
    const auto n = build_classifier(arch, InputMode::kRawSpectrogram, 1).params().scalar_count();
    EXPECT_GT(n, 5000u);
    EXPECT_LT(n, 60000u);
  }
}

TEST(Classifier, InputInvariants) {
  const auto model = build_classifier(Architecture::kMaxFeatureMap, InputMode::kRawSpectrogram, 1);
  EXPECT_THROW(predict(model, Tensor({64, 40})), ShapeError);
  EXPECT_EQ(predict(model, labtest::random_tensor({128, 40}, 1)).logits,
            predict(model, labtest::random_tensor({128, 40}, 1)).logits);
  EXPECT_THROW(build_classifier(Architecture::kMaxFeatureMap, InputMode::kRawSpectrogram, 1, {3, 3}), UsageError);
}

TEST(Classifier, ExtremeInputsGiveFiniteLogits) {
  for (auto arch : kBoth) {
    auto model = build_classifier(arch, InputMode::kRawSpectrogram, 2);
    model.set_input_norm({0.5, 3.0});
    for (double v : {kValueBound, -kValueBound}) EXPECT_TRUE(predict(model, Tensor({128, 40}, v)).logits.all_finite());
    Tensor checker({128, 40});
    for (std::size_t i = 0; i < checker.numel(); ++i) checker[i] = (i % 2 ? 1 : -1) * kValueBound;
    EXPECT_TRUE(predict(model, checker).logits.all_finite());
  }
}

TEST(Classifier, ArgmaxIgnoresCommonShift) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Tensor logits = labtest::random_tensor({2}, seed, -5, 5);
    Tensor shifted = logits;
    const double c = Rng(seed).uniform(-100, 100);
    shifted[0] += c;
    shifted[1] += c;
    EXPECT_EQ(argmax_label(logits), argmax_label(shifted));
  }
  EXPECT_EQ(argmax_label(Tensor::vector({1, 1})), 0);
}

TEST(Classifier, FullGradientsMatchFiniteDifferences) {
  for (auto arch : kBoth) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto r = labtest::classifier_gradcheck(arch, seed);
      EXPECT_LT(r.error, labtest::kGradTolerance) << to_string(arch) << " seed " << seed << " tensor " << r.input;
    }
  }
}

TEST(Training, ZeroEpochsLeavesModelUnchanged) {
  const auto corpus = small_corpus();
  for (auto arch : kBoth) {
    auto model = build_classifier(arch, InputMode::kRawSpectrogram, 1, kSmall);
    const auto before = model.params();
    const auto h = train_classifier(model, corpus.train, {.epochs = 0});
    EXPECT_TRUE(model.params() == before);
    EXPECT_EQ(model.input_norm(), InputNorm{});
    EXPECT_TRUE(h.train_loss.empty());
  }
}

TEST(Training, EmptyCorpusRejected) {
  auto model = build_classifier(Architecture::kMaxFeatureMap, InputMode::kRawSpectrogram, 1, kSmall);
  EXPECT_THROW(train_classifier(model, std::vector<LabeledExample>{}, {}), UsageError);
}

TEST(Training, BitwiseDeterministic) {
  const auto corpus = small_corpus();
  for (auto arch : kBoth) {
    auto a = build_classifier(arch, InputMode::kRawSpectrogram, 1, kSmall);
    auto b = build_classifier(arch, InputMode::kRawSpectrogram, 1, kSmall);
    const TrainConfig cfg{.epochs = 2, .batch_size = 5, .seed = 9};
    const auto ha = train_classifier(a, corpus.train, cfg, corpus.dev);
    const auto hb = train_classifier(b, corpus.train, cfg, corpus.dev);
    EXPECT_TRUE(a.params() == b.params());
    EXPECT_EQ(ha.train_loss, hb.train_loss);
    EXPECT_EQ(ha.dev_accuracy, hb.dev_accuracy);
    EXPECT_EQ(ha.dev_accuracy.size(), 2u);
  }
}

TEST(Training, IndependentOfThreadCount) {
  const auto corpus = small_corpus();
  auto run = [&](const char* threads) {
    setenv("LAB_THREADS", threads, 1);
    auto m = build_classifier(Architecture::kSqueezeExcite, InputMode::kRawSpectrogram, 1, kSmall);
    train_classifier(m, corpus.train, {.epochs = 1, .batch_size = 8, .seed = 2});
    unsetenv("LAB_THREADS");
    return m.params();
  };
  EXPECT_TRUE(run("1") == run("3"));
}

TEST(Training, FitsInputNorm) {
  const auto corpus = small_corpus();
  auto model = build_classifier(Architecture::kMaxFeatureMap, InputMode::kRawSpectrogram, 1, kSmall);
  train_classifier(model, corpus.train, {.epochs = 1});
  std::vector<Tensor> x;
  for (const auto& ex : corpus.train) x.push_back(ex.spec.values());
  EXPECT_EQ(model.input_norm(), fit_input_norm(x));
  EXPECT_GT(model.input_norm().stddev, 1.0);
}

TEST(Accuracy, Definitions) {
  const std::vector<int> truth{0, 1, 1, 0, 1};
  EXPECT_EQ(accuracy(truth, truth), 1.0);
  const std::vector<int> guess{0, 0, 1, 1, 1};
  std::vector<int> flipped;
  for (int t : truth) flipped.push_back(1 - t);
  EXPECT_DOUBLE_EQ(accuracy(guess, flipped), 1.0 - accuracy(guess, truth));
  EXPECT_THROW(accuracy(std::vector<int>{}, std::vector<int>{}), UsageError);
}

TEST(Accuracy, RandomGuesserNearHalf) {
  Rng rng(17);
  std::vector<int> truth, guess;
  for (int i = 0; i < 1000; ++i) {
    truth.push_back(i % 2);
    guess.push_back(rng.uniform() < 0.5);
  }
  EXPECT_NEAR(accuracy(guess, truth), 0.5, 0.05);
}

TEST(Checkpoint, RoundTripKeepsNormAndRejectsRoleMismatch) {
  labtest::TempDir dir("cls");
  auto model = build_classifier(Architecture::kSqueezeExcite, InputMode::kEncoderFeatures, 4, {64, 64});
  model.set_input_norm({0.25, 2.5});
  save_classifier(dir / "c.ckpt", model);
  const Architecture arch = Architecture::kSqueezeExcite;
  const InputMode mode = InputMode::kEncoderFeatures;
  const auto back = load_classifier(dir / "c.ckpt", &arch, &mode);
  EXPECT_TRUE(back.params() == model.params());
  EXPECT_EQ(back.input_norm(), model.input_norm());
  EXPECT_EQ(back.geometry(), model.geometry());

  const InputMode raw = InputMode::kRawSpectrogram;
  EXPECT_THROW(load_classifier(dir / "c.ckpt", nullptr, &raw), UsageError);
  const Architecture other = Architecture::kMaxFeatureMap;
  EXPECT_THROW(load_classifier(dir / "c.ckpt", &other), UsageError);
  save_encoder(dir / "e.ckpt", random_init_encoder({}, 1), {});
  EXPECT_THROW(load_classifier(dir / "e.ckpt"), FormatError);
}
