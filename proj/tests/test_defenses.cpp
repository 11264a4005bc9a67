#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "gradcheck.hpp"
#include "lab/corpus.hpp"
#include "lab/defenses.hpp"
#include "lab/errors.hpp"
#include "lab/params.hpp"

using namespace lab;

namespace {

const FilterKind kKinds[] = {FilterKind::kGaussian, FilterKind::kMedian, FilterKind::kMean};

Spectrogram impulse(std::size_t frames, std::size_t bins, std::size_t t, std::size_t f, double v) {
  Spectrogram s(frames, bins, 0.0);
  s.at(t, f) = v;
  return s;
}

// Plain sliding-window oracle with clamped (edge-replicated) indices.
Spectrogram reference_filter(const Spectrogram& s, const FilterConfig& cfg) {
  const long r = static_cast<long>(cfg.kernel_size / 2);
  const Tensor kernel = gaussian_kernel(cfg.kernel_size, cfg.sigma);
  Spectrogram out(s.frames(), s.bins());
  for (long t = 0; t < static_cast<long>(s.frames()); ++t) {
    for (long f = 0; f < static_cast<long>(s.bins()); ++f) {
      std::vector<double> window;
      double weighted = 0.0;
      for (long dt = -r; dt <= r; ++dt) {
        for (long df = -r; df <= r; ++df) {
          const long tt = std::clamp(t + dt, 0L, static_cast<long>(s.frames()) - 1);
          const long ff = std::clamp(f + df, 0L, static_cast<long>(s.bins()) - 1);
          window.push_back(s.at(tt, ff));
          weighted += kernel.at(dt + r, df + r) * s.at(tt, ff);
        }
      }
      std::sort(window.begin(), window.end());
      double v = 0.0;
      if (cfg.kind == FilterKind::kMedian) v = window[window.size() / 2];
      if (cfg.kind == FilterKind::kMean) v = std::accumulate(window.begin(), window.end(), 0.0) / window.size();
      if (cfg.kind == FilterKind::kGaussian) v = weighted;
      out.at(t, f) = v;
    }
  }
  return out;
}

}  // namespace

TEST(Filter, ConstantIsFixedPoint) {
  const Spectrogram flat(9, 7, 3.25);
  for (auto kind : kKinds) {
    const auto out = apply_filter(flat, {.kind = kind});
    for (double v : out.data()) EXPECT_NEAR(v, 3.25, 1e-12);
  }
}

TEST(Filter, ImpulseUnderMedianAndMean) {
  const auto spike = impulse(3, 3, 1, 1, 9.0);
  EXPECT_EQ(apply_filter(spike, {.kind = FilterKind::kMedian}).at(1, 1), 0.0);
  EXPECT_NEAR(apply_filter(spike, {.kind = FilterKind::kMean}).at(1, 1), 1.0, 1e-15);
}

TEST(Filter, MatchesSlidingWindowOracle) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Spectrogram s(labtest::random_tensor({11, 8}, seed, -5, 5));
    for (auto kind : kKinds) {
      for (std::size_t k : {1u, 3u, 5u}) {
        const FilterConfig cfg{.kind = kind, .kernel_size = k, .sigma = 0.8};
        const auto got = apply_filter(s, cfg);
        const auto want = reference_filter(s, cfg);
        for (std::size_t i = 0; i < got.data().size(); ++i) ASSERT_NEAR(got.data()[i], want.data()[i], 1e-12);
      }
    }
  }
}

TEST(Filter, ShiftEquivariantAwayFromBorders) {
  for (auto kind : kKinds) {
    const FilterConfig cfg{.kind = kind};
    const auto a = apply_filter(impulse(12, 10, 4, 4, 5.0), cfg);
    const auto b = apply_filter(impulse(12, 10, 6, 5, 5.0), cfg);
    for (std::size_t t = 2; t < 8; ++t)
      for (std::size_t f = 2; f < 7; ++f) EXPECT_EQ(a.at(t, f), b.at(t + 2, f + 1));
  }
}

TEST(Filter, GaussianKernelNormalisedAndFlattens) {
  for (std::size_t k : {1u, 3u, 5u, 7u}) {
    for (double sigma : {0.3, 1.0, 4.0}) {
      const Tensor g = gaussian_kernel(k, sigma);
      double total = 0.0;
      for (double v : g.data()) total += v;
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
  }
  const Spectrogram s(labtest::random_tensor({8, 8}, 4, -3, 3));
  const auto wide = apply_filter(s, {.kind = FilterKind::kGaussian, .sigma = 1e5});
  const auto mean = apply_filter(s, {.kind = FilterKind::kMean});
  for (std::size_t i = 0; i < wide.data().size(); ++i) EXPECT_NEAR(wide.data()[i], mean.data()[i], 1e-6);
}

TEST(Filter, Errors) {
  EXPECT_THROW(apply_filter(Spectrogram(2, 8), {.kernel_size = 3}), UsageError);
  EXPECT_THROW((FilterConfig{.kernel_size = 4}.validate()), UsageError);
  EXPECT_THROW((FilterConfig{.kind = FilterKind::kGaussian, .sigma = 0.0}.validate()), UsageError);
  EXPECT_EQ(parse_filter_kind(to_string(FilterKind::kMedian)), FilterKind::kMedian);
}

namespace {

constexpr InputGeometry kSmall{16, 12};

EncoderConfig tiny_encoder() {
  EncoderConfig c;
  c.layers = 1;
  c.model_dim = 8;
  c.heads = 2;
  c.ff_dim = 8;
  c.bins = 12;
  return c;
}

LabeledCorpus tiny_corpus() {
  CorpusSpec spec;
  spec.n_train = 12;
  spec.n_dev = 6;
  spec.n_eval = 6;
  spec.frames = kSmall.height;
  spec.bins = kSmall.width;
  return generate_labeled_corpus(spec);
}

SuiteConfig tiny_suite() {
  SuiteConfig c;
  c.classifier = {.epochs = 1, .batch_size = 4};
  c.scratch = {.epochs = 2, .batch_size = 4};
  c.seed = 3;
  return c;
}

}  // namespace

TEST(Defender, IdentityEqualsClassifier) {
  const auto c = std::make_shared<const ClassifierModel>(
      build_classifier(Architecture::kMaxFeatureMap, InputMode::kRawSpectrogram, 1, kSmall));
  const auto d = Defender::identity(c);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Spectrogram s(labtest::random_tensor({16, 12}, seed));
    EXPECT_EQ(d.predict(s).logits, predict(*c, s.values()).logits);
    EXPECT_EQ(defend_predict(d, s).logits, d.predict(s).logits);
  }
}

TEST(Defender, ModeMismatchFailsAtConstruction) {
  const auto raw = std::make_shared<const ClassifierModel>(
      build_classifier(Architecture::kMaxFeatureMap, InputMode::kRawSpectrogram, 1, kSmall));
  const auto feat = std::make_shared<const ClassifierModel>(
      build_classifier(Architecture::kMaxFeatureMap, InputMode::kEncoderFeatures, 1, feature_geometry(tiny_encoder(), 16)));
  const auto enc = std::make_shared<const EncoderModel>(random_init_encoder(tiny_encoder(), 1));
  EXPECT_THROW(Defender::identity(feat), UsageError);
  EXPECT_THROW(Defender::filtered({}, feat), UsageError);
  EXPECT_THROW(Defender::cascade(enc, raw), UsageError);
  EXPECT_NO_THROW(Defender::cascade(enc, feat));
  const auto wide = std::make_shared<const ClassifierModel>(
      build_classifier(Architecture::kMaxFeatureMap, InputMode::kEncoderFeatures, 1, {8, 16}));
  EXPECT_THROW(Defender::cascade(enc, wide), UsageError);
}

TEST(Defender, CascadeUsesLastHiddenState) {
  const auto enc = std::make_shared<const EncoderModel>(random_init_encoder(tiny_encoder(), 2));
  const auto feat = std::make_shared<const ClassifierModel>(
      build_classifier(Architecture::kSqueezeExcite, InputMode::kEncoderFeatures, 1, feature_geometry(tiny_encoder(), 16)));
  const auto d = Defender::cascade(enc, feat);
  const Spectrogram s(labtest::random_tensor({16, 12}, 8));
  EXPECT_EQ(d.front_end(s), encode(*enc, s).back());
  EXPECT_EQ(d.predict(s).logits, predict(*feat, encode(*enc, s).back()).logits);
  EXPECT_EQ(d.predict(s).logits, d.predict(s).logits);
}

TEST(Suite, SevenArmsWithSharingAndFrozenEncoder) {
  const auto corpus = tiny_corpus();
  const auto pretrained = random_init_encoder(tiny_encoder(), 11);
  const auto fingerprint = param_fingerprint(pretrained.params());
  const auto suite = build_defender_suite(Architecture::kSqueezeExcite, corpus.train, corpus.dev, pretrained, tiny_suite());
  EXPECT_EQ(param_fingerprint(pretrained.params()), fingerprint);

  ASSERT_EQ(suite.arms.size(), 7u);
  for (std::size_t i = 0; i < 7; ++i) EXPECT_EQ(suite.arms[i].name, defender_arm_names()[i]);
  const auto& mel = suite.at("mel");
  for (const char* f : {"median", "mean", "gaussian"}) {
    EXPECT_EQ(suite.at(f).kind(), FrontEndKind::kFilter);
    EXPECT_EQ(suite.at(f).shared_classifier(), mel.shared_classifier());
  }
  const auto& mock = suite.at("mock");
  const auto& rand = suite.at("rand");
  EXPECT_EQ(param_fingerprint(mock.encoder()->params()), fingerprint);
  EXPECT_EQ(mock.encoder()->params().names(), rand.encoder()->params().names());
  for (std::size_t i = 0; i < mock.encoder()->params().size(); ++i) {
    EXPECT_EQ(mock.encoder()->params().items()[i].value.shape(), rand.encoder()->params().items()[i].value.shape());
  }
  EXPECT_FALSE(mock.encoder()->params() == rand.encoder()->params());
  EXPECT_EQ(mock.classifier().params().names(), rand.classifier().params().names());
  EXPECT_FALSE(suite.at("scratch").encoder()->params() == rand.encoder()->params());
  EXPECT_THROW(suite.at("nope"), UsageError);
}

TEST(Suite, MissingEncoderCheckpointNamesPretrain) {
  const auto corpus = tiny_corpus();
  try {
    build_defender_suite(Architecture::kMaxFeatureMap, corpus.train, corpus.dev, "/nonexistent/encoder.ckpt",
                         tiny_suite());
    FAIL() << "expected MissingUpstreamError";
  } catch (const MissingUpstreamError& e) {
    EXPECT_EQ(e.required_command(), "pretrain");
  }
}

TEST(Suite, FeatureTrainingLeavesEncoderUntouched) {
  const auto corpus = tiny_corpus();
  const auto encoder = random_init_encoder(tiny_encoder(), 4);
  const auto before = param_fingerprint(encoder.params());
  auto model = build_classifier(Architecture::kMaxFeatureMap, InputMode::kEncoderFeatures, 2,
                                feature_geometry(tiny_encoder(), 16));
  train_feature_classifier(model, encoder, corpus.train, corpus.dev, {.epochs = 2, .batch_size = 4});
  EXPECT_EQ(param_fingerprint(encoder.params()), before);
}

TEST(Suite, ManifestRoundTripSharesClassifiers) {
  labtest::TempDir dir("suite");
  const auto enc = random_init_encoder(tiny_encoder(), 5);
  save_encoder(dir / "enc.ckpt", enc, {});
  const auto mel = build_classifier(Architecture::kMaxFeatureMap, InputMode::kRawSpectrogram, 1, kSmall);
  save_classifier(dir / "mel.ckpt", mel);
  const auto feat =
      build_classifier(Architecture::kMaxFeatureMap, InputMode::kEncoderFeatures, 2, feature_geometry(tiny_encoder(), 16));
  save_classifier(dir / "mock.ckpt", feat);

  const auto manifest = suite_manifest_json({
      {"mel", {.kind = FrontEndKind::kIdentity, .classifier = "mel.ckpt"}},
      {"median", {.kind = FrontEndKind::kFilter, .filter = FilterConfig{}, .classifier = "mel.ckpt"}},
      {"mock", {.kind = FrontEndKind::kEncoder, .encoder = "enc.ckpt", .classifier = "mock.ckpt"}},
  });
  const auto suite = load_defender_suite(manifest, Architecture::kMaxFeatureMap, dir.path());
  ASSERT_EQ(suite.arms.size(), 3u);
  EXPECT_EQ(suite.at("median").shared_classifier(), suite.at("mel").shared_classifier());
  EXPECT_TRUE(suite.at("mock").encoder()->params() == enc.params());
  const Spectrogram s(labtest::random_tensor({16, 12}, 1));
  EXPECT_EQ(suite.at("mock").predict(s).logits, Defender::cascade(std::make_shared<const EncoderModel>(enc),
                                                                   std::make_shared<const ClassifierModel>(feat))
                                                    .predict(s)
                                                    .logits);
  EXPECT_THROW(load_defender_suite(manifest, Architecture::kSqueezeExcite, dir.path()), UsageError);
}
