#include "lab/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <string>

#include <json.hpp>

#include "lab/errors.hpp"
#include "lab/rng.hpp"

namespace lab {

namespace {

constexpr std::size_t kLabeledBumps = 8;
constexpr std::size_t kUnlabeledBumps = 10;

// Background field.
constexpr double kBumpAmplitude = 12.0;
constexpr double kBumpFrameWidthMin = 4.0, kBumpFrameWidthMax = 16.0;
constexpr double kBumpBinWidthMin = 1.5, kBumpBinWidthMax = 5.0;

// Class structure: three ridges kRidgeSpacing bins apart.
constexpr std::size_t kRidgeCount = 3;
constexpr double kRidgeAmplitude = 10.0;
constexpr double kRidgeBinWidth = 0.8;
constexpr double kModulationDepth = 0.6;
constexpr double kSlowPeriodMin = 40.0, kSlowPeriodMax = 80.0;
constexpr double kFastPeriodMin = 4.0, kFastPeriodMax = 8.0;
constexpr double kPhaseJitter = 0.3;

double quantize(double v) {
  v = std::clamp(v, -kValueBound, kValueBound);
  return std::round(v / kValueResolution) * kValueResolution;
}

std::vector<LabeledExample> generate_split(const CorpusSpec& spec, std::string_view tag, std::size_t n) {
  const std::uint64_t split_seed = derive_seed(spec.seed, tag);
  std::vector<LabeledExample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 2);
    out.push_back({synthesize_spectrogram(derive_seed(split_seed, i), label, kLabeledBumps, spec), label});
  }
  return out;
}

[[noreturn]] void bad_record(const std::filesystem::path& path, std::size_t line, const std::string& what) {
  throw FormatError(path.string() + ":" + std::to_string(line) + ": " + what);
}

Spectrogram parse_spectrogram(const nlohmann::json& rec, const std::filesystem::path& path, std::size_t line,
                              std::optional<std::size_t> expected_bins) {
  if (!rec.is_object() || !rec.contains("shape") || !rec.contains("values")) {
    bad_record(path, line, "record needs 'shape' and 'values'");
  }
  const auto& shape = rec.at("shape");
  if (!shape.is_array() || shape.size() != 2 || !shape[0].is_number_unsigned() || !shape[1].is_number_unsigned()) {
    bad_record(path, line, "'shape' must be [frames, bins]");
  }
  const auto frames = shape[0].get<std::size_t>();
  const auto bins = shape[1].get<std::size_t>();
  if (frames == 0 || bins == 0) bad_record(path, line, "empty spectrogram");
  if (expected_bins && bins != *expected_bins) {
    bad_record(path, line,
               "bin count mismatch: expected " + std::to_string(*expected_bins) + ", found " + std::to_string(bins));
  }
  const auto& values = rec.at("values");
  if (!values.is_array() || values.size() != frames * bins) {
    bad_record(path, line, "'values' must hold frames*bins = " + std::to_string(frames * bins) + " numbers");
  }
  std::vector<double> data;
  data.reserve(values.size());
  for (const auto& v : values) {
    if (!v.is_number()) bad_record(path, line, "non-numeric value");
    data.push_back(v.get<double>());
  }
  try {
    return Spectrogram(Tensor(Shape{frames, bins}, std::move(data)));
  } catch (const Error& e) {
    bad_record(path, line, e.what());
  }
}

template <typename Fn>
void for_each_record(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw Error("corpus: cannot open " + path.string());
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      bad_record(path, line, std::string("invalid JSON: ") + e.what());
    }
    fn(rec, line);
  }
}

nlohmann::json spectrogram_record(const Spectrogram& s) {
  return {{"shape", {s.frames(), s.bins()}}, {"values", s.values().storage()}};
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("corpus: cannot write " + path.string());
  return out;
}

}  // namespace

void CorpusSpec::validate() const {
  if (n_train == 0 || n_dev == 0 || n_eval == 0) throw UsageError("corpus: split sizes must be positive");
  if (class_separation < 0.0) throw UsageError("corpus: class_separation must be non-negative");
  if (!(noise_level >= 0.0)) throw UsageError("corpus: noise_level must be non-negative");
  if (frames == 0 || bins < 4 * kRidgeCount) throw UsageError("corpus: spectrogram too small");
}

Spectrogram synthesize_spectrogram(std::uint64_t seed, int label, std::size_t bumps, const CorpusSpec& spec) {
  Rng rng(seed);
  const std::size_t T = spec.frames, F = spec.bins;
  Spectrogram s(T, F);

  for (std::size_t b = 0; b < bumps; ++b) {
    const double ct = rng.uniform(0.0, static_cast<double>(T));
    const double cf = rng.uniform(0.0, static_cast<double>(F));
    const double wt = rng.uniform(kBumpFrameWidthMin, kBumpFrameWidthMax);
    const double wf = rng.uniform(kBumpBinWidthMin, kBumpBinWidthMax);
    const double amp = rng.uniform(-kBumpAmplitude, kBumpAmplitude);
    for (std::size_t t = 0; t < T; ++t) {
      const double dt = (static_cast<double>(t) - ct) / wt;
      const double et = std::exp(-0.5 * dt * dt);
      if (et < 1e-6) continue;
      for (std::size_t f = 0; f < F; ++f) {
        const double df = (static_cast<double>(f) - cf) / wf;
        s.at(t, f) += amp * et * std::exp(-0.5 * df * df);
      }
    }
  }

  // Ridge rows are evenly spaced; bona fide modulates slowly, spoof fast with
  // a wandering phase.
  const double spacing = static_cast<double>(F) / (kRidgeCount + 1);
  const double first = rng.uniform(0.5 * spacing, 1.5 * spacing);
  const double phase0 = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const bool spoof = label == kSpoof;
  const double period =
      spoof ? rng.uniform(kFastPeriodMin, kFastPeriodMax) : rng.uniform(kSlowPeriodMin, kSlowPeriodMax);
  std::vector<double> envelope(T);
  double jitter = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    if (spoof) jitter += rng.normal(0.0, kPhaseJitter);
    const double phase = 2.0 * std::numbers::pi * static_cast<double>(t) / period + phase0 + jitter;
    envelope[t] = spec.class_separation * kRidgeAmplitude * (1.0 + kModulationDepth * std::sin(phase));
  }
  for (std::size_t r = 0; r < kRidgeCount; ++r) {
    const double row = first + spacing * static_cast<double>(r);
    for (std::size_t f = 0; f < F; ++f) {
      const double df = (static_cast<double>(f) - row) / kRidgeBinWidth;
      const double profile = std::exp(-0.5 * df * df);
      if (profile < 1e-6) continue;
      for (std::size_t t = 0; t < T; ++t) s.at(t, f) += envelope[t] * profile;
    }
  }

  for (auto& v : s.data()) v = quantize(v + rng.normal(0.0, spec.noise_level));
  return s;
}

LabeledCorpus generate_labeled_corpus(const CorpusSpec& spec) {
  spec.validate();
  return {generate_split(spec, "train", spec.n_train), generate_split(spec, "dev", spec.n_dev),
          generate_split(spec, "eval", spec.n_eval)};
}

std::vector<Spectrogram> generate_unlabeled_corpus(std::size_t n, std::uint64_t seed, const CorpusSpec& shape) {
  const std::uint64_t stream = derive_seed(seed, "unlabeled");
  std::vector<Spectrogram> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t s = derive_seed(stream, i);
    Rng pick(derive_seed(s, "label"));
    const int label = pick.uniform() < 0.5 ? kBonafide : kSpoof;
    out.push_back(synthesize_spectrogram(s, label, kUnlabeledBumps, shape));
  }
  return out;
}

void save_corpus(const std::vector<LabeledExample>& examples, const std::filesystem::path& path) {
  auto out = open_for_write(path);
  for (const auto& ex : examples) {
    auto rec = spectrogram_record(ex.spec);
    rec["label"] = ex.label;
    out << rec.dump() << '\n';
  }
  if (!out) throw Error("corpus: write failed for " + path.string());
}

void save_unlabeled(const std::vector<Spectrogram>& specs, const std::filesystem::path& path) {
  auto out = open_for_write(path);
  for (const auto& s : specs) out << spectrogram_record(s).dump() << '\n';
  if (!out) throw Error("corpus: write failed for " + path.string());
}

std::vector<LabeledExample> load_corpus(const std::filesystem::path& path, std::optional<std::size_t> expected_bins) {
  std::vector<LabeledExample> out;
  for_each_record(path, [&](const nlohmann::json& rec, std::size_t line) {
    auto spec = parse_spectrogram(rec, path, line, expected_bins);
    if (!rec.contains("label") || !rec.at("label").is_number_integer()) bad_record(path, line, "missing integer 'label'");
    const int label = rec.at("label").get<int>();
    if (label != kBonafide && label != kSpoof) bad_record(path, line, "label must be 0 or 1");
    out.push_back({std::move(spec), label});
  });
  return out;
}

std::vector<Spectrogram> load_unlabeled(const std::filesystem::path& path, std::optional<std::size_t> expected_bins) {
  std::vector<Spectrogram> out;
  for_each_record(path, [&](const nlohmann::json& rec, std::size_t line) {
    out.push_back(parse_spectrogram(rec, path, line, expected_bins));
  });
  return out;
}

}  // namespace lab
