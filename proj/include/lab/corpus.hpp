#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "lab/spectrogram.hpp"

namespace lab {

// Generated values are clamped to [-kValueBound, kValueBound].
inline constexpr double kValueBound = 20.0;
// Generated values are rounded to this grid so text files round-trip exactly.
inline constexpr double kValueResolution = 1e-3;

struct CorpusSpec {
  std::size_t n_train = 600;
  std::size_t n_dev = 200;
  std::size_t n_eval = 200;
  std::uint64_t seed = 1;
  double class_separation = 1.0;
  double noise_level = 0.5;
  std::size_t frames = 128;
  std::size_t bins = 40;

  void validate() const;
};

struct LabeledCorpus {
  std::vector<LabeledExample> train;
  std::vector<LabeledExample> dev;
  std::vector<LabeledExample> eval;
};

// Splits come from independent seed substreams of `spec.seed`. Labels
// alternate bona fide / spoof so every split is balanced.
LabeledCorpus generate_labeled_corpus(const CorpusSpec& spec);
// Stand-in for unlabeled speech: same generator with more background bumps;
// class structure drawn at random and discarded.
std::vector<Spectrogram> generate_unlabeled_corpus(std::size_t n, std::uint64_t seed, const CorpusSpec& shape = {});

// One example (exposed for tests): `bumps` background components plus the
// class structure for `label`.
Spectrogram synthesize_spectrogram(std::uint64_t seed, int label, std::size_t bumps, const CorpusSpec& spec);

// JSON-lines corpus files. Unlabeled records omit "label".
void save_corpus(const std::vector<LabeledExample>& examples, const std::filesystem::path& path);
void save_unlabeled(const std::vector<Spectrogram>& specs, const std::filesystem::path& path);
// `expected_bins`, when set, rejects records with another bin count.
std::vector<LabeledExample> load_corpus(const std::filesystem::path& path,
                                        std::optional<std::size_t> expected_bins = std::nullopt);
std::vector<Spectrogram> load_unlabeled(const std::filesystem::path& path,
                                        std::optional<std::size_t> expected_bins = std::nullopt);

}  // namespace lab
