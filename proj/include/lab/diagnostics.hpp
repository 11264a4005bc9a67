#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "lab/attacks.hpp"
#include "lab/defenses.hpp"
#include "lab/encoder.hpp"

namespace lab {

// Layerwise noise-to-signal ratio: for each layer i = 0..K the sum over pairs
// of |h_i(adv) - h_i(orig)|_2 / |h_i(orig)|_2, norms over the flattened layer
// output. Layer 0 is the stacked-frame input.
struct LnsrReport {
  std::string model_id;
  std::string attack_summary;
  std::vector<double> per_layer;  // sums, K+1 entries
  std::size_t pairs = 0;

  std::vector<double> per_pair_mean() const;
};

LnsrReport lnsr(const EncoderModel& encoder, std::span<const AdversarialPair> pairs, std::string model_id = {},
                std::string attack_summary = {});

struct LnsrRow {
  std::size_t layer = 0;
  std::string arm;  // "mock" | "rand"
  double epsilon = 0.0;
  double lnsr_sum = 0.0;
  double lnsr_mean = 0.0;
  std::size_t n = 0;
};

// Rows ordered by epsilon, then arm (mock, rand), then layer.
std::vector<LnsrRow> lnsr_comparison(const EncoderModel& pretrained, const EncoderModel& random_init,
                                     const std::map<double, std::vector<AdversarialPair>>& pairs_by_epsilon);

struct RobustnessCurve {
  std::string defender;
  AttackAlgorithm algorithm = AttackAlgorithm::kPgd;
  std::vector<std::pair<double, double>> points;  // (epsilon, accuracy), epsilon increasing, includes 0
  std::size_t n_examples = 0;

  double clean_accuracy() const;
  double accuracy_at(double epsilon) const;
};

// Accuracy of `defender` on the adversarial side of `pairs`.
double adversarial_accuracy(const Defender& defender, std::span<const AdversarialPair> pairs);

// Generates one pair set per (algorithm, epsilon) against `attacker` and
// scores every defender on it. The attacker's architecture must differ from
// every target classifier's (black-box transfer). epsilon = 0 is always
// included as the clean point.
std::vector<RobustnessCurve> robustness_sweep(std::span<const NamedDefender> defenders, const ClassifierModel& attacker,
                                              std::span<const LabeledExample> eval,
                                              std::span<const AttackAlgorithm> algorithms,
                                              std::span<const double> epsilons, const AttackConfig& base);

// Scores defenders on pre-generated pair sets, keyed by (algorithm, epsilon).
// Every algorithm must have the same epsilon grid.
std::vector<RobustnessCurve> curves_from_pair_sets(
    std::span<const NamedDefender> defenders,
    const std::map<std::pair<AttackAlgorithm, double>, std::vector<AdversarialPair>>& pair_sets,
    const std::string& name_prefix = {});

void write_curves_csv(const std::filesystem::path& path, std::span<const RobustnessCurve> curves);
void write_lnsr_csv(const std::filesystem::path& path, std::span<const LnsrRow> rows);
// Shortest round-trip decimal form used in the CSV outputs.
std::string format_number(double v);

}  // namespace lab
