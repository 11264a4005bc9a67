#include "lab/diagnostics.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>

#include "lab/errors.hpp"
#include "lab/parallel.hpp"

namespace lab {

namespace {

double l2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double l2_diff(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

std::ofstream open_csv(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

}  // namespace

std::vector<double> LnsrReport::per_pair_mean() const {
  std::vector<double> out(per_layer);
  for (double& v : out) v /= static_cast<double>(pairs);
  return out;
}

LnsrReport lnsr(const EncoderModel& encoder, std::span<const AdversarialPair> pairs, std::string model_id,
                std::string attack_summary) {
  if (pairs.empty()) throw UsageError("lnsr: no pairs");
  const FrozenEncoder frozen(encoder);
  const std::size_t layers = encoder.config().layers + 1;
  std::vector<std::vector<double>> ratios(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t n) {
    const auto h = frozen.hidden_states(pairs[n].original);
    const auto h_adv = frozen.hidden_states(pairs[n].adversarial);
    ratios[n].resize(layers);
    for (std::size_t i = 0; i < layers; ++i) {
      const double denom = l2(h[i].data());
      if (denom == 0.0) {
        throw NumericalError("lnsr: pair " + std::to_string(n) + " has a zero-norm signal at layer " +
                             std::to_string(i));
      }
      ratios[n][i] = l2_diff(h_adv[i].data(), h[i].data()) / denom;
    }
  });
  LnsrReport report{std::move(model_id), std::move(attack_summary), std::vector<double>(layers, 0.0), pairs.size()};
  for (const auto& r : ratios) {
    for (std::size_t i = 0; i < layers; ++i) report.per_layer[i] += r[i];
  }
  return report;
}

std::vector<LnsrRow> lnsr_comparison(const EncoderModel& pretrained, const EncoderModel& random_init,
                                     const std::map<double, std::vector<AdversarialPair>>& pairs_by_epsilon) {
  if (!(pretrained.config() == random_init.config())) {
    throw UsageError("lnsr comparison: pretrained and random encoders have different configs");
  }
  std::vector<LnsrRow> rows;
  for (const auto& [eps, pairs] : pairs_by_epsilon) {
    for (const auto& [arm, model] : {std::pair<const char*, const EncoderModel*>{"mock", &pretrained},
                                     std::pair<const char*, const EncoderModel*>{"rand", &random_init}}) {
      const auto report = lnsr(*model, pairs, arm);
      const auto mean = report.per_pair_mean();
      for (std::size_t i = 0; i < report.per_layer.size(); ++i) {
        rows.push_back({i, arm, eps, report.per_layer[i], mean[i], report.pairs});
      }
    }
  }
  return rows;
}

double RobustnessCurve::clean_accuracy() const { return accuracy_at(0.0); }

double RobustnessCurve::accuracy_at(double epsilon) const {
  for (const auto& [e, a] : points) {
    if (e == epsilon) return a;
  }
  throw UsageError("curve '" + defender + "' has no point at epsilon " + format_number(epsilon));
}

double adversarial_accuracy(const Defender& defender, std::span<const AdversarialPair> pairs) {
  if (pairs.empty()) throw UsageError("accuracy: empty pair set");
  std::vector<int> predicted(pairs.size()), truth(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t i) {
    predicted[i] = defender.predict(pairs[i].adversarial).label;
    truth[i] = pairs[i].label;
  });
  return accuracy(predicted, truth);
}

std::vector<RobustnessCurve> curves_from_pair_sets(
    std::span<const NamedDefender> defenders,
    const std::map<std::pair<AttackAlgorithm, double>, std::vector<AdversarialPair>>& pair_sets,
    const std::string& name_prefix) {
  std::map<AttackAlgorithm, std::vector<double>> grids;
  for (const auto& [key, pairs] : pair_sets) grids[key.first].push_back(key.second);
  for (const auto& [alg, grid] : grids) {
    if (grid != grids.begin()->second) {
      throw UsageError("curves: algorithm " + to_string(alg) + " has a different epsilon grid");
    }
  }
  std::vector<RobustnessCurve> curves;
  for (const auto& [alg, grid] : grids) {
    for (const auto& d : defenders) {
      RobustnessCurve curve{name_prefix + d.name, alg, {}, 0};
      for (double eps : grid) {
        const auto& pairs = pair_sets.at({alg, eps});
        curve.points.emplace_back(eps, adversarial_accuracy(d.defender, pairs));
        curve.n_examples = pairs.size();
      }
      curves.push_back(std::move(curve));
    }
  }
  return curves;
}

std::vector<RobustnessCurve> robustness_sweep(std::span<const NamedDefender> defenders, const ClassifierModel& attacker,
                                              std::span<const LabeledExample> eval,
                                              std::span<const AttackAlgorithm> algorithms,
                                              std::span<const double> epsilons, const AttackConfig& base) {
  for (const auto& d : defenders) {
    if (d.defender.classifier().architecture() == attacker.architecture()) {
      throw UsageError("robustness sweep: defender '" + d.name + "' shares the attacker's architecture (" +
                       to_string(attacker.architecture()) + "); transfer evaluation needs distinct architectures");
    }
  }
  std::set<double> grid{0.0};
  for (double e : epsilons) {
    if (!(e >= 0.0)) throw UsageError("robustness sweep: negative epsilon");
    grid.insert(e);
  }
  const ClassifierSurface surface(attacker, architecture_letter(attacker.architecture()));
  std::map<std::pair<AttackAlgorithm, double>, std::vector<AdversarialPair>> sets;
  for (const auto alg : algorithms) {
    for (double eps : grid) {
      AttackConfig c = base;
      c.algorithm = alg;
      c.epsilon = eps;
      sets[{alg, eps}] = attack_corpus(surface, eval, c);
    }
  }
  return curves_from_pair_sets(defenders, sets);
}

std::string format_number(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

void write_curves_csv(const std::filesystem::path& path, std::span<const RobustnessCurve> curves) {
  auto out = open_csv(path);
  out << "defender,algorithm,epsilon,accuracy,n_examples\n";
  for (const auto& c : curves) {
    for (const auto& [eps, acc] : c.points) {
      out << c.defender << ',' << to_string(c.algorithm) << ',' << format_number(eps) << ',' << format_number(acc)
          << ',' << c.n_examples << '\n';
    }
  }
  if (!out) throw Error("write failed for " + path.string());
}

void write_lnsr_csv(const std::filesystem::path& path, std::span<const LnsrRow> rows) {
  auto out = open_csv(path);
  out << "layer,arm,epsilon,lnsr_sum,lnsr_mean,n\n";
  for (const auto& r : rows) {
    out << r.layer << ',' << r.arm << ',' << format_number(r.epsilon) << ',' << format_number(r.lnsr_sum) << ','
        << format_number(r.lnsr_mean) << ',' << r.n << '\n';
  }
  if (!out) throw Error("write failed for " + path.string());
}

}  // namespace lab
