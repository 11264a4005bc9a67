#include "lab/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "lab/errors.hpp"
#include "lab/loss.hpp"
#include "lab/parallel.hpp"
#include "lab/rng.hpp"

namespace lab {

std::string to_string(AttackAlgorithm a) { return a == AttackAlgorithm::kFgsm ? "fgsm" : "pgd"; }

AttackAlgorithm parse_attack_algorithm(const std::string& s) {
  if (s == "fgsm") return AttackAlgorithm::kFgsm;
  if (s == "pgd") return AttackAlgorithm::kPgd;
  throw UsageError("unknown attack algorithm '" + s + "'");
}

void AttackConfig::validate() const {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw UsageError("attack: epsilon must be a finite value >= 0");
  if (algorithm == AttackAlgorithm::kFgsm) return;
  if (steps == 0) throw UsageError("attack: PGD needs at least one step");
  const double alpha = resolved_step_size();
  if (epsilon > 0.0 && !(alpha > 0.0)) throw UsageError("attack: PGD step size must be positive");
  if (alpha > epsilon) std::cerr << "warning: PGD step size " << alpha << " exceeds epsilon " << epsilon << '\n';
}

ClassifierSurface::ClassifierSurface(const ClassifierModel& model, std::string id) : frozen_(model), id_(std::move(id)) {
  if (model.input_mode() != InputMode::kRawSpectrogram) {
    throw UsageError("attack: model '" + id_ + "' consumes encoder features and has no spectrogram input path");
  }
}

Tensor input_gradient(const AttackSurface& model, const Tensor& x, int label) {
  const Var input = Var::leaf(x, true);
  backward(cross_entropy(model.logits(input), label));
  return input.grad().is_null() ? Tensor(x.shape(), 0.0) : input.grad();
}

double loss_at(const AttackSurface& model, const Tensor& x, int label) {
  return cross_entropy(model.logits(Var::leaf(x)), label).value().item();
}

Tensor project_linf(const Tensor& candidate, const Tensor& center, double epsilon) {
  if (candidate.shape() != center.shape()) {
    throw ShapeError("project_linf: " + shape_str(candidate.shape()) + " vs " + shape_str(center.shape()));
  }
  Tensor out = candidate;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::clamp(out[i], center[i] - epsilon, center[i] + epsilon);
  return out;
}

AdversarialPair make_pair(const LabeledExample& example, Tensor delta, std::string source_model_id) {
  if (delta.shape() != example.spec.values().shape()) {
    throw ShapeError("adversarial pair: delta " + shape_str(delta.shape()) + " vs spectrogram " +
                     shape_str(example.spec.values().shape()));
  }
  Tensor adv = example.spec.values();
  for (std::size_t i = 0; i < adv.numel(); ++i) adv[i] += delta[i];
  return {example.spec, Spectrogram(std::move(delta)), Spectrogram(std::move(adv)), example.label,
          std::move(source_model_id)};
}

namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

AdversarialPair fgsm(const AttackSurface& model, const LabeledExample& example, double epsilon) {
  if (!(epsilon >= 0.0)) throw UsageError("fgsm: epsilon must be >= 0");
  const Tensor& x = example.spec.values();
  Tensor delta(x.shape(), 0.0);
  if (epsilon > 0.0) {
    const Tensor g = input_gradient(model, x, example.label);
    for (std::size_t i = 0; i < delta.numel(); ++i) delta[i] = epsilon * sign(g[i]);
  }
  return make_pair(example, std::move(delta), model.id());
}

AdversarialPair pgd(const AttackSurface& model, const LabeledExample& example, const AttackConfig& config) {
  const double eps = config.epsilon;
  const double alpha = config.resolved_step_size();
  const Tensor& x = example.spec.values();
  Tensor delta(x.shape(), 0.0);
  if (eps == 0.0) return make_pair(example, std::move(delta), model.id());
  if (config.random_start) {
    Rng rng(config.seed);
    for (double& d : delta.data()) d = rng.uniform(-eps, eps);
  }
  Tensor point = x;
  for (std::size_t step = 0; step < config.steps; ++step) {
    for (std::size_t i = 0; i < point.numel(); ++i) point[i] = x[i] + delta[i];
    const Tensor g = input_gradient(model, point, example.label);
    for (std::size_t i = 0; i < delta.numel(); ++i) delta[i] = std::clamp(delta[i] + alpha * sign(g[i]), -eps, eps);
  }
  return make_pair(example, std::move(delta), model.id());
}

AdversarialPair run_attack(const AttackSurface& model, const LabeledExample& example, const AttackConfig& config) {
  return config.algorithm == AttackAlgorithm::kFgsm ? fgsm(model, example, config.epsilon) : pgd(model, example, config);
}

std::vector<AdversarialPair> attack_corpus(const AttackSurface& model, std::span<const LabeledExample> examples,
                                           const AttackConfig& config) {
  if (examples.empty()) throw UsageError("attack_corpus: no examples");
  config.validate();
  std::vector<AdversarialPair> pairs(examples.size());
  parallel_for(examples.size(), [&](std::size_t i) {
    AttackConfig local = config;
    local.seed = derive_seed(config.seed, static_cast<std::uint64_t>(i));
    try {
      pairs[i] = run_attack(model, examples[i], local);
    } catch (const std::exception& e) {
      throw Error("attack_corpus: example " + std::to_string(i) + ": " + e.what());
    }
  });
  return pairs;
}

void save_pairs(const std::filesystem::path& path, std::span<const AdversarialPair> pairs, const PairSetInfo& info) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("pairs: cannot write " + path.string());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    std::vector<double> delta(p.delta.data().begin(), p.delta.data().end());
    for (double& d : delta) d = std::trunc(d / kDeltaResolution) * kDeltaResolution;
    nlohmann::json rec{{"index", i},
                       {"label", p.label},
                       {"source-model-id", p.source_model_id},
                       {"epsilon", info.epsilon},
                       {"algorithm", to_string(info.algorithm)},
                       {"shape", {p.original.frames(), p.original.bins()}},
                       {"original", p.original.values().storage()},
                       {"delta", delta}};
    out << rec.dump() << '\n';
  }
  if (!out) throw Error("pairs: write failed for " + path.string());
}

std::vector<AdversarialPair> load_pairs(const std::filesystem::path& path, PairSetInfo* info) {
  std::ifstream in(path);
  if (!in) throw Error("pairs: cannot open " + path.string());
  std::vector<AdversarialPair> pairs;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto rec = nlohmann::json::parse(text);
      const auto frames = rec.at("shape").at(0).get<std::size_t>();
      const auto bins = rec.at("shape").at(1).get<std::size_t>();
      LabeledExample ex{Spectrogram(Tensor(Shape{frames, bins}, rec.at("original").get<std::vector<double>>())),
                        rec.at("label").get<int>()};
      Tensor delta(Shape{frames, bins}, rec.at("delta").get<std::vector<double>>());
      pairs.push_back(make_pair(ex, std::move(delta), rec.at("source-model-id").get<std::string>()));
      if (info) {
        info->epsilon = rec.at("epsilon").get<double>();
        info->algorithm = parse_attack_algorithm(rec.at("algorithm").get<std::string>());
      }
    } catch (const std::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(line) + ": " + e.what());
    }
  }
  return pairs;
}

}  // namespace lab
