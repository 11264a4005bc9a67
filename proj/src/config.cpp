#include "lab/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "lab/errors.hpp"
#include "lab/hash.hpp"
#include "lab/rng.hpp"

namespace lab {

namespace {

using nlohmann::json;

// Reads keys out of one JSON object, remembering which were consumed so that
// leftovers can be reported as unknown.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw UsageError("config: '" + name_ + "' must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw UsageError("config: '" + name_ + "." + key + "' has the wrong type");
    }
  }

  const json* sub(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw UsageError("config: unknown key '" + name_ + "." + key + "'");
    }
  }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

void read_train(const json* j, const char* name, TrainConfig& c, bool* epochs_given = nullptr) {
  if (!j) return;
  Section s(*j, name);
  if (epochs_given) *epochs_given = j->contains("epochs") && !j->at("epochs").is_null();
  s.get("epochs", c.epochs);
  s.get("batch_size", c.batch_size);
  s.get("lr", c.lr);
  s.get("momentum", c.momentum);
  s.finish();
}

json train_json(const TrainConfig& c) {
  return {{"epochs", c.epochs}, {"batch_size", c.batch_size}, {"lr", c.lr}, {"momentum", c.momentum}};
}

std::vector<std::string> algorithm_names(const std::vector<AttackAlgorithm>& algs) {
  std::vector<std::string> out;
  for (auto a : algs) out.push_back(to_string(a));
  return out;
}

}  // namespace

void ExperimentConfig::validate() const {
  corpus.validate();
  masking.validate();
  encoder.validate();
  classifier.validate();
  scratch.validate();
  if (encoder.bins != corpus.bins) {
    throw UsageError("config: encoder.bins (" + std::to_string(encoder.bins) + ") must equal corpus.bins (" +
                     std::to_string(corpus.bins) + ")");
  }
  if (encoder.stack_factor != masking.stack_factor) {
    throw UsageError("config: encoder.stack_factor must equal masking.stack_factor");
  }
  if (n_unlabeled == 0) throw UsageError("config: n_unlabeled must be positive");
  if (pretrain.batch_size == 0 || !(pretrain.lr > 0.0)) throw UsageError("config: invalid pretrain settings");
  if (filter_kernel == 0 || filter_kernel % 2 == 0) throw UsageError("config: filter_kernel must be odd");
  if (!(gaussian_sigma > 0.0)) throw UsageError("config: gaussian_sigma must be positive");
  if (attack.algorithms.empty()) throw UsageError("config: attack.algorithms is empty");
  if (attack.pgd_steps == 0) throw UsageError("config: attack.pgd_steps must be positive");
  for (double e : attack.epsilons) {
    if (!(e >= 0.0)) throw UsageError("config: attack epsilons must be non-negative");
  }
  for (double e : lnsr.epsilons) {
    if (!(e > 0.0)) throw UsageError("config: lnsr epsilons must be positive");
  }
}

std::uint64_t ExperimentConfig::stage_seed(std::string_view stage) const { return derive_seed(seed, stage); }

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  const json doc = j.is_null() ? json::object() : j;
  Section root(doc, "config");
  root.get("seed", c.seed);
  std::string out = c.output_dir.string();
  root.get("output_dir", out);
  c.output_dir = out;
  root.get("n_unlabeled", c.n_unlabeled);
  root.get("filter_kernel", c.filter_kernel);
  root.get("gaussian_sigma", c.gaussian_sigma);

  if (const json* p = root.sub("corpus")) {
    Section s(*p, "corpus");
    s.get("n_train", c.corpus.n_train);
    s.get("n_dev", c.corpus.n_dev);
    s.get("n_eval", c.corpus.n_eval);
    s.get("frames", c.corpus.frames);
    s.get("bins", c.corpus.bins);
    s.get("class_separation", c.corpus.class_separation);
    s.get("noise_level", c.corpus.noise_level);
    s.finish();
  }
  if (const json* p = root.sub("masking")) {
    Section s(*p, "masking");
    s.get("select_rate", c.masking.select_rate);
    s.get("zero_prob", c.masking.zero_prob);
    s.get("random_prob", c.masking.random_prob);
    s.get("keep_prob", c.masking.keep_prob);
    s.get("segment_length", c.masking.segment_length);
    s.get("per_segment_case", c.masking.per_segment_case);
    s.finish();
  }
  if (const json* p = root.sub("encoder")) {
    Section s(*p, "encoder");
    s.get("layers", c.encoder.layers);
    s.get("model_dim", c.encoder.model_dim);
    s.get("heads", c.encoder.heads);
    s.get("ff_dim", c.encoder.ff_dim);
    s.get("stack_factor", c.encoder.stack_factor);
    s.finish();
  }
  c.encoder.bins = c.corpus.bins;
  c.masking.stack_factor = c.encoder.stack_factor;
  if (const json* p = root.sub("pretrain")) {
    Section s(*p, "pretrain");
    s.get("epochs", c.pretrain.epochs);
    s.get("batch_size", c.pretrain.batch_size);
    s.get("lr", c.pretrain.lr);
    s.get("momentum", c.pretrain.momentum);
    std::string opt = c.pretrain.optimizer == OptimizerKind::kAdam ? "adam" : "sgd";
    s.get("optimizer", opt);
    if (opt == "adam") {
      c.pretrain.optimizer = OptimizerKind::kAdam;
    } else if (opt == "sgd") {
      c.pretrain.optimizer = OptimizerKind::kSgdMomentum;
    } else {
      throw UsageError("config: pretrain.optimizer must be 'adam' or 'sgd'");
    }
    s.get("clip_norm", c.pretrain.clip_norm);
    s.get("masked_only_loss", c.pretrain.masked_only_loss);
    s.finish();
  }
  read_train(root.sub("classifier"), "classifier", c.classifier);
  c.scratch = c.classifier;
  c.scratch.epochs = c.classifier.epochs + c.pretrain.epochs;
  bool scratch_epochs = false;
  read_train(root.sub("scratch"), "scratch", c.scratch, &scratch_epochs);
  if (!scratch_epochs) c.scratch.epochs = c.classifier.epochs + c.pretrain.epochs;

  if (const json* p = root.sub("attack")) {
    Section s(*p, "attack");
    std::vector<std::string> algs = algorithm_names(c.attack.algorithms);
    s.get("algorithms", algs);
    c.attack.algorithms.clear();
    for (const auto& a : algs) c.attack.algorithms.push_back(parse_attack_algorithm(a));
    s.get("epsilons", c.attack.epsilons);
    s.get("pgd_steps", c.attack.pgd_steps);
    double step = -1.0;
    s.get("pgd_step_size", step);
    if (step >= 0.0) c.attack.pgd_step_size = step;
    s.get("random_start", c.attack.random_start);
    s.finish();
  }
  if (const json* p = root.sub("lnsr")) {
    Section s(*p, "lnsr");
    s.get("epsilons", c.lnsr.epsilons);
    std::string alg = to_string(c.lnsr.algorithm);
    s.get("algorithm", alg);
    c.lnsr.algorithm = parse_attack_algorithm(alg);
    s.finish();
  }
  root.finish();
  c.validate();
  return c;
}

json to_json(const ExperimentConfig& c) {
  const auto& m = c.masking;
  const auto& p = c.pretrain;
  return {
      {"seed", c.seed},
      {"n_unlabeled", c.n_unlabeled},
      {"filter_kernel", c.filter_kernel},
      {"gaussian_sigma", c.gaussian_sigma},
      {"corpus",
       {{"n_train", c.corpus.n_train},
        {"n_dev", c.corpus.n_dev},
        {"n_eval", c.corpus.n_eval},
        {"frames", c.corpus.frames},
        {"bins", c.corpus.bins},
        {"class_separation", c.corpus.class_separation},
        {"noise_level", c.corpus.noise_level}}},
      {"masking",
       {{"select_rate", m.select_rate},
        {"zero_prob", m.zero_prob},
        {"random_prob", m.random_prob},
        {"keep_prob", m.keep_prob},
        {"segment_length", m.segment_length},
        {"per_segment_case", m.per_segment_case}}},
      {"encoder",
       {{"layers", c.encoder.layers},
        {"model_dim", c.encoder.model_dim},
        {"heads", c.encoder.heads},
        {"ff_dim", c.encoder.ff_dim},
        {"stack_factor", c.encoder.stack_factor}}},
      {"pretrain",
       {{"epochs", p.epochs},
        {"batch_size", p.batch_size},
        {"lr", p.lr},
        {"momentum", p.momentum},
        {"optimizer", p.optimizer == OptimizerKind::kAdam ? "adam" : "sgd"},
        {"clip_norm", p.clip_norm},
        {"masked_only_loss", p.masked_only_loss}}},
      {"classifier", train_json(c.classifier)},
      {"scratch", train_json(c.scratch)},
      {"attack",
       {{"algorithms", algorithm_names(c.attack.algorithms)},
        {"epsilons", c.attack.epsilons},
        {"pgd_steps", c.attack.pgd_steps},
        {"pgd_step_size", c.attack.pgd_step_size ? json(*c.attack.pgd_step_size) : json(nullptr)},
        {"random_start", c.attack.random_start}}},
      {"lnsr", {{"epsilons", c.lnsr.epsilons}, {"algorithm", to_string(c.lnsr.algorithm)}}},
  };
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("config: cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw UsageError("config: " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

std::string config_hash(const ExperimentConfig& c) { return sha256_hex(to_json(c).dump()); }

std::vector<double> epsilon_grid(const AttackSweep& sweep) {
  std::set<double> grid{0.0};
  grid.insert(sweep.epsilons.begin(), sweep.epsilons.end());
  return {grid.begin(), grid.end()};
}

}  // namespace lab
