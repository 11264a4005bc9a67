#include "lab/harness.hpp"

#include <chrono>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include "lab/corpus.hpp"
#include "lab/defenses.hpp"
#include "lab/diagnostics.hpp"
#include "lab/errors.hpp"
#include "lab/rng.hpp"

namespace lab {

namespace fs = std::filesystem;

namespace paths {

std::string corpus(const std::string& split) { return "data/" + split + ".jsonl"; }
std::string encoder(const std::string& kind) { return "models/encoder_" + kind + ".ckpt"; }
std::string classifier(char arch, const std::string& arm) { return std::string("models/") + arch + "/" + arm + ".ckpt"; }
std::string scratch_encoder(char arch) { return std::string("models/") + arch + "/scratch_encoder.ckpt"; }
std::string pairs(char attacker, AttackAlgorithm algorithm, double epsilon) {
  return std::string("attacks/") + attacker + "/" + to_string(algorithm) + "_eps" + format_number(epsilon) + ".jsonl";
}

}  // namespace paths

namespace {

constexpr char kLetters[] = {'A', 'B'};
const std::vector<std::string> kTrainedArms{"mel", "mock", "rand", "scratch"};

Architecture arch_of(char letter) {
  return letter == 'A' ? Architecture::kMaxFeatureMap : Architecture::kSqueezeExcite;
}
char other(char letter) { return letter == 'A' ? 'B' : 'A'; }
std::string train_stage(char letter, const std::string& arm) { return std::string("train/") + letter + "/" + arm; }

RunManifest open_manifest(const fs::path& dir, const ExperimentConfig& config, bool force) {
  const auto snapshot = to_json(config);
  const auto hash = config_hash(config);
  auto existing = RunManifest::load(dir);
  if (existing && existing->config_hash() == hash) return std::move(*existing);
  if (existing && !force) {
    throw UsageError("config differs from the one recorded in " + (dir / "manifest.json").string() +
                     "; rerun with --force or use a fresh output directory");
  }
  RunManifest fresh(dir, snapshot, hash);
  fresh.save();
  return fresh;
}

class StageTimer {
 public:
  StageTimer(std::ostream& log, std::string stage) : log_(log), stage_(std::move(stage)) {
    log_ << "[" << stage_ << "] running" << std::endl;
  }
  ~StageTimer() {
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - start_;
    const auto flags = log_.flags();
    const auto precision = log_.precision();
    log_ << "[" << stage_ << "] finished in " << std::fixed << std::setprecision(1) << dt.count() << "s" << std::endl;
    log_.flags(flags);
    log_.precision(precision);
  }

 private:
  std::ostream& log_;
  std::string stage_;
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::vector<AdversarialPair> clean_pairs(std::span<const LabeledExample> eval, const std::string& source) {
  std::vector<AdversarialPair> out;
  out.reserve(eval.size());
  for (const auto& ex : eval) out.push_back(make_pair(ex, Tensor(ex.spec.values().shape(), 0.0), source));
  return out;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  out << j.dump(2) << '\n';
  if (!out) throw Error("cannot write " + path.string());
}

}  // namespace

Harness::Harness(ExperimentConfig config, const RunOptions& options, std::ostream& log)
    : config_([&] {
        if (options.out) config.output_dir = *options.out;
        if (options.seed) config.seed = *options.seed;
        config.validate();
        return std::move(config);
      }()),
      dir_(config_.output_dir),
      force_(options.force),
      log_(log),
      lock_(dir_),
      manifest_(open_manifest(dir_, config_, force_)) {}

bool Harness::should_run(const std::string& stage) {
  switch (manifest_.state(stage)) {
    case StageState::kDone:
      log_ << "[" << stage << "] up to date" << std::endl;
      return false;
    case StageState::kStale:
      if (!force_) {
        throw UsageError("stage '" + stage + "' is invalid (" + manifest_.stale_reason(stage) +
                         "); rerun with --force");
      }
      return true;
    case StageState::kPending:
      return true;
  }
  return true;
}

void Harness::require(const std::string& stage, const std::string& command) const {
  const auto state = manifest_.state(stage);
  if (state == StageState::kDone) return;
  const std::string why = state == StageState::kStale ? " is invalid (" + manifest_.stale_reason(stage) + ")"
                                                      : " has not been run";
  throw MissingUpstreamError("upstream stage '" + stage + "'" + why + "; run `lab " + command + "` first", command);
}

void Harness::finish(const std::string& stage, const std::vector<std::string>& artifacts,
                     const std::vector<std::string>& inputs, nlohmann::json info) {
  manifest_.complete(stage, artifacts, inputs, std::move(info));
  manifest_.save();
  executed_.push_back(stage);
}

void Harness::data() {
  if (!should_run("data")) return;
  StageTimer timer(log_, "data");
  CorpusSpec spec = config_.corpus;
  spec.seed = config_.stage_seed("data");
  const auto corpus = generate_labeled_corpus(spec);
  save_corpus(corpus.train, dir_ / paths::corpus("train"));
  save_corpus(corpus.dev, dir_ / paths::corpus("dev"));
  save_corpus(corpus.eval, dir_ / paths::corpus("eval"));
  save_unlabeled(generate_unlabeled_corpus(config_.n_unlabeled, config_.stage_seed("unlabeled"), spec),
                 dir_ / paths::corpus("unlabeled"));
  finish("data",
         {paths::corpus("train"), paths::corpus("dev"), paths::corpus("eval"), paths::corpus("unlabeled")}, {});
}

void Harness::pretrain() {
  require("data", "data");
  if (!should_run("pretrain")) return;
  StageTimer timer(log_, "pretrain");
  const auto unlabeled = load_unlabeled(dir_ / paths::corpus("unlabeled"), config_.corpus.bins);
  PretrainConfig pc = config_.pretrain;
  pc.seed = config_.stage_seed("pretrain");
  auto init = random_init_encoder(config_.encoder, config_.stage_seed("init/encoder"));
  auto result = lab::pretrain(std::move(init), unlabeled, config_.masking, pc);
  for (std::size_t e = 0; e < result.loss_history.size(); ++e) {
    log_ << "[pretrain] epoch " << e + 1 << " loss " << result.loss_history[e] << std::endl;
  }
  save_encoder(dir_ / paths::encoder("pretrained"), result.model, {pc.seed, "pretrained"});
  const std::uint64_t rand_seed = config_.stage_seed("init/rand-encoder");
  save_encoder(dir_ / paths::encoder("random"), random_init_encoder(config_.encoder, rand_seed), {rand_seed, "random"});
  finish("pretrain", {paths::encoder("pretrained"), paths::encoder("random")}, {paths::corpus("unlabeled")},
         {{"loss_history", result.loss_history}});
}

void Harness::train_arm(char letter, const std::string& arm) {
  require("data", "data");
  if (arm == "mock" || arm == "rand") require("pretrain", "pretrain");
  const std::string stage = train_stage(letter, arm);
  if (!should_run(stage)) return;
  StageTimer timer(log_, stage);
  const auto train = load_corpus(dir_ / paths::corpus("train"), config_.corpus.bins);
  const auto dev = load_corpus(dir_ / paths::corpus("dev"), config_.corpus.bins);
  const Architecture arch = arch_of(letter);
  const std::string key = std::string(1, letter) + "/" + arm;
  const InputGeometry raw{config_.corpus.frames, config_.corpus.bins};
  const InputGeometry feat = feature_geometry(config_.encoder, config_.corpus.frames);
  const std::uint64_t init_seed = config_.stage_seed("init/" + key);
  TrainConfig tc = arm == "scratch" ? config_.scratch : config_.classifier;
  tc.seed = config_.stage_seed("train/" + key);

  std::vector<std::string> artifacts{paths::classifier(letter, arm)};
  std::vector<std::string> inputs{paths::corpus("train"), paths::corpus("dev")};
  TrainHistory history;
  if (arm == "mel") {
    auto model = build_classifier(arch, InputMode::kRawSpectrogram, init_seed, raw);
    history = train_mel_classifier(model, train, dev, tc);
    save_classifier(dir_ / artifacts[0], model);
  } else if (arm == "mock" || arm == "rand") {
    const std::string enc = paths::encoder(arm == "mock" ? "pretrained" : "random");
    inputs.push_back(enc);
    const auto encoder = load_encoder(dir_ / enc, &config_.encoder);
    auto model = build_classifier(arch, InputMode::kEncoderFeatures, init_seed, feat);
    history = train_feature_classifier(model, encoder, train, dev, tc);
    save_classifier(dir_ / artifacts[0], model, {{"encoder", enc}});
  } else {
    auto encoder = random_init_encoder(config_.encoder, config_.stage_seed("init/" + key + "-encoder"));
    auto model = build_classifier(arch, InputMode::kEncoderFeatures, init_seed, feat);
    history = train_cascade_jointly(encoder, model, train, dev, tc);
    artifacts.push_back(paths::scratch_encoder(letter));
    save_encoder(dir_ / artifacts[1], encoder, {config_.stage_seed("init/" + key + "-encoder"), "scratch"});
    save_classifier(dir_ / artifacts[0], model, {{"encoder", artifacts[1]}});
  }
  if (!history.dev_accuracy.empty()) {
    log_ << "[" << stage << "] final train loss " << history.train_loss.back() << ", dev accuracy "
         << history.dev_accuracy.back() << std::endl;
  }
  finish(stage, artifacts, inputs,
         {{"epochs", tc.epochs}, {"train_loss", history.train_loss}, {"dev_accuracy", history.dev_accuracy}});
}

void Harness::write_suite_manifest() {
  std::vector<std::string> inputs;
  for (char letter : kLetters) {
    for (const auto& arm : kTrainedArms) {
      if (manifest_.state(train_stage(letter, arm)) != StageState::kDone) return;
      inputs.push_back(paths::classifier(letter, arm));
    }
  }
  if (!should_run("train")) return;
  nlohmann::json suites = nlohmann::json::object();
  for (char letter : kLetters) {
    std::vector<std::pair<std::string, SuiteEntry>> entries;
    const std::string mel = paths::classifier(letter, "mel");
    for (const auto& arm : defender_arm_names()) {
      SuiteEntry e;
      if (arm == "mel") {
        e = {FrontEndKind::kIdentity, std::nullopt, std::nullopt, mel};
      } else if (is_filter_arm(arm)) {
        e = {FrontEndKind::kFilter, std::nullopt, filter_for_arm(arm, config_.filter_kernel, config_.gaussian_sigma),
             mel};
      } else {
        const std::string enc = arm == "mock"   ? paths::encoder("pretrained")
                                : arm == "rand" ? paths::encoder("random")
                                                : paths::scratch_encoder(letter);
        e = {FrontEndKind::kEncoder, enc, std::nullopt, paths::classifier(letter, arm)};
      }
      entries.emplace_back(arm, std::move(e));
    }
    suites[std::string(1, letter)] = suite_manifest_json(entries);
  }
  write_json(dir_ / paths::kDefenders, suites);
  finish("train", {paths::kDefenders}, inputs);
}

void Harness::train(const std::string& arm) {
  std::vector<std::string> arms;
  if (arm == "all") {
    arms = kTrainedArms;
  } else if (arm == "mel" || is_filter_arm(arm)) {
    arms = {"mel"};  // filter arms reuse the Mel classifier
  } else if (arm == "mock" || arm == "rand" || arm == "scratch") {
    arms = {arm};
  } else {
    throw UsageError("unknown arm '" + arm + "'");
  }
  for (char letter : kLetters) {
    for (const auto& a : arms) train_arm(letter, a);
  }
  write_suite_manifest();
}

void Harness::attack() {
  require("data", "data");
  for (char letter : kLetters) require(train_stage(letter, "mel"), "train");
  if (!should_run("attack")) return;
  StageTimer timer(log_, "attack");
  const auto eval = load_corpus(dir_ / paths::corpus("eval"), config_.corpus.bins);
  std::vector<std::string> artifacts{paths::kWhiteBox};
  std::ostringstream whitebox;
  whitebox << "attacker,algorithm,epsilon,accuracy,n_examples\n";
  for (char letter : kLetters) {
    const Architecture arch = arch_of(letter);
    const InputMode mode = InputMode::kRawSpectrogram;
    const auto model = load_classifier(dir_ / paths::classifier(letter, "mel"), &arch, &mode);
    const ClassifierSurface surface(model, std::string(1, letter) + "-mel");
    const auto self = Defender::identity(std::make_shared<const ClassifierModel>(model));
    whitebox << letter << "-mel,none,0," << format_number(accuracy(self, eval)) << ',' << eval.size() << '\n';
    for (const auto alg : config_.attack.algorithms) {
      for (double eps : config_.attack.epsilons) {
        if (eps == 0.0) continue;
        AttackConfig ac;
        ac.algorithm = alg;
        ac.epsilon = eps;
        ac.steps = config_.attack.pgd_steps;
        ac.step_size = config_.attack.pgd_step_size;
        ac.random_start = config_.attack.random_start;
        ac.seed = config_.stage_seed("attack/" + std::string(1, letter) + "/" + to_string(alg) + "/" +
                                     format_number(eps));
        const auto pairs = attack_corpus(surface, eval, ac);
        const std::string rel = paths::pairs(letter, alg, eps);
        save_pairs(dir_ / rel, pairs, {alg, eps});
        artifacts.push_back(rel);
        const double acc = adversarial_accuracy(self, pairs);
        whitebox << letter << "-mel," << to_string(alg) << ',' << format_number(eps) << ',' << format_number(acc)
                 << ',' << pairs.size() << '\n';
        log_ << "[attack] " << letter << " " << to_string(alg) << " eps " << eps << ": white-box accuracy " << acc
             << std::endl;
      }
    }
  }
  {
    std::ofstream out(dir_ / paths::kWhiteBox, std::ios::trunc);
    out << whitebox.str();
    if (!out) throw Error("cannot write whitebox report");
  }
  finish("attack", artifacts,
         {paths::corpus("eval"), paths::classifier('A', "mel"), paths::classifier('B', "mel")});
}

void Harness::evaluate() {
  require("attack", "attack");
  require("train", "train");
  if (!should_run("evaluate")) return;
  StageTimer timer(log_, "evaluate");
  const auto eval = load_corpus(dir_ / paths::corpus("eval"), config_.corpus.bins);
  nlohmann::json suites;
  {
    std::ifstream in(dir_ / paths::kDefenders);
    suites = nlohmann::json::parse(in);
  }
  const auto grid = epsilon_grid(config_.attack);
  std::vector<RobustnessCurve> curves;
  nlohmann::json clean = nlohmann::json::object();
  // Targets of architecture X are attacked with pairs crafted on the other
  // architecture's Mel classifier.
  for (char target : kLetters) {
    const char attacker = other(target);
    const auto suite = load_defender_suite(suites.at(std::string(1, target)), arch_of(target), dir_);
    std::vector<RobustnessCurve> block;
    for (const auto alg : config_.attack.algorithms) {
      for (const auto& arm : suite.arms) {
        block.push_back({std::string(1, target) + "-" + arm.name, alg, {}, eval.size()});
      }
    }
    for (double eps : grid) {
      // Pair sets are loaded one at a time and shared by every defender.
      std::map<AttackAlgorithm, std::vector<AdversarialPair>> sets;
      if (eps == 0.0) {
        auto zero = clean_pairs(eval, std::string(1, attacker) + "-mel");
        for (const auto alg : config_.attack.algorithms) sets[alg] = zero;
      } else {
        for (const auto alg : config_.attack.algorithms) sets[alg] = load_pairs(dir_ / paths::pairs(attacker, alg, eps));
      }
      std::size_t k = 0;
      for (const auto alg : config_.attack.algorithms) {
        for (const auto& arm : suite.arms) {
          const double acc = adversarial_accuracy(arm.defender, sets.at(alg));
          block[k++].points.emplace_back(eps, acc);
          if (eps == 0.0) clean[std::string(1, target) + "-" + arm.name] = acc;
        }
      }
    }
    curves.insert(curves.end(), block.begin(), block.end());
  }
  write_curves_csv(dir_ / paths::kCurves, curves);
  const nlohmann::json report{
      {"clean_accuracy", clean},
      {"scratch_budget",
       {{"scratch_epochs", config_.scratch.epochs},
        {"classifier_epochs", config_.classifier.epochs},
        {"pretrain_epochs", config_.pretrain.epochs}}},
      {"transfer", {{"A", "attacked with pairs crafted on B-mel"}, {"B", "attacked with pairs crafted on A-mel"}}}};
  write_json(dir_ / paths::kReport, report);
  std::vector<std::string> inputs{paths::kDefenders, paths::corpus("eval")};
  for (const auto& rel : manifest_.record("attack")->artifacts) inputs.push_back(rel.first);
  finish("evaluate", {paths::kCurves, paths::kReport}, inputs);
}

void Harness::lnsr() {
  require("pretrain", "pretrain");
  require("attack", "attack");
  if (!should_run("lnsr")) return;
  StageTimer timer(log_, "lnsr");
  const auto mock = load_encoder(dir_ / paths::encoder("pretrained"), &config_.encoder);
  const auto rand = load_encoder(dir_ / paths::encoder("random"), &config_.encoder);
  std::vector<std::string> inputs{paths::encoder("pretrained"), paths::encoder("random")};
  std::map<double, std::vector<AdversarialPair>> by_eps;
  for (double eps : config_.lnsr.epsilons) {
    auto& pooled = by_eps[eps];
    for (char letter : kLetters) {
      const std::string rel = paths::pairs(letter, config_.lnsr.algorithm, eps);
      if (!fs::exists(dir_ / rel)) {
        throw MissingUpstreamError("lnsr: pair file " + rel + " not found; the attack sweep must cover it", "attack");
      }
      auto pairs = load_pairs(dir_ / rel);
      pooled.insert(pooled.end(), std::make_move_iterator(pairs.begin()), std::make_move_iterator(pairs.end()));
      inputs.push_back(rel);
    }
  }
  const auto rows = lnsr_comparison(mock, rand, by_eps);
  write_lnsr_csv(dir_ / paths::kLnsr, rows);
  finish("lnsr", {paths::kLnsr}, inputs);
}

void Harness::all() {
  data();
  pretrain();
  train("all");
  attack();
  evaluate();
  lnsr();
}

int run_command(const std::string& command, const std::optional<fs::path>& config_path, const RunOptions& options,
                std::ostream& log, std::ostream& err) {
  try {
    const ExperimentConfig config = config_path ? load_config(*config_path) : config_from_json(nlohmann::json::object());
    Harness h(config, options, log);
    if (command == "data") {
      h.data();
    } else if (command == "pretrain") {
      h.pretrain();
    } else if (command == "train") {
      h.train(options.arm);
    } else if (command == "attack") {
      h.attack();
    } else if (command == "evaluate") {
      h.evaluate();
    } else if (command == "lnsr") {
      h.lnsr();
    } else if (command == "all") {
      h.all();
    } else {
      throw UsageError("unknown command '" + command + "'");
    }
    return 0;
  } catch (const MissingUpstreamError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace lab
