#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "lab/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Adversarial-robustness lab for spectrogram anti-spoofing models"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out;
  std::uint64_t seed = 0;
  bool force = false;
  std::string arm = "all";

  const char* commands[][2] = {
      {"data", "generate the labeled and unlabeled corpora"},
      {"pretrain", "masked-prediction pre-training of the encoder"},
      {"train", "train classifier arms for both architectures"},
      {"attack", "craft FGSM/PGD pair sets on both Mel classifiers"},
      {"evaluate", "score every defender on the transferred pair sets (curves.csv)"},
      {"lnsr", "layerwise noise-to-signal ratios (lnsr.csv)"},
      {"all", "run every stage in order"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "JSON experiment config (defaults apply when omitted)");
    sub->add_option("--out", out, "output directory (overrides output_dir)");
    sub->add_option("--seed", seed, "global seed (overrides seed)");
    sub->add_flag("--force", force, "re-run invalid stages and accept a changed config");
    if (std::string(name) == "train") {
      sub->add_option("--arm", arm, "mel|median|mean|gaussian|mock|rand|scratch|all")->capture_default_str();
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  const auto* chosen = app.get_subcommands().front();
  lab::RunOptions options;
  options.force = force;
  options.arm = arm;
  if (chosen->count("--out")) options.out = out;
  if (chosen->count("--seed")) options.seed = seed;
  std::optional<std::filesystem::path> config;
  if (chosen->count("--config")) config = config_path;
  return lab::run_command(chosen->get_name(), config, options, std::cerr, std::cerr);
}
