#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "lab/config.hpp"
#include "lab/manifest.hpp"

namespace lab {

struct RunOptions {
  std::optional<std::filesystem::path> out;  // overrides config.output_dir
  std::optional<std::uint64_t> seed;         // overrides config.seed
  bool force = false;
  std::string arm = "all";  // train only
};

// Stage runner over one output directory. Holds the directory lock while
// alive. Each stage is skipped when the manifest says it is done and its
// artifacts still hash-match.
class Harness {
 public:
  Harness(ExperimentConfig config, const RunOptions& options, std::ostream& log);

  void data();
  void pretrain();
  void train(const std::string& arm = "all");
  void attack();
  void evaluate();
  void lnsr();
  void all();

  const ExperimentConfig& config() const noexcept { return config_; }
  const RunManifest& manifest() const noexcept { return manifest_; }
  const std::filesystem::path& dir() const noexcept { return dir_; }
  // Stages that did work (were not skipped) in this process, in order.
  const std::vector<std::string>& executed() const noexcept { return executed_; }

 private:
  bool should_run(const std::string& stage);
  void require(const std::string& stage, const std::string& command) const;
  void finish(const std::string& stage, const std::vector<std::string>& artifacts,
              const std::vector<std::string>& inputs, nlohmann::json info = nlohmann::json::object());
  void train_arm(char letter, const std::string& arm);
  void write_suite_manifest();

  ExperimentConfig config_;
  std::filesystem::path dir_;
  bool force_;
  std::ostream& log_;
  DirectoryLock lock_;
  RunManifest manifest_;
  std::vector<std::string> executed_;
};

// Relative artifact paths inside a run directory.
namespace paths {
std::string corpus(const std::string& split);  // train | dev | eval | unlabeled
std::string encoder(const std::string& kind);  // pretrained | random
std::string classifier(char arch_letter, const std::string& arm);
std::string scratch_encoder(char arch_letter);
std::string pairs(char attacker_letter, AttackAlgorithm algorithm, double epsilon);
inline constexpr const char* kDefenders = "models/defenders.json";
inline constexpr const char* kCurves = "curves.csv";
inline constexpr const char* kLnsr = "lnsr.csv";
inline constexpr const char* kWhiteBox = "attacks/whitebox.csv";
inline constexpr const char* kReport = "report.json";
}  // namespace paths

// Entry point behind the CLI: runs `command` and maps failures to exit codes
// (0 ok, 1 usage/config, 2 missing upstream, 3 numerical failure).
int run_command(const std::string& command, const std::optional<std::filesystem::path>& config_path,
                const RunOptions& options, std::ostream& log, std::ostream& err);

}  // namespace lab
