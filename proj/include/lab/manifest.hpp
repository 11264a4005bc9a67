#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace lab {

struct StageRecord {
  bool done = false;
  // Paths relative to the run directory -> SHA-256 of content.
  std::map<std::string, std::string> artifacts;
  // Upstream artifacts this stage consumed, with the hashes seen at the time.
  std::map<std::string, std::string> inputs;
  nlohmann::json info = nlohmann::json::object();
};

enum class StageState { kPending, kDone, kStale };

// manifest.json in a run directory: config snapshot, config hash, and one
// record per stage.
class RunManifest {
 public:
  RunManifest(std::filesystem::path dir, nlohmann::json config, std::string config_hash);

  // Reads an existing manifest, or returns nullopt if there is none.
  static std::optional<RunManifest> load(const std::filesystem::path& dir);

  const std::filesystem::path& dir() const noexcept { return dir_; }
  const std::string& config_hash() const noexcept { return config_hash_; }
  const nlohmann::json& config() const noexcept { return config_; }

  // Done only if every recorded artifact exists and hashes to the recorded
  // value, and every recorded input still matches.
  StageState state(const std::string& stage) const;
  // First offending path of a stale stage (empty otherwise).
  std::string stale_reason(const std::string& stage) const;
  const StageRecord* record(const std::string& stage) const;

  // Hashes `artifacts` and `inputs` (relative paths) and marks the stage done.
  void complete(const std::string& stage, const std::vector<std::string>& artifacts,
                const std::vector<std::string>& inputs, nlohmann::json info = nlohmann::json::object());
  void reset(const std::string& stage);
  std::vector<std::string> stages() const;

  void save() const;

 private:
  std::filesystem::path dir_;
  nlohmann::json config_;
  std::string config_hash_;
  std::map<std::string, StageRecord> stages_;
};

// Exclusive advisory lock on `dir`/.lock for the lifetime of the object.
class DirectoryLock {
 public:
  explicit DirectoryLock(const std::filesystem::path& dir);
  ~DirectoryLock();
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;

 private:
  int fd_ = -1;
};

}  // namespace lab
