#include "lab/manifest.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <fstream>

#include "lab/errors.hpp"
#include "lab/hash.hpp"

namespace lab {

namespace fs = std::filesystem;

namespace {

constexpr const char* kManifestName = "manifest.json";

nlohmann::json record_json(const StageRecord& r) {
  return {{"status", r.done ? "done" : "pending"}, {"artifacts", r.artifacts}, {"inputs", r.inputs}, {"info", r.info}};
}

StageRecord record_from_json(const nlohmann::json& j) {
  StageRecord r;
  r.done = j.value("status", "pending") == "done";
  r.artifacts = j.value("artifacts", std::map<std::string, std::string>{});
  r.inputs = j.value("inputs", std::map<std::string, std::string>{});
  r.info = j.value("info", nlohmann::json::object());
  return r;
}

std::string mismatch(const fs::path& dir, const std::map<std::string, std::string>& files) {
  for (const auto& [rel, hash] : files) {
    const fs::path p = dir / rel;
    if (!fs::exists(p)) return rel + " is missing";
    if (sha256_file(p) != hash) return rel + " was modified";
  }
  return {};
}

}  // namespace

RunManifest::RunManifest(fs::path dir, nlohmann::json config, std::string config_hash)
    : dir_(std::move(dir)), config_(std::move(config)), config_hash_(std::move(config_hash)) {}

std::optional<RunManifest> RunManifest::load(const fs::path& dir) {
  const fs::path path = dir / kManifestName;
  if (!fs::exists(path)) return std::nullopt;
  std::ifstream in(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("manifest: " + path.string() + ": " + e.what());
  }
  RunManifest m(dir, j.value("config", nlohmann::json::object()), j.value("config_hash", ""));
  const auto stages = j.value("stages", nlohmann::json::object());
  for (const auto& [name, rec] : stages.items()) {
    m.stages_[name] = record_from_json(rec);
  }
  return m;
}

StageState RunManifest::state(const std::string& stage) const {
  const auto it = stages_.find(stage);
  if (it == stages_.end() || !it->second.done) return StageState::kPending;
  return stale_reason(stage).empty() ? StageState::kDone : StageState::kStale;
}

std::string RunManifest::stale_reason(const std::string& stage) const {
  const auto it = stages_.find(stage);
  if (it == stages_.end() || !it->second.done) return {};
  if (auto why = mismatch(dir_, it->second.artifacts); !why.empty()) return why;
  if (auto why = mismatch(dir_, it->second.inputs); !why.empty()) return "input " + why;
  return {};
}

const StageRecord* RunManifest::record(const std::string& stage) const {
  const auto it = stages_.find(stage);
  return it == stages_.end() ? nullptr : &it->second;
}

void RunManifest::complete(const std::string& stage, const std::vector<std::string>& artifacts,
                           const std::vector<std::string>& inputs, nlohmann::json info) {
  StageRecord r;
  for (const auto& rel : artifacts) r.artifacts[rel] = sha256_file(dir_ / rel);
  for (const auto& rel : inputs) r.inputs[rel] = sha256_file(dir_ / rel);
  r.info = std::move(info);
  r.done = true;
  stages_[stage] = std::move(r);
}

void RunManifest::reset(const std::string& stage) { stages_.erase(stage); }

std::vector<std::string> RunManifest::stages() const {
  std::vector<std::string> out;
  for (const auto& [name, rec] : stages_) out.push_back(name);
  return out;
}

void RunManifest::save() const {
  nlohmann::json stages = nlohmann::json::object();
  for (const auto& [name, rec] : stages_) stages[name] = record_json(rec);
  const nlohmann::json j{{"config_hash", config_hash_}, {"config", config_}, {"stages", stages}};
  fs::create_directories(dir_);
  // Write-then-rename so an interrupted run never leaves a torn manifest.
  const fs::path tmp = dir_ / (std::string(kManifestName) + ".tmp");
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << j.dump(2) << '\n';
    if (!out) throw Error("manifest: cannot write " + tmp.string());
  }
  fs::rename(tmp, dir_ / kManifestName);
}

DirectoryLock::DirectoryLock(const fs::path& dir) {
  fs::create_directories(dir);
  const fs::path path = dir / ".lock";
  fd_ = ::open(path.c_str(), O_RDWR | O_CREAT, 0644);
  if (fd_ < 0) throw Error("cannot open lock file " + path.string());
  if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
    ::close(fd_);
    fd_ = -1;
    throw UsageError("output directory " + dir.string() + " is in use by another process");
  }
}

DirectoryLock::~DirectoryLock() {
  if (fd_ >= 0) {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
}

}  // namespace lab
