#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

namespace labtest {

// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }

 private:
  std::filesystem::path path_;
};

// Seconds-scale experiment: 16x12 spectrograms, one-layer encoder, one epoch
// per stage, a single PGD epsilon.
nlohmann::json tiny_config();

std::string read_file(const std::filesystem::path& path);

}  // namespace labtest
