#include "fixtures.hpp"

#include <atomic>
#include <fstream>
#include <sstream>

#include <unistd.h>

namespace labtest {

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = std::filesystem::temp_directory_path() /
          ("labtest-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

nlohmann::json tiny_config() {
  return nlohmann::json::parse(R"({
    "seed": 7,
    "corpus": {"n_train": 12, "n_dev": 6, "n_eval": 6, "frames": 16, "bins": 12},
    "n_unlabeled": 6,
    "encoder": {"layers": 1, "model_dim": 8, "heads": 2, "ff_dim": 8},
    "pretrain": {"epochs": 1, "batch_size": 4},
    "classifier": {"epochs": 1, "batch_size": 4},
    "scratch": {"epochs": 1, "batch_size": 4},
    "attack": {"algorithms": ["pgd"], "epsilons": [1.0], "pgd_steps": 2},
    "lnsr": {"epsilons": [1.0]}
  })");
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace labtest
