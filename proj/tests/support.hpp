#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "fsbench/digest.hpp"
#include "fsbench/harness.hpp"

namespace testing {

inline std::filesystem::path fixture_dir() { return FSBENCH_FIXTURE_DIR; }
inline std::filesystem::path golden_dir() { return FSBENCH_GOLDEN_DIR; }
inline std::filesystem::path cli_path() { return FSBENCH_CLI; }

// Scratch directory removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "fsbench") {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / (tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline fsbench::NewsArticle article(std::string id, const std::string& ts, std::string ticker, std::string headline,
                                    std::string body = "") {
  fsbench::NewsArticle a;
  a.id = std::move(id);
  a.timestamp = fsbench::parse_timestamp(ts);
  a.ticker = std::move(ticker);
  a.headline = std::move(headline);
  a.body = std::move(body);
  return a;
}

inline fsbench::Exemplar exemplar(std::string id, const std::string& ts, std::string excerpt, fsbench::Sentiment label,
                                  std::vector<std::string> rationale = {"Step one.", "Step two."}) {
  return {std::move(id), std::move(excerpt), std::move(rationale), label, fsbench::parse_timestamp(ts)};
}

// The bundled fixture config, writing into `out` instead of the source tree.
inline fsbench::ExperimentConfig fixture_config(const std::filesystem::path& out) {
  auto config = fsbench::load_config(fixture_dir() / "config.json");
  config.output_dir = out;
  return config;
}

inline std::string slurp(const std::filesystem::path& p) { return fsbench::read_file(p); }

}  // namespace testing
