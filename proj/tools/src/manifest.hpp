#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

namespace tbm::cli {

std::string sha256_hex(const std::filesystem::path& file);

/// <root>/manifest.json: per stage, the config it ran with and every file it
/// wrote (path relative to root, SHA-256, size). Rerunning a stage replaces
/// its entry; other stages are kept.
class Manifest {
 public:
  explicit Manifest(std::filesystem::path root);

  void begin_stage(const std::string& stage, nlohmann::json config);
  void record(const std::filesystem::path& file);
  void write() const;

  const nlohmann::json& document() const { return doc_; }

 private:
  std::filesystem::path root_;
  std::string stage_;
  nlohmann::json doc_;
};

}  // namespace tbm::cli
