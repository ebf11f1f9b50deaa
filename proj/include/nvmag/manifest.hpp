#pragma once

// Run manifest written next to every command output.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nvmag/io.hpp"

namespace nvmag {

inline constexpr const char* tool_version = "1.0.0";

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

struct FileDigest {
  std::string path;
  std::string sha256;
  std::uintmax_t bytes = 0;
};

struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  std::string config_path;
  std::uint64_t seed = 0;
  int threads = 1;
  std::vector<FileDigest> inputs;
  std::vector<FileDigest> outputs;
  json parameters = json::object();

  void add_input(const std::filesystem::path& path);
  void add_output(const std::filesystem::path& path);
  json to_json() const;
  // Writes dir/manifest.json.
  void write(const std::filesystem::path& dir) const;
};

RunManifest manifest_from_json(const json& j);

}  // namespace nvmag
