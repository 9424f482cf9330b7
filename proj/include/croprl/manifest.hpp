#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace croprl {

std::string sha256_file(const std::filesystem::path& path);

// Write-to-temp-then-rename so consumers never see partial files.
void atomic_write_file(const std::filesystem::path& path, const std::string& content);

// Provenance sidecar for every output bundle. Contains no timestamps so that
// reruns with the same seed are byte-identical.
struct Manifest {
  std::string command;
  std::vector<std::string> args;
  std::map<std::string, std::string> settings;       // seeds, scenario, paths...
  std::map<std::string, std::string> input_hashes;   // path -> sha256
  std::map<std::string, std::string> output_hashes;  // path -> sha256

  std::string to_json() const;
  void write(const std::filesystem::path& path) const;
};

}  // namespace croprl
