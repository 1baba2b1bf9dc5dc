#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mp {

std::string sha256_hex(const void* data, std::size_t len);
std::string sha256_hex(const std::string& text);
std::string sha256_file(const std::string& path);

struct ManifestArtifact {
  std::string path;
  std::string sha256;
  std::uint64_t bytes = 0;
};

// One per command invocation. Every file a command reads or writes is listed
// with its content hash so a rerun can be byte-compared artifact by artifact.
struct RunManifest {
  std::string command;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<ManifestArtifact> inputs;
  std::vector<ManifestArtifact> outputs;
  double elapsed_seconds = 0.0;

  void add_input(const std::string& path);
  void add_output(const std::string& path);

  std::string to_json_text() const;
  static RunManifest from_json_text(const std::string& text);
  void write(const std::string& path) const;
  static RunManifest read(const std::string& path);
};

}  // namespace mp
