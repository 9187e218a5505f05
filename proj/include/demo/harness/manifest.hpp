#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace demo::harness {

inline constexpr int kManifestFormatVersion = 1;

std::string sha1_hex(std::string_view bytes);
/// Same digest `git hash-object` prints: SHA-1 over "blob <size>\0" + bytes.
std::string git_blob_sha1(std::string_view bytes);
std::string git_blob_sha1_file(const std::filesystem::path& path);

/// Writes via a sibling temporary file and rename, so readers never see a
/// half-written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

struct ManifestEntry {
  std::string path;  ///< relative to the run directory
  std::string role;  ///< e.g. "checkpoint", "loss_csv", "metrics"
  std::string sha1;
  std::uint64_t bytes = 0;
};

/// Index of everything a pipeline stage wrote, with checksums.
struct RunManifest {
  std::string command;
  std::string preset;
  std::string config_hash;
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;
  std::vector<ManifestEntry> files;

  /// Hashes `rel` under `root` and records it.
  void add(const std::filesystem::path& root, const std::string& rel, const std::string& role);
  std::string json() const;
  static RunManifest from_json(std::string_view text);
  void write(const std::filesystem::path& path) const;
  static RunManifest read(const std::filesystem::path& path);
  /// Paths whose current checksum differs from the recorded one.
  std::vector<std::string> verify(const std::filesystem::path& root) const;
};

}  // namespace demo::harness
