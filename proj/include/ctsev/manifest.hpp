#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace ctsev {

struct ManifestEntry {
  std::string subject_id;
  std::string file;  // relative to the manifest directory

  bool operator==(const ManifestEntry&) const = default;
};

/// JSON document (`manifest.json`) describing a dataset directory: one
/// volume file per subject plus the label CSV, with class counts.
struct Manifest {
  std::vector<ManifestEntry> volumes;
  std::string labels_file = "labels.csv";
  int n_cases = 0;
  int n_severe = 0;
  int n_positive = 0;

  /// Every file the dataset consists of: the volumes then the label CSV.
  std::vector<std::string> files() const;

  bool operator==(const Manifest&) const = default;
};

inline constexpr const char* kManifestName = "manifest.json";

std::string manifest_to_json(const Manifest& manifest);
Manifest manifest_from_json(const std::string& json_text);

/// Reads `<dir>/manifest.json`.
Manifest read_manifest(const std::filesystem::path& dir);
void write_manifest(const std::filesystem::path& dir, const Manifest& manifest);

}  // namespace ctsev
