#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>

#include "ctsev/manifest.hpp"
#include "ctsev/volume_io.hpp"

namespace ctsev {

// Synthetic chest phantom HU levels. Lesions sit inside the lung window
// [-1350, 150] so windowing is exercised on every tissue except the air
// background edge.
namespace phantom_hu {
inline constexpr double kAir = -1024.0;
inline constexpr double kSoftTissue = 40.0;
inline constexpr double kLung = -800.0;
inline constexpr double kGroundGlass = -500.0;
inline constexpr double kVoxelNoise = 15.0;     // uniform +/- amplitude everywhere
inline constexpr double kLesionTexture = 300.0;  // extra +/- amplitude inside lesions
}  // namespace phantom_hu

struct PhantomSpec {
  Dims dims{64, 64, 48};
  int n_cases = 1;
  double severe_fraction = 0.15;
  double positive_fraction = 0.5;
  std::uint64_t seed = 0;
  std::string id_prefix = "case";

  int severe_count() const;
  int positive_count() const;

  /// Throws InvalidArgument on dims < 16, n_cases < 1, fractions outside
  /// [0, 1) or severe_fraction > positive_fraction.
  void validate() const;
};

struct PhantomCase {
  Volume volume;
  LabeledCase label;
  std::size_t lesion_voxels = 0;
};

/// Deterministic in (spec.seed, index). Labels come from a seeded
/// permutation of the indices so class counts are exact per spec.
PhantomCase generate_case(const PhantomSpec& spec, int index);

std::string phantom_subject_id(const PhantomSpec& spec, int index);

/// Writes one .mha per case, `labels.csv` and `manifest.json` into out_dir
/// (created if needed) and returns the manifest.
Manifest generate_dataset(const PhantomSpec& spec, const std::filesystem::path& out_dir);

}  // namespace ctsev
