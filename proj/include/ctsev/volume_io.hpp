#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ctsev {

inline constexpr std::int16_t kMinHu = -1024;
inline constexpr std::int16_t kMaxHu = 3071;

struct Dims {
  int width = 0;
  int height = 0;
  int depth = 0;

  std::size_t voxels() const {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height) *
           static_cast<std::size_t>(depth);
  }
  bool operator==(const Dims&) const = default;
};

/// A CT scan: HU samples stored x-fastest, then y, then z (axial slices).
struct Volume {
  Dims dims;
  std::array<double, 3> spacing{1.0, 1.0, 1.0};
  std::vector<std::int16_t> hu;
  std::string subject_id;

  std::int16_t at(int x, int y, int z) const {
    return hu[(static_cast<std::size_t>(z) * dims.height + y) * dims.width + x];
  }

  /// Throws InvalidArgument unless dims, spacing and hu satisfy the Volume
  /// invariants (positive dims, finite positive spacing, in-range HU).
  void validate() const;

  bool operator==(const Volume&) const = default;
};

struct LabeledCase {
  std::string subject_id;
  bool severe = false;
  bool covid_positive = false;

  bool operator==(const LabeledCase&) const = default;
};

/// Parses an uncompressed MetaImage volume with a LOCAL payload.
///
/// Accepts MET_SHORT (little-endian unless ElementByteOrderMSB or
/// BinaryDataByteOrderMSB is True) and MET_UCHAR. HU values outside
/// [kMinHu, kMaxHu] are clamped; the number of clamped voxels is written to
/// `clamped` when given. Keys are case-sensitive; whitespace around `=` is
/// ignored. Never crashes on arbitrary input; every failure is an Error.
Volume parse_mha(std::span<const std::uint8_t> bytes,
                 std::string subject_id = {},
                 std::size_t* clamped = nullptr);

/// Canonical header in fixed key order followed by a little-endian
/// MET_SHORT payload.
std::vector<std::uint8_t> write_mha(const Volume& volume);

/// Label CSV with header `PatientID,probCOVID,probSevere` and 0/1 labels.
std::vector<LabeledCase> read_labels(std::string_view csv);
std::string write_labels(std::span<const LabeledCase> cases);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path,
                      std::span<const std::uint8_t> bytes);
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

/// Reads an .mha file; the subject id is the file stem.
Volume read_mha_file(const std::filesystem::path& path,
                     std::size_t* clamped = nullptr);
void write_mha_file(const std::filesystem::path& path, const Volume& volume);

}  // namespace ctsev
