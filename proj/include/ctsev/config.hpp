#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "ctsev/training.hpp"

namespace ctsev {

/// One JSON document drives every command; CLI flags override its fields.
///
/// Unset keys keep the TrainConfig::desk_scale() values.
/// Keys (all optional except `seed`):
///   data_dir, bundle_dir, test_dir          paths
///   seed                                    unsigned 64-bit; required
///   window {level, width}, n_slices, precrop_hw [h, w]
///   augment {set_id, crop_hw, brightness, contrast, saturation,
///            rotate_limit_deg, gamma_range [lo, hi], median_kernel, mixup_alpha}
///   encoders {A: {channels, input_mean, input_std}, B: {...}}
///   optimizer {lr, momentum, epochs, batch_size}
///   n_splits, val_fraction, tta_enabled
struct RunConfig {
  std::filesystem::path data_dir;
  std::filesystem::path bundle_dir;
  std::filesystem::path test_dir;
  std::optional<std::uint64_t> seed;
  TrainConfig train = TrainConfig::desk_scale();
  std::optional<bool> tta_enabled;  // unset: follows the augmentation set

  /// Copies the crop size into both encoder configs.
  void sync_encoders();
  bool effective_tta() const { return tta_enabled.value_or(train.augment.uses_tta()); }
};

RunConfig run_config_from_json(const std::string& json_text);
std::string run_config_to_json(const RunConfig& config);
RunConfig read_run_config(const std::filesystem::path& path);

}  // namespace ctsev
