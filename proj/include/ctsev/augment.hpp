#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "ctsev/preprocess.hpp"
#include "ctsev/rng.hpp"

namespace ctsev {

/// The four cumulative augmentation recipes compared in the ablation.
enum class AugSet { Default, DefaultStrong, DefaultStrongMixup, DefaultStrongMixupTTA };

std::string_view to_string(AugSet set);
AugSet aug_set_from_string(std::string_view name);
inline constexpr std::array<AugSet, 4> kAllAugSets{
    AugSet::Default, AugSet::DefaultStrong, AugSet::DefaultStrongMixup,
    AugSet::DefaultStrongMixupTTA};

struct AugConfig {
  Hw crop_hw{224, 224};
  double brightness = 0.5;
  double contrast = 0.5;
  double saturation = 0.4;  // drawn but inert on single-channel slices
  double rotate_limit_deg = 30.0;
  double gamma_min = 0.8;
  double gamma_max = 1.25;
  int median_kernel = 3;
  double mixup_alpha = 0.8;
  AugSet set_id = AugSet::DefaultStrongMixup;

  bool uses_strong() const { return set_id != AugSet::Default; }
  bool uses_mixup() const {
    return set_id == AugSet::DefaultStrongMixup || set_id == AugSet::DefaultStrongMixupTTA;
  }
  bool uses_tta() const { return set_id == AugSet::DefaultStrongMixupTTA; }

  void validate() const;
};

/// Geometric primitives. All of them keep n_slices and map [0,1] into [0,1].
SliceStack crop_stack(const SliceStack& stack, int top, int left, Hw out);
SliceStack center_crop(const SliceStack& stack, Hw out);
SliceStack flip_horizontal(const SliceStack& stack);
/// Rotation about the slice center, bilinear, zero-filled border, same
/// dims. Angle 0 returns the input unchanged.
SliceStack rotate_stack(const SliceStack& stack, double angle_deg);
/// Median filter with a zero-padded kernel x kernel window.
SliceStack median_blur(const SliceStack& stack, int kernel);

/// Parameters of the default set, drawn once per volume.
struct DefaultParams {
  bool flip = false;
  int crop_top = 0;
  int crop_left = 0;
  double gamma = 1.0;
  double brightness = 1.0;
  double contrast = 1.0;
  double saturation = 1.0;
};

DefaultParams draw_default_params(const AugConfig& cfg, Hw source, Rng& rng);
/// crop -> flip -> gamma -> brightness (scale) -> contrast (toward the slice
/// mean) -> clamp to [0,1].
SliceStack apply_default_params(const SliceStack& stack, const AugConfig& cfg,
                                const DefaultParams& params);
SliceStack apply_default(const SliceStack& stack, const AugConfig& cfg, Rng& rng);

struct StrongParams {
  bool rotate = false;
  double angle_deg = 0.0;
  bool blur = false;
};

StrongParams draw_strong_params(const AugConfig& cfg, Rng& rng);
/// Only the rotation and median blur stages.
SliceStack apply_strong_params(const SliceStack& stack, const AugConfig& cfg,
                               const StrongParams& params);
/// Strong stages with probability 0.5 each, followed by the default set.
SliceStack apply_strong(const SliceStack& stack, const AugConfig& cfg, Rng& rng);

/// Training-time augmentation for the configured set (mixup excluded).
SliceStack augment_for_training(const SliceStack& stack, const AugConfig& cfg, Rng& rng);

struct LabelPair {
  double severe = 0.0;
  double covid = 0.0;

  bool operator==(const LabelPair&) const = default;
};

struct MixupResult {
  SliceStack stack;
  LabelPair labels;
  double lambda = 1.0;
};

MixupResult mixup_with_lambda(const SliceStack& a, LabelPair ya, const SliceStack& b,
                              LabelPair yb, double lambda);
/// lambda ~ Beta(alpha, alpha).
MixupResult mixup_pair(const SliceStack& a, LabelPair ya, const SliceStack& b, LabelPair yb,
                       double alpha, Rng& rng);

enum class TtaView { CenterCrop, CornerTL, CornerTR, CornerBL, CornerBR, RotNeg5, RotPos5, RotPos10 };
inline constexpr std::array<TtaView, 8> kTtaViews{
    TtaView::CenterCrop, TtaView::CornerTL, TtaView::CornerTR, TtaView::CornerBL,
    TtaView::CornerBR,   TtaView::RotNeg5,  TtaView::RotPos5,  TtaView::RotPos10};

SliceStack tta_view(const SliceStack& stack, TtaView view, Hw crop_hw);
/// The eight views in kTtaViews order; rotations happen before the center
/// crop, at the source resolution.
std::vector<SliceStack> tta_views(const SliceStack& stack, Hw crop_hw);

}  // namespace ctsev
