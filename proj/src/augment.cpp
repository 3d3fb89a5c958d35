#include "ctsev/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ctsev/error.hpp"

namespace ctsev {

std::string_view to_string(AugSet set) {
  switch (set) {
    case AugSet::Default: return "Default";
    case AugSet::DefaultStrong: return "DefaultStrong";
    case AugSet::DefaultStrongMixup: return "DefaultStrongMixup";
    case AugSet::DefaultStrongMixupTTA: return "DefaultStrongMixupTTA";
  }
  return "Default";
}

AugSet aug_set_from_string(std::string_view name) {
  for (AugSet set : kAllAugSets) {
    if (to_string(set) == name) return set;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown augmentation set '" + std::string(name) + "'");
}

void AugConfig::validate() const {
  if (crop_hw.height < 1 || crop_hw.width < 1) {
    throw Error(ErrorCode::InvalidArgument, "crop dims must be positive");
  }
  if (!(mixup_alpha > 0.0)) throw Error(ErrorCode::InvalidArgument, "mixup_alpha must be > 0");
  if (median_kernel < 3 || median_kernel % 2 == 0) {
    throw Error(ErrorCode::InvalidArgument, "median_kernel must be odd and >= 3");
  }
  if (!(gamma_min > 0.0) || gamma_max < gamma_min) {
    throw Error(ErrorCode::InvalidArgument, "gamma range must be positive and ordered");
  }
  if (brightness < 0.0 || brightness >= 1.0 || contrast < 0.0 || contrast >= 1.0 ||
      saturation < 0.0 || saturation >= 1.0) {
    throw Error(ErrorCode::InvalidArgument, "jitter strengths must lie in [0, 1)");
  }
}

namespace {

void require_fits(const SliceStack& stack, Hw crop) {
  if (crop.height > stack.height || crop.width > stack.width) {
    throw Error(ErrorCode::CropTooLarge,
                std::to_string(crop.height) + "x" + std::to_string(crop.width) + " crop from " +
                    std::to_string(stack.height) + "x" + std::to_string(stack.width));
  }
}

}  // namespace

SliceStack crop_stack(const SliceStack& stack, int top, int left, Hw out) {
  require_fits(stack, out);
  if (top < 0 || left < 0 || top + out.height > stack.height || left + out.width > stack.width) {
    throw Error(ErrorCode::CropTooLarge, "crop window leaves the source");
  }
  SliceStack res(stack.n_slices, out.height, out.width, stack.subject_id);
  for (int s = 0; s < stack.n_slices; ++s) {
    for (int y = 0; y < out.height; ++y) {
      for (int x = 0; x < out.width; ++x) {
        res.at(s, y, x) = stack.at(s, top + y, left + x);
      }
    }
  }
  return res;
}

SliceStack center_crop(const SliceStack& stack, Hw out) {
  require_fits(stack, out);
  return crop_stack(stack, (stack.height - out.height) / 2, (stack.width - out.width) / 2, out);
}

SliceStack flip_horizontal(const SliceStack& stack) {
  SliceStack res = stack;
  for (int s = 0; s < stack.n_slices; ++s) {
    for (int y = 0; y < stack.height; ++y) {
      for (int x = 0; x < stack.width; ++x) {
        res.at(s, y, x) = stack.at(s, y, stack.width - 1 - x);
      }
    }
  }
  return res;
}

SliceStack rotate_stack(const SliceStack& stack, double angle_deg) {
  if (angle_deg == 0.0) return stack;
  const double theta = angle_deg * std::numbers::pi / 180.0;
  const double c = std::cos(theta);
  const double sn = std::sin(theta);
  const double cy = (stack.height - 1) / 2.0;
  const double cx = (stack.width - 1) / 2.0;

  SliceStack res(stack.n_slices, stack.height, stack.width, stack.subject_id);
  for (int y = 0; y < stack.height; ++y) {
    for (int x = 0; x < stack.width; ++x) {
      const double dy = y - cy;
      const double dx = x - cx;
      const double sx = cx + c * dx + sn * dy;
      const double sy = cy - sn * dx + c * dy;
      const int x0 = static_cast<int>(std::floor(sx));
      const int y0 = static_cast<int>(std::floor(sy));
      const double fx = sx - x0;
      const double fy = sy - y0;
      const double w[4] = {(1 - fy) * (1 - fx), (1 - fy) * fx, fy * (1 - fx), fy * fx};
      const int ys[4] = {y0, y0, y0 + 1, y0 + 1};
      const int xs[4] = {x0, x0 + 1, x0, x0 + 1};
      for (int s = 0; s < stack.n_slices; ++s) {
        double v = 0.0;
        for (int k = 0; k < 4; ++k) {
          if (ys[k] >= 0 && ys[k] < stack.height && xs[k] >= 0 && xs[k] < stack.width) {
            v += w[k] * stack.at(s, ys[k], xs[k]);
          }
        }
        res.at(s, y, x) = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  return res;
}

SliceStack median_blur(const SliceStack& stack, int kernel) {
  if (kernel < 1 || kernel % 2 == 0) {
    throw Error(ErrorCode::InvalidArgument, "median kernel must be odd");
  }
  const int r = kernel / 2;
  SliceStack res(stack.n_slices, stack.height, stack.width, stack.subject_id);
  std::vector<double> window(static_cast<std::size_t>(kernel) * kernel);
  const auto mid = window.begin() + static_cast<std::ptrdiff_t>(window.size() / 2);
  for (int s = 0; s < stack.n_slices; ++s) {
    for (int y = 0; y < stack.height; ++y) {
      for (int x = 0; x < stack.width; ++x) {
        std::size_t k = 0;
        for (int dy = -r; dy <= r; ++dy) {
          for (int dx = -r; dx <= r; ++dx) {
            const int yy = y + dy;
            const int xx = x + dx;
            const bool inside = yy >= 0 && yy < stack.height && xx >= 0 && xx < stack.width;
            window[k++] = inside ? stack.at(s, yy, xx) : 0.0;
          }
        }
        std::nth_element(window.begin(), mid, window.end());
        res.at(s, y, x) = *mid;
      }
    }
  }
  return res;
}

DefaultParams draw_default_params(const AugConfig& cfg, Hw source, Rng& rng) {
  if (cfg.crop_hw.height > source.height || cfg.crop_hw.width > source.width) {
    throw Error(ErrorCode::CropTooLarge, "crop larger than source slices");
  }
  DefaultParams p;
  p.flip = rng.bernoulli(0.5);
  p.crop_top = static_cast<int>(rng.below(static_cast<std::uint64_t>(source.height - cfg.crop_hw.height + 1)));
  p.crop_left = static_cast<int>(rng.below(static_cast<std::uint64_t>(source.width - cfg.crop_hw.width + 1)));
  p.gamma = std::exp(rng.uniform(std::log(cfg.gamma_min), std::log(cfg.gamma_max)));
  p.brightness = rng.uniform(1.0 - cfg.brightness, 1.0 + cfg.brightness);
  p.contrast = rng.uniform(1.0 - cfg.contrast, 1.0 + cfg.contrast);
  p.saturation = rng.uniform(1.0 - cfg.saturation, 1.0 + cfg.saturation);
  return p;
}

SliceStack apply_default_params(const SliceStack& stack, const AugConfig& cfg,
                                const DefaultParams& params) {
  SliceStack out = crop_stack(stack, params.crop_top, params.crop_left, cfg.crop_hw);
  if (params.flip) out = flip_horizontal(out);
  for (int s = 0; s < out.n_slices; ++s) {
    auto px = out.slice(s);
    if (params.gamma != 1.0) {
      for (double& v : px) v = std::pow(v, params.gamma);
    }
    if (params.brightness != 1.0) {
      for (double& v : px) v *= params.brightness;
    }
    if (params.contrast != 1.0) {
      double mean = 0.0;
      for (double v : px) mean += v;
      mean /= static_cast<double>(px.size());
      for (double& v : px) v = params.contrast * v + (1.0 - params.contrast) * mean;
    }
    for (double& v : px) v = std::clamp(v, 0.0, 1.0);
  }
  return out;
}

SliceStack apply_default(const SliceStack& stack, const AugConfig& cfg, Rng& rng) {
  return apply_default_params(stack, cfg, draw_default_params(cfg, stack.hw(), rng));
}

StrongParams draw_strong_params(const AugConfig& cfg, Rng& rng) {
  StrongParams p;
  p.rotate = rng.bernoulli(0.5);
  p.angle_deg = rng.uniform(-cfg.rotate_limit_deg, cfg.rotate_limit_deg);
  p.blur = rng.bernoulli(0.5);
  return p;
}

SliceStack apply_strong_params(const SliceStack& stack, const AugConfig& cfg,
                               const StrongParams& params) {
  SliceStack out = params.rotate ? rotate_stack(stack, params.angle_deg) : stack;
  if (params.blur) out = median_blur(out, cfg.median_kernel);
  return out;
}

SliceStack apply_strong(const SliceStack& stack, const AugConfig& cfg, Rng& rng) {
  if (cfg.crop_hw.height > stack.height || cfg.crop_hw.width > stack.width) {
    throw Error(ErrorCode::CropTooLarge, "crop larger than source slices");
  }
  const StrongParams strong = draw_strong_params(cfg, rng);
  return apply_default(apply_strong_params(stack, cfg, strong), cfg, rng);
}

SliceStack augment_for_training(const SliceStack& stack, const AugConfig& cfg, Rng& rng) {
  return cfg.uses_strong() ? apply_strong(stack, cfg, rng) : apply_default(stack, cfg, rng);
}

MixupResult mixup_with_lambda(const SliceStack& a, LabelPair ya, const SliceStack& b,
                              LabelPair yb, double lambda) {
  if (a.n_slices != b.n_slices || a.height != b.height || a.width != b.width) {
    throw Error(ErrorCode::DimensionMismatch, "mixup inputs differ in shape");
  }
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "mixup lambda must lie in [0, 1]");
  }
  MixupResult r;
  r.lambda = lambda;
  r.stack = SliceStack(a.n_slices, a.height, a.width, a.subject_id);
  const double mu = 1.0 - lambda;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double v = lambda * a.data[i] + mu * b.data[i];
    r.stack.data[i] = std::clamp(v, std::min(a.data[i], b.data[i]), std::max(a.data[i], b.data[i]));
  }
  r.labels.severe = std::clamp(lambda * ya.severe + mu * yb.severe, 0.0, 1.0);
  r.labels.covid = std::clamp(lambda * ya.covid + mu * yb.covid, 0.0, 1.0);
  return r;
}

MixupResult mixup_pair(const SliceStack& a, LabelPair ya, const SliceStack& b, LabelPair yb,
                       double alpha, Rng& rng) {
  if (!(alpha > 0.0)) throw Error(ErrorCode::InvalidArgument, "mixup alpha must be > 0");
  return mixup_with_lambda(a, ya, b, yb, rng.beta(alpha, alpha));
}

SliceStack tta_view(const SliceStack& stack, TtaView view, Hw crop) {
  require_fits(stack, crop);
  const int bottom = stack.height - crop.height;
  const int right = stack.width - crop.width;
  switch (view) {
    case TtaView::CenterCrop: return center_crop(stack, crop);
    case TtaView::CornerTL: return crop_stack(stack, 0, 0, crop);
    case TtaView::CornerTR: return crop_stack(stack, 0, right, crop);
    case TtaView::CornerBL: return crop_stack(stack, bottom, 0, crop);
    case TtaView::CornerBR: return crop_stack(stack, bottom, right, crop);
    case TtaView::RotNeg5: return center_crop(rotate_stack(stack, -5.0), crop);
    case TtaView::RotPos5: return center_crop(rotate_stack(stack, 5.0), crop);
    case TtaView::RotPos10: return center_crop(rotate_stack(stack, 10.0), crop);
  }
  return center_crop(stack, crop);
}

std::vector<SliceStack> tta_views(const SliceStack& stack, Hw crop) {
  require_fits(stack, crop);
  std::vector<SliceStack> views;
  views.reserve(kTtaViews.size());
  for (TtaView v : kTtaViews) views.push_back(tta_view(stack, v, crop));
  return views;
}

}  // namespace ctsev
