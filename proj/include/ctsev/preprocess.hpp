#pragma once

#include <span>
#include <string>
#include <vector>

#include "ctsev/volume_io.hpp"

namespace ctsev {

/// Lung window by default: level -600 HU, width 1500 HU.
struct WindowSpec {
  double level = -600.0;
  double width = 1500.0;
};

struct Hw {
  int height = 0;
  int width = 0;

  bool operator==(const Hw&) const = default;
};

/// One 2D single-channel image, row-major.
struct Image {
  int height = 0;
  int width = 0;
  std::vector<double> pixels;

  double at(int y, int x) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  bool operator==(const Image&) const = default;
};

/// n_slices preprocessed axial slices, stored slice-major then row-major.
struct SliceStack {
  int n_slices = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;
  std::string subject_id;

  SliceStack() = default;
  SliceStack(int n, int h, int w, std::string id = {})
      : n_slices(n), height(h), width(w),
        data(static_cast<std::size_t>(n) * h * w, 0.0), subject_id(std::move(id)) {}

  Hw hw() const { return {height, width}; }
  std::size_t slice_size() const { return static_cast<std::size_t>(height) * width; }

  std::span<double> slice(int s) {
    return std::span(data).subspan(static_cast<std::size_t>(s) * slice_size(), slice_size());
  }
  std::span<const double> slice(int s) const {
    return std::span(data).subspan(static_cast<std::size_t>(s) * slice_size(), slice_size());
  }
  double& at(int s, int y, int x) {
    return data[static_cast<std::size_t>(s) * slice_size() + static_cast<std::size_t>(y) * width + x];
  }
  double at(int s, int y, int x) const {
    return data[static_cast<std::size_t>(s) * slice_size() + static_cast<std::size_t>(y) * width + x];
  }

  bool operator==(const SliceStack&) const = default;
};

/// clamp((hu - (level - width/2)) / width, 0, 1).
double window_hu(double hu, const WindowSpec& spec = {});

/// round(k (depth-1) / (n-1)) for k = 0..n-1 with round-half-to-even in exact
/// integer arithmetic; n == 1 yields the middle slice floor((depth-1)/2).
std::vector<int> uniform_sample_indices(int depth, int n);

/// Corner-aligned bilinear resampling; source coordinate of output index i
/// is i (in-1)/(out-1), or the center when out is 1.
Image resize_bilinear(const Image& img, Hw out);

/// Samples n axial slices, applies the window and resizes each to out_hw.
SliceStack preprocess_volume(const Volume& volume, const WindowSpec& spec, int n, Hw out_hw);

}  // namespace ctsev

namespace ctsev {

/// Everything needed to turn a Volume into the pre-crop SliceStack.
struct PreprocessConfig {
  WindowSpec window;
  int n_slices = 32;
  Hw precrop_hw{256, 256};

  SliceStack apply(const Volume& volume) const {
    return preprocess_volume(volume, window, n_slices, precrop_hw);
  }
};

}  // namespace ctsev
