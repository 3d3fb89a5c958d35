#include "ctsev/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "ctsev/error.hpp"

namespace ctsev {

double window_hu(double hu, const WindowSpec& spec) {
  const double lower = spec.level - spec.width / 2.0;
  return std::clamp((hu - lower) / spec.width, 0.0, 1.0);
}

std::vector<int> uniform_sample_indices(int depth, int n) {
  if (depth < 1 || n < 1) {
    throw Error(ErrorCode::InvalidArgument, "depth and n must be >= 1");
  }
  std::vector<int> out(static_cast<std::size_t>(n));
  if (n == 1) {
    out[0] = (depth - 1) / 2;
    return out;
  }
  const long long den = n - 1;
  for (int k = 0; k < n; ++k) {
    const long long num = static_cast<long long>(k) * (depth - 1);
    long long q = num / den;
    const long long twice_rem = 2 * (num % den);
    if (twice_rem > den || (twice_rem == den && (q % 2) == 1)) ++q;
    out[static_cast<std::size_t>(k)] = static_cast<int>(q);
  }
  return out;
}

namespace {

struct Tap {
  int lo;
  int hi;
  double frac;
};

std::vector<Tap> taps(int in, int out) {
  std::vector<Tap> t(static_cast<std::size_t>(out));
  for (int i = 0; i < out; ++i) {
    const double pos = out == 1 ? (in - 1) / 2.0
                                : static_cast<double>(i) * (in - 1) / (out - 1);
    int lo = static_cast<int>(std::floor(pos));
    lo = std::clamp(lo, 0, in - 1);
    const int hi = std::min(lo + 1, in - 1);
    t[static_cast<std::size_t>(i)] = {lo, hi, pos - lo};
  }
  return t;
}

}  // namespace

Image resize_bilinear(const Image& img, Hw out) {
  if (img.height < 1 || img.width < 1 || out.height < 1 || out.width < 1) {
    throw Error(ErrorCode::InvalidArgument, "resize dims must be >= 1");
  }
  if (img.height == out.height && img.width == out.width) return img;

  const auto ty = taps(img.height, out.height);
  const auto tx = taps(img.width, out.width);
  Image res{out.height, out.width,
            std::vector<double>(static_cast<std::size_t>(out.height) * out.width)};
  for (int y = 0; y < out.height; ++y) {
    const Tap& a = ty[static_cast<std::size_t>(y)];
    for (int x = 0; x < out.width; ++x) {
      const Tap& b = tx[static_cast<std::size_t>(x)];
      const double top = img.at(a.lo, b.lo) + b.frac * (img.at(a.lo, b.hi) - img.at(a.lo, b.lo));
      const double bot = img.at(a.hi, b.lo) + b.frac * (img.at(a.hi, b.hi) - img.at(a.hi, b.lo));
      double v = top + a.frac * (bot - top);
      // Interpolation is convex; the clamp only removes rounding overshoot.
      const double lo = std::min({img.at(a.lo, b.lo), img.at(a.lo, b.hi), img.at(a.hi, b.lo),
                                  img.at(a.hi, b.hi)});
      const double hi = std::max({img.at(a.lo, b.lo), img.at(a.lo, b.hi), img.at(a.hi, b.lo),
                                  img.at(a.hi, b.hi)});
      res.pixels[static_cast<std::size_t>(y) * out.width + x] = std::clamp(v, lo, hi);
    }
  }
  return res;
}

SliceStack preprocess_volume(const Volume& volume, const WindowSpec& spec, int n, Hw out_hw) {
  if (out_hw.height < 8 || out_hw.width < 8) {
    throw Error(ErrorCode::InvalidArgument, "output slice dims must be >= 8");
  }
  if (!(spec.width > 0.0)) throw Error(ErrorCode::InvalidArgument, "window width must be > 0");
  const auto indices = uniform_sample_indices(volume.dims.depth, n);

  SliceStack stack(n, out_hw.height, out_hw.width, volume.subject_id);
  Image slice{volume.dims.height, volume.dims.width,
              std::vector<double>(static_cast<std::size_t>(volume.dims.height) * volume.dims.width)};
  for (int s = 0; s < n; ++s) {
    const std::size_t base =
        static_cast<std::size_t>(indices[static_cast<std::size_t>(s)]) * slice.pixels.size();
    for (std::size_t i = 0; i < slice.pixels.size(); ++i) {
      slice.pixels[i] = window_hu(volume.hu[base + i], spec);
    }
    const Image resized = resize_bilinear(slice, out_hw);
    std::copy(resized.pixels.begin(), resized.pixels.end(), stack.slice(s).begin());
  }
  return stack;
}

}  // namespace ctsev
