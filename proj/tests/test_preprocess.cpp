#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "ctsev/preprocess.hpp"
#include "ctsev/rng.hpp"
#include "ctsev/volume_io.hpp"

using namespace ctsev;

namespace {

// Round-half-to-even of num/den for non-negative integers.
int round_half_even(long long num, long long den) {
  const long long q = num / den;
  const long long r = num % den;
  if (2 * r > den) return static_cast<int>(q + 1);
  if (2 * r < den) return static_cast<int>(q);
  return static_cast<int>(q % 2 == 0 ? q : q + 1);
}

Volume constant_volume(Dims d, std::int16_t hu) {
  Volume v;
  v.dims = d;
  v.hu.assign(d.voxels(), hu);
  return v;
}

}  // namespace

TEST_CASE("lung window values") {
  CHECK(window_hu(-600.0) == 0.5);
  CHECK(window_hu(-1350.0) == 0.0);
  CHECK(window_hu(150.0) == 1.0);
  CHECK(window_hu(-1024.0) == doctest::Approx(326.0 / 1500.0).epsilon(1e-15));
  CHECK(window_hu(-5000.0) == 0.0);
  CHECK(window_hu(3071.0) == 1.0);
  CHECK(window_hu(0.0, {0.0, 100.0}) == 0.5);
}

TEST_CASE("window is monotone") {
  double prev = window_hu(-2000.0);
  for (int i = 1; i <= 10000; ++i) {
    const double hu = -2000.0 + 4000.0 * i / 10000.0;
    const double w = window_hu(hu);
    CHECK(w >= prev);
    prev = w;
  }
}

TEST_CASE("uniform slice indices") {
  std::vector<int> identity(32);
  for (int i = 0; i < 32; ++i) identity[static_cast<std::size_t>(i)] = i;
  CHECK(uniform_sample_indices(32, 32) == identity);

  const auto idx = uniform_sample_indices(600, 32);
  CHECK(idx[0] == 0);
  CHECK(idx[1] == 19);
  CHECK(idx[31] == 599);
  for (int k = 0; k < 32; ++k) CHECK(idx[static_cast<std::size_t>(k)] == round_half_even(599LL * k, 31));

  CHECK(uniform_sample_indices(3, 5) == std::vector<int>{0, 0, 1, 2, 2});
  CHECK(uniform_sample_indices(7, 1) == std::vector<int>{3});
  CHECK(uniform_sample_indices(1, 4) == std::vector<int>{0, 0, 0, 0});
}

TEST_CASE("indices sorted with exact endpoints for every depth") {
  for (int depth = 1; depth <= 700; ++depth) {
    const auto idx = uniform_sample_indices(depth, 32);
    REQUIRE(idx.size() == 32);
    CHECK(std::is_sorted(idx.begin(), idx.end()));
    if (depth >= 2) {
      CHECK(idx.front() == 0);
      CHECK(idx.back() == depth - 1);
    }
  }
}

TEST_CASE("bilinear resize") {
  const Image checker{2, 2, {0.0, 1.0, 1.0, 0.0}};
  const Image up = resize_bilinear(checker, {3, 3});
  CHECK(up.at(1, 1) == 0.5);
  CHECK(up.at(0, 0) == 0.0);
  CHECK(up.at(0, 2) == 1.0);
  CHECK(up.at(0, 1) == 0.5);

  Rng rng(3);
  Image img{5, 7, std::vector<double>(35)};
  for (double& p : img.pixels) p = rng.uniform();
  CHECK(resize_bilinear(img, {5, 7}) == img);

  const auto [lo, hi] = std::minmax_element(img.pixels.begin(), img.pixels.end());
  for (Hw out : {Hw{3, 3}, Hw{9, 4}, Hw{16, 16}, Hw{1, 1}}) {
    const Image r = resize_bilinear(img, out);
    CHECK(r.height == out.height);
    CHECK(r.width == out.width);
    for (double p : r.pixels) {
      CHECK(p >= *lo);
      CHECK(p <= *hi);
    }
  }

  const Image flat{4, 4, std::vector<double>(16, 0.3)};
  for (double p : resize_bilinear(flat, {11, 6}).pixels) CHECK(p == 0.3);
}

TEST_CASE("volume preprocessing") {
  const SliceStack mid = preprocess_volume(constant_volume({20, 20, 10}, -600), {}, 32, {8, 8});
  CHECK(mid.n_slices == 32);
  for (double p : mid.data) CHECK(p == 0.5);

  const SliceStack air = preprocess_volume(constant_volume({20, 20, 10}, -1024), {}, 4, {16, 12});
  CHECK(air.hw() == Hw{16, 12});
  for (double p : air.data) CHECK(p == doctest::Approx(0.217333333333).epsilon(1e-12));

  Volume v = constant_volume({512, 512, 128}, -800);
  v.hu[0] = 3071;
  const SliceStack big = preprocess_volume(v, {}, 32, {256, 256});
  CHECK(big.n_slices == 32);
  CHECK(big.hw() == Hw{256, 256});
  for (double p : big.data) {
    CHECK_FALSE(std::isnan(p));
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
  }
  CHECK(big.at(0, 0, 0) == 1.0);
}

TEST_CASE("slices come from the sampled depths") {
  Volume v = constant_volume({8, 8, 5}, 0);
  for (int z = 0; z < 5; ++z) {
    for (int i = 0; i < 64; ++i) v.hu[static_cast<std::size_t>(z * 64 + i)] = static_cast<std::int16_t>(-1350 + 300 * z);
  }
  const SliceStack s = preprocess_volume(v, {}, 3, {8, 8});
  CHECK(s.at(0, 4, 4) == doctest::Approx(window_hu(-1350)));
  CHECK(s.at(1, 4, 4) == doctest::Approx(window_hu(-1350 + 600)));
  CHECK(s.at(2, 4, 4) == doctest::Approx(window_hu(-1350 + 1200)));
}
