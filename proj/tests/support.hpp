#pragma once

#include <atomic>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "ctsev/metrics.hpp"
#include "ctsev/model.hpp"
#include "ctsev/preprocess.hpp"
#include "ctsev/rng.hpp"

namespace testing {

// Scratch directory removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("ctsev-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline ctsev::SliceStack random_stack(int n, int h, int w, ctsev::Rng& rng) {
  ctsev::SliceStack s(n, h, w);
  for (double& v : s.data) v = rng.uniform();
  return s;
}

// O(n^2) pair counting. Correct pairs add 1, ties 1/2.
inline double brute_force_auc(const std::vector<ctsev::ScoredCase>& cases) {
  double credit = 0.0;
  double pairs = 0.0;
  for (const auto& p : cases) {
    if (!p.label) continue;
    for (const auto& n : cases) {
      if (n.label) continue;
      pairs += 1.0;
      if (p.score > n.score) credit += 1.0;
      else if (p.score == n.score) credit += 0.5;
    }
  }
  return credit / pairs;
}

struct GradCheck {
  double max_rel_error = 0.0;
  int checked = 0;
  int skipped = 0;  // probes that crossed a ReLU / pool / argmax kink
};

// Central differences on every parameter (or every `stride`-th one).
// Relative error is |a - f| / max(|a|, |f|, floor).
inline GradCheck finite_difference_check(const ctsev::SliceStack& stack, ctsev::LabelPair y,
                                         const ctsev::ModelParams& params, double step = 1e-5,
                                         double floor = 1e-6, std::size_t stride = 1) {
  using namespace ctsev;
  const Gradient g = backward(stack, y, params);
  const auto loss_at = [&](const ModelParams& p) {
    return loss_bce(head_forward(max_aggregate(encode_slices(stack, p)).values, p), y);
  };
  const std::vector<int> base = activation_pattern(stack, params);
  GradCheck out;
  ModelParams probe = params;
  for (std::size_t i = 0; i < params.values.size(); i += stride) {
    const double original = params.values[i];
    probe.values[i] = original + step;
    const double up = loss_at(probe);
    const bool same_up = activation_pattern(stack, probe) == base;
    probe.values[i] = original - step;
    const double down = loss_at(probe);
    const bool same_down = activation_pattern(stack, probe) == base;
    probe.values[i] = original;
    if (!same_up || !same_down) {
      ++out.skipped;
      continue;
    }
    const double fd = (up - down) / (2.0 * step);
    const double a = g.values[i];
    const double rel = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), floor});
    out.max_rel_error = std::max(out.max_rel_error, rel);
    ++out.checked;
  }
  return out;
}

// Random small encoder: variant, 8..16 pixel input, 1..4 channels per block,
// random biases so that ReLUs are in mixed states.
inline ctsev::ModelParams random_small_model(ctsev::Rng& rng) {
  using namespace ctsev;
  const Variant v = rng.bernoulli(0.5) ? Variant::A : Variant::B;
  const int side = 8 + 4 * static_cast<int>(rng.below(3));
  EncoderConfig cfg = EncoderConfig::for_variant(v, {side, side});
  for (int& c : cfg.channels) c = 1 + static_cast<int>(rng.below(4));
  if (rng.bernoulli(0.5)) {
    cfg.input_mean = 0.0;
    cfg.input_std = 1.0;
  }
  ModelParams p = init_params(cfg, rng);
  for (double& x : p.values) x += rng.normal(0.0, 0.1);
  return p;
}

}  // namespace testing
