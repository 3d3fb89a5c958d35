#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "ctsev/augment.hpp"
#include "ctsev/preprocess.hpp"
#include "ctsev/rng.hpp"

namespace ctsev {

/// Two desk-scale encoder families: A has three conv blocks, B has two.
enum class Variant { A, B };

std::string_view to_string(Variant variant);
Variant variant_from_string(std::string_view name);

/// Per-slice encoder: inputs are standardized as (x - input_mean) / input_std,
/// then each block is conv3x3 (pad 1) -> ReLU -> 2x2 max-pool; a global
/// average pool turns the last block into a feature_dim vector.
struct EncoderConfig {
  Hw in_hw{224, 224};
  std::vector<int> channels{8, 16, 32};
  Variant variant = Variant::A;
  // Grayscale average of the usual ImageNet channel statistics.
  double input_mean = 0.449;
  double input_std = 0.226;

  int feature_dim() const { return channels.empty() ? 0 : channels.back(); }
  int blocks() const { return static_cast<int>(channels.size()); }

  /// Default channel plan for a variant: A = {8, 16, 32}, B = {8, 16}.
  static EncoderConfig for_variant(Variant variant, Hw in_hw);
  void validate() const;

  bool operator==(const EncoderConfig&) const = default;
};

/// Offsets of each tensor inside the flat parameter vector.
struct ParamLayout {
  struct Block {
    int in_channels = 0;
    int out_channels = 0;
    int height = 0;  // conv input == conv output size
    int width = 0;
    std::size_t weight = 0;  // [out][in][3][3]
    std::size_t bias = 0;    // [out]
  };
  std::vector<Block> blocks;
  int feature_dim = 0;
  int pooled_height = 0;  // spatial size entering the global average pool
  int pooled_width = 0;
  double input_mean = 0.0;
  double input_scale = 1.0;  // 1 / input_std
  std::size_t head_weight = 0;  // [feature_dim][2]: column 0 severity, 1 positivity
  std::size_t head_bias = 0;    // [2]
  std::size_t total = 0;
};

ParamLayout param_layout(const EncoderConfig& config);

struct ModelParams {
  EncoderConfig config;
  std::vector<double> values;

  bool all_finite() const;
  bool operator==(const ModelParams&) const = default;
};

ModelParams zero_params(const EncoderConfig& config);
/// He-normal conv kernels, zero biases, N(0, 1/D) head weights.
ModelParams init_params(const EncoderConfig& config, Rng& rng);

/// Row i holds the feature vector of slice i.
struct FeatureMatrix {
  int n_slices = 0;
  int dim = 0;
  std::vector<double> values;

  std::span<const double> row(int i) const {
    return std::span(values).subspan(static_cast<std::size_t>(i) * dim, static_cast<std::size_t>(dim));
  }
};

struct MaxFeatures {
  std::vector<double> values;
  std::vector<int> argmax;  // lowest slice index on ties
};

struct Logits {
  double severity = 0.0;
  double positivity = 0.0;
};

struct ProbPair {
  double severe = 0.5;
  double covid = 0.5;

  bool operator==(const ProbPair&) const = default;
};

FeatureMatrix encode_slices(const SliceStack& stack, const ModelParams& params);
MaxFeatures max_aggregate(const FeatureMatrix& features);
Logits head_forward(std::span<const double> zmax, const ModelParams& params);

double sigmoid(double logit);
/// Sum of the two binary cross-entropies, evaluated in log-sum-exp form so
/// it stays finite for any finite logit. Accepts soft labels.
double loss_bce(Logits logits, LabelPair target);

/// Sigmoid of the head applied to the slice-max features, kept strictly
/// inside (0, 1).
ProbPair predict_stack(const SliceStack& stack, const ModelParams& params);

struct Gradient {
  double loss = 0.0;
  std::vector<double> values;  // same layout as ModelParams::values
};

/// Exact gradient of loss_bce(head(max(encode(stack)))). Only the argmax
/// slice of each feature dimension receives gradient.
Gradient backward(const SliceStack& stack, LabelPair target, const ModelParams& params);

/// Discrete state of the forward pass: ReLU on/off bits, max-pool winners
/// and slice argmax per feature. The loss is smooth in the parameters on any
/// region where this stays constant, which is what finite-difference checks
/// need to know.
std::vector<int> activation_pattern(const SliceStack& stack, const ModelParams& params);

struct SgdState {
  std::vector<double> velocity;

  bool operator==(const SgdState&) const = default;
};

/// v <- momentum v + grad; p <- p - lr v.
void sgd_step(ModelParams& params, std::span<const double> grad, double lr, double momentum,
              SgdState& state);

}  // namespace ctsev
