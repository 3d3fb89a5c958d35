#include "ctsev/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "ctsev/error.hpp"

namespace ctsev {

std::string_view to_string(Variant variant) { return variant == Variant::A ? "A" : "B"; }

Variant variant_from_string(std::string_view name) {
  if (name == "A") return Variant::A;
  if (name == "B") return Variant::B;
  throw Error(ErrorCode::InvalidArgument, "unknown encoder variant '" + std::string(name) + "'");
}

EncoderConfig EncoderConfig::for_variant(Variant variant, Hw in_hw) {
  EncoderConfig c;
  c.in_hw = in_hw;
  c.variant = variant;
  c.channels = variant == Variant::A ? std::vector<int>{8, 16, 32} : std::vector<int>{8, 16};
  return c;
}

void EncoderConfig::validate() const {
  const int expected_blocks = variant == Variant::A ? 3 : 2;
  if (blocks() != expected_blocks) {
    throw Error(ErrorCode::InvalidArgument,
                "variant " + std::string(to_string(variant)) + " needs " +
                    std::to_string(expected_blocks) + " channel entries");
  }
  for (int c : channels) {
    if (c < 1) throw Error(ErrorCode::InvalidArgument, "channel counts must be positive");
  }
  if (!std::isfinite(input_mean) || !(input_std > 0.0) || !std::isfinite(input_std)) {
    throw Error(ErrorCode::InvalidArgument, "input_std must be positive and finite");
  }
  const int min_side = 1 << blocks();
  if (in_hw.height < min_side || in_hw.width < min_side) {
    throw Error(ErrorCode::InvalidArgument, "encoder input too small for its pooling depth");
  }
}

ParamLayout param_layout(const EncoderConfig& config) {
  config.validate();
  ParamLayout layout;
  std::size_t offset = 0;
  int in_ch = 1;
  int h = config.in_hw.height;
  int w = config.in_hw.width;
  for (int out_ch : config.channels) {
    ParamLayout::Block b;
    b.in_channels = in_ch;
    b.out_channels = out_ch;
    b.height = h;
    b.width = w;
    b.weight = offset;
    offset += static_cast<std::size_t>(out_ch) * in_ch * 9;
    b.bias = offset;
    offset += static_cast<std::size_t>(out_ch);
    layout.blocks.push_back(b);
    in_ch = out_ch;
    h /= 2;
    w /= 2;
  }
  layout.feature_dim = config.feature_dim();
  layout.pooled_height = h;
  layout.pooled_width = w;
  layout.input_mean = config.input_mean;
  layout.input_scale = 1.0 / config.input_std;
  layout.head_weight = offset;
  offset += static_cast<std::size_t>(layout.feature_dim) * 2;
  layout.head_bias = offset;
  offset += 2;
  layout.total = offset;
  return layout;
}

bool ModelParams::all_finite() const {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

ModelParams zero_params(const EncoderConfig& config) {
  return ModelParams{config, std::vector<double>(param_layout(config).total, 0.0)};
}

ModelParams init_params(const EncoderConfig& config, Rng& rng) {
  const ParamLayout layout = param_layout(config);
  ModelParams p = zero_params(config);
  for (const auto& b : layout.blocks) {
    const double stddev = std::sqrt(2.0 / (9.0 * b.in_channels));
    const std::size_t n = static_cast<std::size_t>(b.out_channels) * b.in_channels * 9;
    for (std::size_t i = 0; i < n; ++i) p.values[b.weight + i] = rng.normal(0.0, stddev);
  }
  const double head_std = std::sqrt(1.0 / layout.feature_dim);
  for (int i = 0; i < layout.feature_dim * 2; ++i) {
    p.values[layout.head_weight + static_cast<std::size_t>(i)] = rng.normal(0.0, head_std);
  }
  return p;
}

namespace {

// Activations of one slice kept for the backward pass.
struct SliceTrace {
  std::vector<std::vector<double>> input;  // per block, zero-padded (H+2)x(W+2) planes
  std::vector<std::vector<double>> act;    // per block, post-ReLU HxW planes
  std::vector<std::vector<int>> pool_arg;  // per block, index into act of each pooled max
  std::vector<double> pooled;              // output of the last pool
};

void check_shapes(const SliceStack& stack, const ModelParams& params, const ParamLayout& layout) {
  if (params.values.size() != layout.total) {
    throw Error(ErrorCode::ShapeMismatch, "parameter vector does not match encoder config");
  }
  if (stack.height != params.config.in_hw.height || stack.width != params.config.in_hw.width) {
    throw Error(ErrorCode::ShapeMismatch,
                "stack is " + std::to_string(stack.height) + "x" + std::to_string(stack.width) +
                    ", encoder expects " + std::to_string(params.config.in_hw.height) + "x" +
                    std::to_string(params.config.in_hw.width));
  }
  if (stack.n_slices < 1) throw Error(ErrorCode::ShapeMismatch, "empty slice stack");
}

void allocate(SliceTrace& t, const ParamLayout& layout) {
  const std::size_t n = layout.blocks.size();
  t.input.resize(n);
  t.act.resize(n);
  t.pool_arg.resize(n);
  for (std::size_t b = 0; b < n; ++b) {
    const auto& bl = layout.blocks[b];
    const std::size_t padded = static_cast<std::size_t>(bl.height + 2) * (bl.width + 2);
    const std::size_t plane = static_cast<std::size_t>(bl.height) * bl.width;
    const std::size_t pooled = static_cast<std::size_t>(bl.height / 2) * (bl.width / 2);
    t.input[b].assign(padded * bl.in_channels, 0.0);
    t.act[b].resize(plane * bl.out_channels);
    t.pool_arg[b].resize(pooled * bl.out_channels);
  }
  t.pooled.resize(static_cast<std::size_t>(layout.pooled_height) * layout.pooled_width *
                  layout.feature_dim);
}

// Runs the encoder on one slice, filling the trace and the feature vector.
void forward_slice(std::span<const double> pixels, const ParamLayout& layout, const double* params,
                   SliceTrace& t, double* feature) {
  {
    const auto& b0 = layout.blocks.front();
    const int pw = b0.width + 2;
    auto& in = t.input.front();
    for (int y = 0; y < b0.height; ++y) {
      const double* src = pixels.data() + static_cast<std::size_t>(y) * b0.width;
      double* dst = in.data() + static_cast<std::size_t>(y + 1) * pw + 1;
      for (int x = 0; x < b0.width; ++x) dst[x] = (src[x] - layout.input_mean) * layout.input_scale;
    }
  }

  for (std::size_t b = 0; b < layout.blocks.size(); ++b) {
    const auto& bl = layout.blocks[b];
    const int h = bl.height;
    const int w = bl.width;
    const int pw = w + 2;
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const std::size_t padded = static_cast<std::size_t>(h + 2) * pw;
    const double* in = t.input[b].data();
    double* act = t.act[b].data();
    const double* weight = params + bl.weight;
    const double* bias = params + bl.bias;

    for (int co = 0; co < bl.out_channels; ++co) {
      double* out = act + co * plane;
      std::fill(out, out + plane, bias[co]);
      for (int ci = 0; ci < bl.in_channels; ++ci) {
        const double* src = in + ci * padded;
        const double* k = weight + (static_cast<std::size_t>(co) * bl.in_channels + ci) * 9;
        for (int ky = 0; ky < 3; ++ky) {
          for (int kx = 0; kx < 3; ++kx) {
            const double wv = k[ky * 3 + kx];
            for (int y = 0; y < h; ++y) {
              const double* row = src + static_cast<std::size_t>(y + ky) * pw + kx;
              double* orow = out + static_cast<std::size_t>(y) * w;
              for (int x = 0; x < w; ++x) orow[x] += wv * row[x];
            }
          }
        }
      }
      for (std::size_t i = 0; i < plane; ++i) out[i] = out[i] > 0.0 ? out[i] : 0.0;
    }

    // 2x2 max-pool into the next block's padded input (or the final buffer).
    const int ph = h / 2;
    const int pwid = w / 2;
    const bool last = b + 1 == layout.blocks.size();
    double* next = last ? t.pooled.data() : t.input[b + 1].data();
    const int next_pw = last ? pwid : pwid + 2;
    const std::size_t next_plane =
        last ? static_cast<std::size_t>(ph) * pwid : static_cast<std::size_t>(ph + 2) * (pwid + 2);
    const int offset = last ? 0 : 1;
    int* arg = t.pool_arg[b].data();
    for (int c = 0; c < bl.out_channels; ++c) {
      const double* a = act + c * plane;
      for (int y = 0; y < ph; ++y) {
        for (int x = 0; x < pwid; ++x) {
          int best = (2 * y) * w + 2 * x;
          const int candidates[3] = {best + 1, best + w, best + w + 1};
          for (int cand : candidates) {
            if (a[cand] > a[best]) best = cand;
          }
          *arg++ = best;
          next[c * next_plane + static_cast<std::size_t>(y + offset) * next_pw + x + offset] = a[best];
        }
      }
    }
  }

  const std::size_t pooled_plane =
      static_cast<std::size_t>(layout.pooled_height) * layout.pooled_width;
  for (int c = 0; c < layout.feature_dim; ++c) {
    double sum = 0.0;
    const double* p = t.pooled.data() + c * pooled_plane;
    for (std::size_t i = 0; i < pooled_plane; ++i) sum += p[i];
    feature[c] = sum / static_cast<double>(pooled_plane);
  }
}

// Accumulates into grad the parameter gradient for one slice whose features
// received dfeature.
void backward_slice(const SliceTrace& t, const ParamLayout& layout, const double* params,
                    std::span<const double> dfeature, double* grad) {
  const std::size_t pooled_plane =
      static_cast<std::size_t>(layout.pooled_height) * layout.pooled_width;
  std::vector<double> dpooled(pooled_plane * layout.feature_dim);
  for (int c = 0; c < layout.feature_dim; ++c) {
    const double g = dfeature[static_cast<std::size_t>(c)] / static_cast<double>(pooled_plane);
    std::fill_n(dpooled.begin() + static_cast<std::ptrdiff_t>(c * pooled_plane), pooled_plane, g);
  }

  std::vector<double> dact;
  std::vector<double> dinput;
  for (std::size_t bi = layout.blocks.size(); bi-- > 0;) {
    const auto& bl = layout.blocks[bi];
    const int h = bl.height;
    const int w = bl.width;
    const int pw = w + 2;
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const std::size_t padded = static_cast<std::size_t>(h + 2) * pw;
    const std::size_t pooled = static_cast<std::size_t>(h / 2) * (w / 2);

    // Unpool, then ReLU mask.
    dact.assign(plane * bl.out_channels, 0.0);
    const int* arg = t.pool_arg[bi].data();
    for (int c = 0; c < bl.out_channels; ++c) {
      for (std::size_t i = 0; i < pooled; ++i) {
        dact[c * plane + static_cast<std::size_t>(arg[c * pooled + i])] += dpooled[c * pooled + i];
      }
    }
    const double* act = t.act[bi].data();
    for (std::size_t i = 0; i < dact.size(); ++i) {
      if (!(act[i] > 0.0)) dact[i] = 0.0;
    }

    const double* in = t.input[bi].data();
    const double* weight = params + bl.weight;
    double* gw = grad + bl.weight;
    double* gb = grad + bl.bias;
    const bool need_input = bi > 0;
    if (need_input) dinput.assign(padded * bl.in_channels, 0.0);

    for (int co = 0; co < bl.out_channels; ++co) {
      const double* d = dact.data() + co * plane;
      double bsum = 0.0;
      for (std::size_t i = 0; i < plane; ++i) bsum += d[i];
      gb[co] += bsum;
      for (int ci = 0; ci < bl.in_channels; ++ci) {
        const double* src = in + ci * padded;
        const std::size_t kbase = (static_cast<std::size_t>(co) * bl.in_channels + ci) * 9;
        double* dsrc = need_input ? dinput.data() + ci * padded : nullptr;
        for (int ky = 0; ky < 3; ++ky) {
          for (int kx = 0; kx < 3; ++kx) {
            const double wv = weight[kbase + ky * 3 + kx];
            double acc = 0.0;
            for (int y = 0; y < h; ++y) {
              const double* row = src + static_cast<std::size_t>(y + ky) * pw + kx;
              const double* drow = d + static_cast<std::size_t>(y) * w;
              for (int x = 0; x < w; ++x) acc += drow[x] * row[x];
            }
            gw[kbase + ky * 3 + kx] += acc;
            if (dsrc) {
              for (int y = 0; y < h; ++y) {
                double* row = dsrc + static_cast<std::size_t>(y + ky) * pw + kx;
                const double* drow = d + static_cast<std::size_t>(y) * w;
                for (int x = 0; x < w; ++x) row[x] += wv * drow[x];
              }
            }
          }
        }
      }
    }

    if (need_input) {
      // The padded interior is the previous block's pooled output.
      dpooled.assign(plane * bl.in_channels, 0.0);
      for (int c = 0; c < bl.in_channels; ++c) {
        for (int y = 0; y < h; ++y) {
          std::copy_n(dinput.data() + c * padded + static_cast<std::size_t>(y + 1) * pw + 1, w,
                      dpooled.data() + c * plane + static_cast<std::size_t>(y) * w);
        }
      }
    }
  }
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

}  // namespace

FeatureMatrix encode_slices(const SliceStack& stack, const ModelParams& params) {
  const ParamLayout layout = param_layout(params.config);
  check_shapes(stack, params, layout);
  FeatureMatrix fm{stack.n_slices, layout.feature_dim,
                   std::vector<double>(static_cast<std::size_t>(stack.n_slices) * layout.feature_dim)};
  SliceTrace trace;
  allocate(trace, layout);
  for (int s = 0; s < stack.n_slices; ++s) {
    forward_slice(stack.slice(s), layout, params.values.data(), trace,
                  fm.values.data() + static_cast<std::size_t>(s) * layout.feature_dim);
  }
  return fm;
}

std::vector<int> activation_pattern(const SliceStack& stack, const ModelParams& params) {
  const ParamLayout layout = param_layout(params.config);
  check_shapes(stack, params, layout);
  FeatureMatrix fm{stack.n_slices, layout.feature_dim,
                   std::vector<double>(static_cast<std::size_t>(stack.n_slices) * layout.feature_dim)};
  SliceTrace trace;
  allocate(trace, layout);
  std::vector<int> pattern;
  for (int s = 0; s < stack.n_slices; ++s) {
    forward_slice(stack.slice(s), layout, params.values.data(), trace,
                  fm.values.data() + static_cast<std::size_t>(s) * layout.feature_dim);
    for (const auto& act : trace.act) {
      for (double a : act) pattern.push_back(a > 0.0 ? 1 : 0);
    }
    for (const auto& arg : trace.pool_arg) pattern.insert(pattern.end(), arg.begin(), arg.end());
  }
  const MaxFeatures m = max_aggregate(fm);
  pattern.insert(pattern.end(), m.argmax.begin(), m.argmax.end());
  return pattern;
}

MaxFeatures max_aggregate(const FeatureMatrix& features) {
  if (features.n_slices < 1) throw Error(ErrorCode::ShapeMismatch, "no slices to aggregate");
  MaxFeatures m;
  m.values.assign(features.row(0).begin(), features.row(0).end());
  m.argmax.assign(static_cast<std::size_t>(features.dim), 0);
  for (int s = 1; s < features.n_slices; ++s) {
    const auto row = features.row(s);
    for (int d = 0; d < features.dim; ++d) {
      if (row[static_cast<std::size_t>(d)] > m.values[static_cast<std::size_t>(d)]) {
        m.values[static_cast<std::size_t>(d)] = row[static_cast<std::size_t>(d)];
        m.argmax[static_cast<std::size_t>(d)] = s;
      }
    }
  }
  return m;
}

Logits head_forward(std::span<const double> zmax, const ModelParams& params) {
  const ParamLayout layout = param_layout(params.config);
  if (zmax.size() != static_cast<std::size_t>(layout.feature_dim) ||
      params.values.size() != layout.total) {
    throw Error(ErrorCode::ShapeMismatch, "feature vector does not match head");
  }
  const double* w = params.values.data() + layout.head_weight;
  const double* b = params.values.data() + layout.head_bias;
  Logits l{b[0], b[1]};
  for (std::size_t d = 0; d < zmax.size(); ++d) {
    l.severity += w[2 * d] * zmax[d];
    l.positivity += w[2 * d + 1] * zmax[d];
  }
  return l;
}

double sigmoid(double logit) {
  if (logit >= 0.0) return 1.0 / (1.0 + std::exp(-logit));
  const double e = std::exp(logit);
  return e / (1.0 + e);
}

double loss_bce(Logits logits, LabelPair target) {
  // -(y log s(z) + (1-y) log(1-s(z))) = softplus(z) - y z
  return (softplus(logits.severity) - target.severe * logits.severity) +
         (softplus(logits.positivity) - target.covid * logits.positivity);
}

ProbPair predict_stack(const SliceStack& stack, const ModelParams& params) {
  const MaxFeatures zmax = max_aggregate(encode_slices(stack, params));
  const Logits l = head_forward(zmax.values, params);
  constexpr double lo = std::numeric_limits<double>::denorm_min();
  const double hi = std::nextafter(1.0, 0.0);
  return {std::clamp(sigmoid(l.severity), lo, hi), std::clamp(sigmoid(l.positivity), lo, hi)};
}

Gradient backward(const SliceStack& stack, LabelPair target, const ModelParams& params) {
  const ParamLayout layout = param_layout(params.config);
  check_shapes(stack, params, layout);
  const int dim = layout.feature_dim;

  FeatureMatrix fm{stack.n_slices, dim,
                   std::vector<double>(static_cast<std::size_t>(stack.n_slices) * dim)};
  std::vector<SliceTrace> traces(static_cast<std::size_t>(stack.n_slices));
  for (int s = 0; s < stack.n_slices; ++s) {
    allocate(traces[static_cast<std::size_t>(s)], layout);
    forward_slice(stack.slice(s), layout, params.values.data(), traces[static_cast<std::size_t>(s)],
                  fm.values.data() + static_cast<std::size_t>(s) * dim);
  }
  const MaxFeatures zmax = max_aggregate(fm);
  const Logits logits = head_forward(zmax.values, params);

  Gradient g;
  g.loss = loss_bce(logits, target);
  g.values.assign(layout.total, 0.0);

  const double ds = sigmoid(logits.severity) - target.severe;
  const double dp = sigmoid(logits.positivity) - target.covid;
  const double* w = params.values.data() + layout.head_weight;
  g.values[layout.head_bias] = ds;
  g.values[layout.head_bias + 1] = dp;

  // Feature gradients grouped by the slice that owns each maximum.
  std::vector<double> dfeat(static_cast<std::size_t>(stack.n_slices) * dim, 0.0);
  std::set<int> active;
  for (int d = 0; d < dim; ++d) {
    const std::size_t du = static_cast<std::size_t>(d);
    g.values[layout.head_weight + 2 * du] = ds * zmax.values[du];
    g.values[layout.head_weight + 2 * du + 1] = dp * zmax.values[du];
    const int s = zmax.argmax[du];
    dfeat[static_cast<std::size_t>(s) * dim + du] = w[2 * du] * ds + w[2 * du + 1] * dp;
    active.insert(s);
  }
  for (int s : active) {
    backward_slice(traces[static_cast<std::size_t>(s)], layout, params.values.data(),
                   std::span(dfeat).subspan(static_cast<std::size_t>(s) * dim, static_cast<std::size_t>(dim)),
                   g.values.data());
  }
  return g;
}

void sgd_step(ModelParams& params, std::span<const double> grad, double lr, double momentum,
              SgdState& state) {
  if (!(lr > 0.0) || momentum < 0.0 || momentum >= 1.0) {
    throw Error(ErrorCode::InvalidArgument, "sgd needs lr > 0 and 0 <= momentum < 1");
  }
  if (grad.size() != params.values.size()) {
    throw Error(ErrorCode::ShapeMismatch, "gradient does not match parameters");
  }
  if (state.velocity.size() != params.values.size()) state.velocity.assign(params.values.size(), 0.0);
  for (std::size_t i = 0; i < grad.size(); ++i) {
    state.velocity[i] = momentum * state.velocity[i] + grad[i];
    params.values[i] -= lr * state.velocity[i];
  }
}

}  // namespace ctsev
