#include "ctsev/training.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include "ctsev/error.hpp"
#include "ctsev/manifest.hpp"
#include "ctsev/text.hpp"

namespace ctsev {

TrainConfig TrainConfig::desk_scale() {
  TrainConfig c;
  c.preprocess.precrop_hw = {28, 28};
  c.augment.crop_hw = {24, 24};
  c.encoder_a = EncoderConfig::for_variant(Variant::A, c.augment.crop_hw);
  c.encoder_a.channels = {4, 8, 16};
  c.encoder_b = EncoderConfig::for_variant(Variant::B, c.augment.crop_hw);
  c.encoder_b.channels = {4, 8};
  return c;
}

void TrainConfig::validate() const {
  augment.validate();
  encoder_a.validate();
  encoder_b.validate();
  if (encoder_a.variant != Variant::A || encoder_b.variant != Variant::B) {
    throw Error(ErrorCode::InvalidArgument, "encoder_a / encoder_b must be variants A / B");
  }
  if (encoder_a.in_hw != augment.crop_hw || encoder_b.in_hw != augment.crop_hw) {
    throw Error(ErrorCode::InvalidArgument, "encoder input size must equal the crop size");
  }
  if (augment.crop_hw.height > preprocess.precrop_hw.height ||
      augment.crop_hw.width > preprocess.precrop_hw.width) {
    throw Error(ErrorCode::CropTooLarge, "crop exceeds pre-crop resolution");
  }
  if (preprocess.n_slices < 1) throw Error(ErrorCode::InvalidArgument, "n_slices must be >= 1");
  if (!(preprocess.window.width > 0.0)) throw Error(ErrorCode::InvalidArgument, "window width must be > 0");
  if (!(optimizer.lr > 0.0) || optimizer.momentum < 0.0 || optimizer.momentum >= 1.0) {
    throw Error(ErrorCode::InvalidArgument, "optimizer needs lr > 0 and momentum in [0, 1)");
  }
  if (optimizer.epochs < 0 || optimizer.batch_size < 1) {
    throw Error(ErrorCode::InvalidArgument, "epochs must be >= 0 and batch_size >= 1");
  }
  if (n_splits < 1) throw Error(ErrorCode::InvalidArgument, "n_splits must be >= 1");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "val_fraction must lie in (0, 1)");
  }
}

int stratum(const LabeledCase& c) { return c.severe ? 2 : (c.covid_positive ? 1 : 0); }

SplitPlan make_splits(std::span<const LabeledCase> cases, int n_splits, double val_fraction,
                      std::uint64_t seed) {
  if (n_splits < 1) throw Error(ErrorCode::InvalidArgument, "n_splits must be >= 1");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "val_fraction must lie in (0, 1)");
  }
  if (cases.size() < 2) throw Error(ErrorCode::TooFewSubjects, "need at least two subjects");

  std::array<std::vector<std::size_t>, 3> strata;
  for (std::size_t i = 0; i < cases.size(); ++i) strata[static_cast<std::size_t>(stratum(cases[i]))].push_back(i);
  for (const auto& members : strata) {
    if (members.size() == 1) {
      throw Error(ErrorCode::TooFewSubjects, "a class has a single member; it cannot be split");
    }
  }

  SplitPlan plan;
  plan.n_splits = n_splits;
  plan.seed = seed;
  for (int k = 0; k < n_splits; ++k) {
    Rng rng(derive_seed(seed, "split-shuffle", static_cast<std::uint64_t>(k)));
    std::vector<char> in_val(cases.size(), 0);
    for (auto members : strata) {
      if (members.empty()) continue;
      for (std::size_t i = members.size(); i > 1; --i) std::swap(members[i - 1], members[rng.below(i)]);
      const auto n = static_cast<long long>(members.size());
      const long long n_val = std::clamp<long long>(std::llround(static_cast<double>(n) * val_fraction), 1, n - 1);
      for (long long i = 0; i < n_val; ++i) in_val[members[static_cast<std::size_t>(i)]] = 1;
    }
    SplitAssignment split;
    for (std::size_t i = 0; i < cases.size(); ++i) {
      (in_val[i] ? split.val : split.train).push_back(cases[i].subject_id);
    }
    plan.splits.push_back(std::move(split));
  }
  return plan;
}

SamplerWeights balanced_weights(std::span<const LabeledCase> cases) {
  if (cases.empty()) throw Error(ErrorCode::EmptyInput, "no cases to weight");
  std::size_t severe = 0;
  for (const auto& c : cases) severe += c.severe ? 1 : 0;
  const std::size_t mild = cases.size() - severe;
  SamplerWeights w;
  for (const auto& c : cases) {
    w.subject_ids.push_back(c.subject_id);
    w.weights.push_back(1.0 / static_cast<double>(c.severe ? severe : mild));
  }
  return w;
}

std::vector<std::size_t> weighted_draw_indices(const SamplerWeights& weights, int n, Rng& rng) {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "draw count must be >= 1");
  if (weights.weights.empty()) throw Error(ErrorCode::EmptyInput, "no weights to draw from");
  std::vector<double> cumulative(weights.weights.size());
  std::partial_sum(weights.weights.begin(), weights.weights.end(), cumulative.begin());
  const double total = cumulative.back();
  std::vector<std::size_t> out(static_cast<std::size_t>(n));
  for (auto& o : out) {
    const double u = rng.uniform() * total;
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    o = std::min(static_cast<std::size_t>(it - cumulative.begin()), cumulative.size() - 1);
  }
  return out;
}

std::vector<std::string> weighted_draw(const SamplerWeights& weights, int n, Rng& rng) {
  std::vector<std::string> ids;
  for (std::size_t i : weighted_draw_indices(weights, n, rng)) ids.push_back(weights.subject_ids[i]);
  return ids;
}

StackStore StackStore::from_directory(const std::filesystem::path& data_dir, PreprocessConfig config) {
  const Manifest manifest = read_manifest(data_dir);
  const auto labels = read_labels(read_text_file(data_dir / manifest.labels_file));
  std::map<std::string, LabeledCase, std::less<>> by_id;
  for (const auto& l : labels) by_id.emplace(l.subject_id, l);

  StackStore store(config);
  for (const auto& entry : manifest.volumes) {
    const auto it = by_id.find(entry.subject_id);
    if (it == by_id.end()) {
      throw Error(ErrorCode::MalformedRow, "no label for subject " + entry.subject_id);
    }
    Volume v = read_mha_file(data_dir / entry.file);
    v.subject_id = entry.subject_id;
    store.add(it->second, config.apply(v));
  }
  return store;
}

void StackStore::add(LabeledCase label, SliceStack stack) {
  if (index_.count(label.subject_id) != 0) throw Error(ErrorCode::DuplicateSubject, label.subject_id);
  stack.subject_id = label.subject_id;
  index_.emplace(label.subject_id, cases_.size());
  cases_.push_back(std::move(label));
  stacks_.push_back(std::move(stack));
}

const LabeledCase& StackStore::label(const std::string& id) const {
  const auto it = index_.find(id);
  if (it == index_.end()) throw Error(ErrorCode::InvalidArgument, "unknown subject " + id);
  return cases_[it->second];
}

const SliceStack& StackStore::stack(const std::string& id) const {
  const auto it = index_.find(id);
  if (it == index_.end()) throw Error(ErrorCode::InvalidArgument, "unknown subject " + id);
  return stacks_[it->second];
}

std::vector<LabeledCase> StackStore::select(std::span<const std::string> ids) const {
  std::vector<LabeledCase> out;
  out.reserve(ids.size());
  for (const auto& id : ids) out.push_back(label(id));
  return out;
}

AucPair safe_auc(std::span<const Prediction> predictions, std::span<const LabeledCase> labels) {
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<ScoredCase> covid;
  std::vector<ScoredCase> severity;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    covid.push_back({labels[i].subject_id, predictions[i].prob_covid, labels[i].covid_positive});
    if (labels[i].covid_positive) {
      severity.push_back({labels[i].subject_id, predictions[i].prob_severe, labels[i].severe});
    }
  }
  const auto auc_or_nan = [&](const std::vector<ScoredCase>& c) {
    try {
      return roc_auc(c);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::DegenerateLabels) return nan;
      throw;
    }
  };
  return {auc_or_nan(severity), auc_or_nan(covid)};
}

namespace {

LabelPair targets(const LabeledCase& c) {
  return {c.severe ? 1.0 : 0.0, c.covid_positive ? 1.0 : 0.0};
}

}  // namespace

std::vector<Prediction> predict_store(std::span<const std::string> ids, const StackStore& store,
                                      const ModelParams& params, Hw crop, bool tta) {
  std::vector<Prediction> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    const ProbPair p = predict_with_tta(store.stack(id), params, crop, tta);
    out.push_back({id, p.severe, p.covid});
  }
  return out;
}

VariantResult train_variant(const SplitAssignment& split, const StackStore& store,
                            const TrainConfig& config, Variant variant, std::uint64_t seed) {
  config.validate();
  if (split.train.empty()) throw Error(ErrorCode::EmptyInput, "split has no training subjects");
  const std::uint64_t tag = variant == Variant::A ? 0 : 1;
  Rng init_rng(derive_seed(seed, "init", tag));
  Rng sampler_rng(derive_seed(seed, "sampler", tag));
  Rng aug_rng(derive_seed(seed, "augment", tag));

  const EncoderConfig& enc = variant == Variant::A ? config.encoder_a : config.encoder_b;
  VariantResult result;
  result.checkpoint.params = init_params(enc, init_rng);
  ModelParams& params = result.checkpoint.params;
  SgdState& state = result.checkpoint.optimizer;
  state.velocity.assign(params.values.size(), 0.0);

  const auto train_cases = store.select(split.train);
  const auto val_cases = store.select(split.val);
  const SamplerWeights weights = balanced_weights(train_cases);
  const int per_epoch = static_cast<int>(train_cases.size());
  const int batch_size = config.optimizer.batch_size;
  const Hw crop = config.augment.crop_hw;

  std::vector<SliceStack> batch;
  std::vector<LabelPair> batch_targets;
  std::vector<double> grad(params.values.size());
  for (int epoch = 1; epoch <= config.optimizer.epochs; ++epoch) {
    const auto draws = weighted_draw_indices(weights, per_epoch, sampler_rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < draws.size(); start += static_cast<std::size_t>(batch_size)) {
      const std::size_t end = std::min(draws.size(), start + static_cast<std::size_t>(batch_size));
      batch.clear();
      batch_targets.clear();
      for (std::size_t i = start; i < end; ++i) {
        const LabeledCase& c = train_cases[draws[i]];
        batch.push_back(augment_for_training(store.stack(c.subject_id), config.augment, aug_rng));
        batch_targets.push_back(targets(c));
      }
      if (config.augment.uses_mixup()) {
        std::vector<std::size_t> partner(batch.size());
        std::iota(partner.begin(), partner.end(), std::size_t{0});
        for (std::size_t i = partner.size(); i > 1; --i) std::swap(partner[i - 1], partner[aug_rng.below(i)]);
        std::vector<SliceStack> mixed;
        std::vector<LabelPair> mixed_targets;
        for (std::size_t i = 0; i < batch.size(); ++i) {
          MixupResult m = mixup_pair(batch[i], batch_targets[i], batch[partner[i]],
                                     batch_targets[partner[i]], config.augment.mixup_alpha, aug_rng);
          mixed.push_back(std::move(m.stack));
          mixed_targets.push_back(m.labels);
        }
        batch = std::move(mixed);
        batch_targets = std::move(mixed_targets);
      }

      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t i = 0; i < batch.size(); ++i) {
        const Gradient g = backward(batch[i], batch_targets[i], params);
        if (!std::isfinite(g.loss)) {
          throw Error(ErrorCode::DivergedLoss, "non-finite loss at epoch " + std::to_string(epoch));
        }
        loss_sum += g.loss;
        for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += g.values[k];
      }
      const double scale = 1.0 / static_cast<double>(batch.size());
      for (double& v : grad) v *= scale;
      sgd_step(params, grad, config.optimizer.lr, config.optimizer.momentum, state);
      if (!params.all_finite()) {
        throw Error(ErrorCode::DivergedLoss, "non-finite parameters at epoch " + std::to_string(epoch));
      }
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.loss = loss_sum / static_cast<double>(draws.size());
    entry.val_auc = safe_auc(predict_store(split.val, store, params, crop, false), val_cases);
    result.log.push_back(entry);
  }

  const auto val_predictions = predict_store(split.val, store, params, crop, config.tta_enabled());
  result.val_auc = safe_auc(val_predictions, val_cases);
  return result;
}

SplitResult train_split(const SplitAssignment& split, const StackStore& store,
                        const TrainConfig& config, std::uint64_t seed) {
  SplitResult r;
  r.a = train_variant(split, store, config, Variant::A, seed);
  r.b = train_variant(split, store, config, Variant::B, seed);

  std::vector<Prediction> averaged;
  for (const auto& id : split.val) {
    const auto& s = store.stack(id);
    const ProbPair pa = predict_with_tta(s, r.a.checkpoint.params, config.augment.crop_hw, config.tta_enabled());
    const ProbPair pb = predict_with_tta(s, r.b.checkpoint.params, config.augment.crop_hw, config.tta_enabled());
    const std::array<ProbPair, 2> pair{pa, pb};
    const ProbPair m = mean_probability(pair);
    averaged.push_back({id, m.severe, m.covid});
  }
  r.val_auc = safe_auc(averaged, store.select(split.val));
  return r;
}

TrainingRun train_bundle(const StackStore& store, const TrainConfig& config, std::uint64_t seed,
                         const ProgressFn& progress) {
  config.validate();
  TrainingRun run;
  run.plan = make_splits(store.cases(), config.n_splits, config.val_fraction, derive_seed(seed, "splits"));
  run.bundle.preprocess = store.config();
  run.bundle.crop_hw = config.augment.crop_hw;
  run.bundle.tta_enabled = config.tta_enabled();
  for (int k = 0; k < config.n_splits; ++k) {
    SplitResult r = train_split(run.plan.splits[static_cast<std::size_t>(k)], store, config,
                                derive_seed(seed, "train-split", static_cast<std::uint64_t>(k)));
    if (progress) progress(k, r);
    run.bundle.splits.push_back({r.a.checkpoint, r.b.checkpoint});
    run.splits.push_back(std::move(r));
  }
  return run;
}

std::string training_log_csv(std::span<const SplitResult> splits) {
  std::string out = "split,variant,epoch,loss,val_auc_severity,val_auc_covid\n";
  for (std::size_t s = 0; s < splits.size(); ++s) {
    for (const VariantResult* v : {&splits[s].a, &splits[s].b}) {
      for (const auto& e : v->log) {
        out += std::to_string(s + 1) + "," + std::string(to_string(v->checkpoint.params.config.variant)) +
               "," + std::to_string(e.epoch) + "," + text::format_double(e.loss) + "," +
               text::format_double(e.val_auc.severity) + "," + text::format_double(e.val_auc.covid) + "\n";
      }
    }
  }
  return out;
}

}  // namespace ctsev
