#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ctsev/augment.hpp"
#include "ctsev/checkpoint.hpp"
#include "ctsev/ensemble.hpp"
#include "ctsev/metrics.hpp"
#include "ctsev/model.hpp"
#include "ctsev/preprocess.hpp"
#include "ctsev/volume_io.hpp"

namespace ctsev {

struct OptimizerConfig {
  double lr = 0.01;
  double momentum = 0.9;
  int epochs = 30;
  int batch_size = 8;
};

struct TrainConfig {
  PreprocessConfig preprocess;
  AugConfig augment;
  EncoderConfig encoder_a = EncoderConfig::for_variant(Variant::A, {224, 224});
  EncoderConfig encoder_b = EncoderConfig::for_variant(Variant::B, {224, 224});
  OptimizerConfig optimizer;
  int n_splits = 5;
  double val_fraction = 0.2;

  /// TTA at validation and prediction time follows the augmentation set.
  bool tta_enabled() const { return augment.uses_tta(); }
  void validate() const;

  /// Small-CPU preset for 64x64 phantoms: 28x28 pre-crop, 24x24 crops,
  /// encoders A {4, 8, 16} and B {4, 8}.
  static TrainConfig desk_scale();
};

struct SplitAssignment {
  std::vector<std::string> train;
  std::vector<std::string> val;
};

struct SplitPlan {
  int n_splits = 0;
  std::uint64_t seed = 0;
  std::vector<SplitAssignment> splits;
};

/// Stratification class of a case: 0 negative, 1 positive non-severe, 2 severe.
int stratum(const LabeledCase& c);

/// n_splits independently shuffled train/val partitions, stratified so every
/// present class lands in both train and val. Lists keep input order.
SplitPlan make_splits(std::span<const LabeledCase> cases, int n_splits, double val_fraction,
                      std::uint64_t seed);

/// Per-subject weight 1 / count(class) with class = severity bit.
struct SamplerWeights {
  std::vector<std::string> subject_ids;
  std::vector<double> weights;
};

SamplerWeights balanced_weights(std::span<const LabeledCase> cases);
/// i.i.d. draws with replacement, probability proportional to weight.
std::vector<std::size_t> weighted_draw_indices(const SamplerWeights& weights, int n, Rng& rng);
std::vector<std::string> weighted_draw(const SamplerWeights& weights, int n, Rng& rng);

/// Preprocessed (pre-crop) stacks and labels, keyed by subject id.
class StackStore {
 public:
  explicit StackStore(PreprocessConfig config) : config_(config) {}

  /// Reads manifest.json and its label CSV, preprocessing every volume.
  static StackStore from_directory(const std::filesystem::path& data_dir, PreprocessConfig config);

  void add(LabeledCase label, SliceStack stack);

  const PreprocessConfig& config() const { return config_; }
  const std::vector<LabeledCase>& cases() const { return cases_; }
  const LabeledCase& label(const std::string& id) const;
  const SliceStack& stack(const std::string& id) const;
  std::vector<LabeledCase> select(std::span<const std::string> ids) const;

 private:
  PreprocessConfig config_;
  std::vector<LabeledCase> cases_;
  std::map<std::string, std::size_t, std::less<>> index_;
  std::vector<SliceStack> stacks_;
};

struct EpochLog {
  int epoch = 0;
  double loss = 0.0;
  AucPair val_auc;  // NaN when the validation set lacks a class
};

struct VariantResult {
  Checkpoint checkpoint;
  std::vector<EpochLog> log;
  AucPair val_auc;
};

struct SplitResult {
  VariantResult a;
  VariantResult b;
  AucPair val_auc;  // the A/B probability average on the validation set
};

/// AUC pair of per-subject probabilities against labels; NaN components
/// where the subset is single-class.
AucPair safe_auc(std::span<const Prediction> predictions, std::span<const LabeledCase> labels);

/// Single-model predictions for the given subjects of a store.
std::vector<Prediction> predict_store(std::span<const std::string> ids, const StackStore& store,
                                      const ModelParams& params, Hw crop, bool tta);

/// Trains one encoder on the split's training subjects with balanced
/// sampling and the configured augmentation set. Deterministic in seed.
VariantResult train_variant(const SplitAssignment& split, const StackStore& store,
                            const TrainConfig& config, Variant variant, std::uint64_t seed);

SplitResult train_split(const SplitAssignment& split, const StackStore& store,
                        const TrainConfig& config, std::uint64_t seed);

struct TrainingRun {
  SplitPlan plan;
  std::vector<SplitResult> splits;
  EnsembleBundle bundle;
};

using ProgressFn = std::function<void(int split, const SplitResult&)>;

/// Splits, then trains every (split, variant) pair. Split k uses the seed
/// derive_seed(seed, "train-split", k).
TrainingRun train_bundle(const StackStore& store, const TrainConfig& config, std::uint64_t seed,
                         const ProgressFn& progress = {});

/// CSV `split,variant,epoch,loss,val_auc_severity,val_auc_covid`.
std::string training_log_csv(std::span<const SplitResult> splits);

}  // namespace ctsev
