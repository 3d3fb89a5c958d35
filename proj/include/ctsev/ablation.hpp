#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ctsev/augment.hpp"
#include "ctsev/training.hpp"

namespace ctsev {

/// AUC severity per encoder variant for one augmentation set. Validation
/// values average the per-split scores; test values score the five-split
/// mean probability of that variant. NaN when unavailable.
struct AblationRow {
  AugSet set = AugSet::Default;
  double val_a = 0.0;
  double val_b = 0.0;
  double test_a = 0.0;
  double test_b = 0.0;
};

using AblationProgressFn = std::function<void(AugSet set, int split, const SplitResult&)>;

/// Trains Default, DefaultStrong and DefaultStrongMixup with the same seed
/// (hence the same splits); the TTA row re-scores the DefaultStrongMixup
/// models with test-time augmentation. `test` may be null. Finished runs are
/// appended to `runs` when it is non-null.
std::vector<AblationRow> run_ablation(const StackStore& train, const StackStore* test,
                                      TrainConfig config, std::uint64_t seed,
                                      const AblationProgressFn& progress = {},
                                      std::vector<TrainingRun>* runs = nullptr);

std::string format_ablation_table(const std::vector<AblationRow>& rows);

}  // namespace ctsev
