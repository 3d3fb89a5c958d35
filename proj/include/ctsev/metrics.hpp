#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ctsev/prediction.hpp"
#include "ctsev/volume_io.hpp"

namespace ctsev {

struct ScoredCase {
  std::string subject_id;
  double score = 0.0;
  bool label = false;
};

/// Mann-Whitney ROC-AUC: fraction of (positive, negative) pairs ordered
/// correctly, ties counted as one half. Sort-based, O(n log n). The pair
/// count is accumulated in integer half-units, so the result is exact.
double roc_auc(std::span<const ScoredCase> cases);

struct AucPair {
  double severity = 0.0;
  double covid = 0.0;
};

/// auc_covid over every labeled subject; auc_severity over the COVID
/// positives when severity_among_positives is set, otherwise over all.
AucPair evaluate(std::span<const Prediction> predictions, std::span<const LabeledCase> labels,
                 bool severity_among_positives = true);
AucPair evaluate(std::string_view predictions_csv, std::string_view labels_csv,
                 bool severity_among_positives = true);

}  // namespace ctsev
