#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ctsev/checkpoint.hpp"
#include "ctsev/manifest.hpp"
#include "ctsev/model.hpp"
#include "ctsev/prediction.hpp"
#include "ctsev/preprocess.hpp"

namespace ctsev {

/// Trained models of every split: index 0 is variant A, index 1 variant B.
struct EnsembleBundle {
  PreprocessConfig preprocess;
  Hw crop_hw{224, 224};
  bool tta_enabled = true;
  std::vector<std::array<Checkpoint, 2>> splits;

  /// Checks split count, variant order and that every encoder takes crop_hw.
  void validate() const;
};

/// Mean of predict_stack over the eight TTA views, or the center crop alone
/// when tta is false.
ProbPair predict_with_tta(const SliceStack& stack, const ModelParams& params, Hw crop_hw,
                          bool tta = true);

ProbPair mean_probability(std::span<const ProbPair> probs);

/// Mean over splits of the mean over the two variants of each split.
ProbPair combine_ensemble(std::span<const std::array<ProbPair, 2>> per_split);

/// Full pipeline on an already preprocessed (pre-crop) stack.
Prediction predict_stack_ensemble(const SliceStack& stack, const EnsembleBundle& bundle);
/// Preprocess with the bundle's window / slice count, then ensemble.
Prediction predict_subject(const Volume& volume, const EnsembleBundle& bundle);

struct BatchFailure {
  std::string subject_id;
  std::string message;
};

struct BatchResult {
  std::vector<Prediction> predictions;
  std::vector<BatchFailure> failures;
};

/// Predicts every manifest volume in manifest order and writes the
/// prediction CSV to out_path. Subjects whose file cannot be read or parsed
/// are skipped and reported in failures.
BatchResult predict_batch(const std::filesystem::path& data_dir, const Manifest& manifest,
                          const EnsembleBundle& bundle, const std::filesystem::path& out_path);

/// Layout: bundle.json plus split{1..n}/variant{A,B}.ckpt.
void write_bundle(const std::filesystem::path& dir, const EnsembleBundle& bundle);
EnsembleBundle read_bundle(const std::filesystem::path& dir);

}  // namespace ctsev
