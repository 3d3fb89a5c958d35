#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ctsev {

struct Prediction {
  std::string subject_id;
  double prob_severe = 0.5;
  double prob_covid = 0.5;

  bool operator==(const Prediction&) const = default;
};

/// CSV with header `PatientID,probCOVID,probSevere`, LF line endings and
/// probabilities in shortest round-trip notation.
std::string write_predictions(std::span<const Prediction> predictions);
std::vector<Prediction> read_predictions(std::string_view csv);

}  // namespace ctsev
