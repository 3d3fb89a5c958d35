#include "ctsev/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <unordered_map>

#include "ctsev/error.hpp"

namespace ctsev {

double roc_auc(std::span<const ScoredCase> cases) {
  std::uint64_t positives = 0;
  for (const auto& c : cases) {
    if (!std::isfinite(c.score)) throw Error(ErrorCode::InvalidArgument, "non-finite score");
    positives += c.label ? 1 : 0;
  }
  const std::uint64_t negatives = cases.size() - positives;
  if (positives == 0 || negatives == 0) {
    throw Error(ErrorCode::DegenerateLabels, "AUC needs both classes");
  }

  std::vector<std::size_t> order(cases.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return cases[a].score < cases[b].score; });

  // Walk groups of equal scores in ascending order; each positive beats
  // every negative below its group and ties with the negatives inside it.
  std::uint64_t half_units = 0;
  std::uint64_t negatives_below = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    std::uint64_t pos = 0;
    std::uint64_t neg = 0;
    while (j < order.size() && cases[order[j]].score == cases[order[i]].score) {
      (cases[order[j]].label ? pos : neg) += 1;
      ++j;
    }
    half_units += 2 * pos * negatives_below + pos * neg;
    negatives_below += neg;
    i = j;
  }
  return static_cast<double>(half_units) /
         (2.0 * static_cast<double>(positives) * static_cast<double>(negatives));
}

AucPair evaluate(std::span<const Prediction> predictions, std::span<const LabeledCase> labels,
                 bool severity_among_positives) {
  std::unordered_map<std::string, const Prediction*> by_id;
  for (const auto& p : predictions) by_id.emplace(p.subject_id, &p);

  std::vector<ScoredCase> covid;
  std::vector<ScoredCase> severity;
  for (const auto& l : labels) {
    const auto it = by_id.find(l.subject_id);
    if (it == by_id.end()) throw Error(ErrorCode::MissingPrediction, l.subject_id);
    covid.push_back({l.subject_id, it->second->prob_covid, l.covid_positive});
    if (!severity_among_positives || l.covid_positive) {
      severity.push_back({l.subject_id, it->second->prob_severe, l.severe});
    }
  }
  return {roc_auc(severity), roc_auc(covid)};
}

AucPair evaluate(std::string_view predictions_csv, std::string_view labels_csv,
                 bool severity_among_positives) {
  const auto predictions = read_predictions(predictions_csv);
  const auto labels = read_labels(labels_csv);
  return evaluate(predictions, labels, severity_among_positives);
}

}  // namespace ctsev
