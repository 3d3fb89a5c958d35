#include <doctest.h>

#include <cmath>

#include "ctsev/error.hpp"
#include "ctsev/metrics.hpp"
#include "support.hpp"

using namespace ctsev;

namespace {

std::vector<ScoredCase> scored(std::vector<double> scores, std::vector<int> labels) {
  std::vector<ScoredCase> out;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out.push_back({"c" + std::to_string(i), scores[i], labels[i] != 0});
  }
  return out;
}

std::vector<ScoredCase> random_instance(Rng& rng) {
  const int n = 2 + static_cast<int>(rng.below(49));
  std::vector<ScoredCase> c;
  // Coarse score levels so ties are common.
  const int levels = 1 + static_cast<int>(rng.below(12));
  for (int i = 0; i < n; ++i) {
    c.push_back({"c" + std::to_string(i), static_cast<double>(rng.below(static_cast<std::uint64_t>(levels))) / levels,
                 rng.bernoulli(0.4)});
  }
  c[0].label = true;
  c[1].label = false;
  return c;
}

}  // namespace

TEST_CASE("hand cases") {
  CHECK(roc_auc(scored({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1})) == 0.75);
  CHECK(roc_auc(scored({0.1, 0.2, 0.8, 0.9}, {0, 0, 1, 1})) == 1.0);
  CHECK(roc_auc(scored({0.3, 0.3, 0.3, 0.3, 0.3}, {0, 1, 0, 1, 1})) == 0.5);
  CHECK(roc_auc(scored({0.9, 0.8, 0.1}, {0, 1, 1})) == 0.0);
}

TEST_CASE("degenerate labels") {
  try {
    roc_auc(scored({0.1, 0.2}, {1, 1}));
    FAIL("expected DegenerateLabels");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateLabels);
  }
  CHECK_THROWS_AS(roc_auc({}), Error);
  CHECK_THROWS_AS(roc_auc(scored({NAN, 0.2}, {1, 0})), Error);
}

TEST_CASE("sort-based AUC equals the pair-count oracle") {
  Rng rng(derive_seed(1, "test-auc"));
  for (int i = 0; i < 1000; ++i) {
    const auto c = random_instance(rng);
    REQUIRE(roc_auc(c) == testing::brute_force_auc(c));
  }
}

TEST_CASE("invariance under increasing transforms and label flips") {
  Rng rng(2);
  for (int i = 0; i < 300; ++i) {
    auto c = random_instance(rng);
    const double base = roc_auc(c);
    auto linear = c, cubic = c, flipped = c;
    for (auto& x : linear) x.score = 2.0 * x.score + 1.0;
    for (auto& x : cubic) x.score = x.score * x.score * x.score;
    for (auto& x : flipped) x.label = !x.label;
    CHECK(roc_auc(linear) == base);
    CHECK(roc_auc(cubic) == base);
    CHECK(roc_auc(flipped) == doctest::Approx(1.0 - base).epsilon(1e-15));
  }
}

TEST_CASE("evaluate") {
  const std::vector<LabeledCase> labels{
      {"a", false, false}, {"b", false, true}, {"c", true, true}, {"d", false, true}, {"e", true, true}};
  std::vector<Prediction> perfect;
  for (const auto& l : labels) perfect.push_back({l.subject_id, l.severe ? 1.0 : 0.0, l.covid_positive ? 1.0 : 0.0});
  const AucPair p = evaluate(perfect, labels);
  CHECK(p.severity == 1.0);
  CHECK(p.covid == 1.0);

  std::vector<Prediction> flat;
  for (const auto& l : labels) flat.push_back({l.subject_id, 0.3, 0.3});
  const AucPair f = evaluate(flat, labels);
  CHECK(f.severity == 0.5);
  CHECK(f.covid == 0.5);

  // Severity among positives ignores the negative subject's score.
  std::vector<Prediction> tweak = perfect;
  tweak[0].prob_severe = 1.0;
  CHECK(evaluate(tweak, labels).severity == 1.0);
  CHECK(evaluate(tweak, labels, false).severity == 5.0 / 6.0);

  std::vector<Prediction> missing(perfect.begin(), perfect.end() - 1);
  try {
    evaluate(missing, labels);
    FAIL("expected MissingPrediction");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingPrediction);
  }

  const AucPair csv = evaluate(write_predictions(perfect), write_labels(labels));
  CHECK(csv.severity == 1.0);
  CHECK(csv.covid == 1.0);
}
