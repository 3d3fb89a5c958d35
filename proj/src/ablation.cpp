#include "ctsev/ablation.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

namespace ctsev {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double nan_mean(const std::vector<double>& values) {
  double sum = 0.0;
  int n = 0;
  for (double v : values) {
    if (std::isnan(v)) continue;
    sum += v;
    ++n;
  }
  return n == 0 ? kNaN : sum / n;
}

const char* row_label(AugSet set) {
  switch (set) {
    case AugSet::Default: return "Default";
    case AugSet::DefaultStrong: return "Default + Strong";
    case AugSet::DefaultStrongMixup: return "Default + Strong + Mixup";
    case AugSet::DefaultStrongMixupTTA: return "Default + Strong + Mixup + TTA";
  }
  return "?";
}

// Validation AUC severity of one variant, averaged over splits.
double val_severity(const TrainingRun& run, const StackStore& store, int variant, Hw crop, bool tta) {
  std::vector<double> per_split;
  for (std::size_t k = 0; k < run.splits.size(); ++k) {
    const auto& split = run.plan.splits[k];
    const auto& params = run.bundle.splits[k][static_cast<std::size_t>(variant)].params;
    const auto preds = predict_store(split.val, store, params, crop, tta);
    per_split.push_back(safe_auc(preds, store.select(split.val)).severity);
  }
  return nan_mean(per_split);
}

// Test AUC severity of one variant's five-split mean probability.
double test_severity(const TrainingRun& run, const StackStore& test, int variant, Hw crop, bool tta) {
  std::vector<std::string> ids;
  for (const auto& c : test.cases()) ids.push_back(c.subject_id);
  std::vector<Prediction> mean(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) mean[i] = {ids[i], 0.0, 0.0};
  for (const auto& split : run.bundle.splits) {
    const auto preds = predict_store(ids, test, split[static_cast<std::size_t>(variant)].params, crop, tta);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      mean[i].prob_severe += preds[i].prob_severe;
      mean[i].prob_covid += preds[i].prob_covid;
    }
  }
  const double n = static_cast<double>(run.bundle.splits.size());
  for (auto& p : mean) {
    p.prob_severe /= n;
    p.prob_covid /= n;
  }
  return safe_auc(mean, test.cases()).severity;
}

AblationRow score(AugSet set, const TrainingRun& run, const StackStore& train, const StackStore* test,
                  Hw crop, bool tta) {
  AblationRow row;
  row.set = set;
  row.val_a = val_severity(run, train, 0, crop, tta);
  row.val_b = val_severity(run, train, 1, crop, tta);
  row.test_a = test ? test_severity(run, *test, 0, crop, tta) : kNaN;
  row.test_b = test ? test_severity(run, *test, 1, crop, tta) : kNaN;
  return row;
}

}  // namespace

std::vector<AblationRow> run_ablation(const StackStore& train, const StackStore* test,
                                      TrainConfig config, std::uint64_t seed,
                                      const AblationProgressFn& progress,
                                      std::vector<TrainingRun>* runs) {
  std::vector<AblationRow> rows;
  const Hw crop = config.augment.crop_hw;
  for (AugSet set : {AugSet::Default, AugSet::DefaultStrong, AugSet::DefaultStrongMixup}) {
    config.augment.set_id = set;
    TrainingRun run = train_bundle(train, config, seed, [&](int k, const SplitResult& r) {
      if (progress) progress(set, k, r);
    });
    rows.push_back(score(set, run, train, test, crop, false));
    if (set == AugSet::DefaultStrongMixup) {
      rows.push_back(score(AugSet::DefaultStrongMixupTTA, run, train, test, crop, true));
    }
    if (runs) runs->push_back(std::move(run));
  }
  return rows;
}

std::string format_ablation_table(const std::vector<AblationRow>& rows) {
  const auto cell = [](double v) {
    char buf[16];
    if (std::isnan(v)) return std::string("     -");
    std::snprintf(buf, sizeof buf, "%6.4f", v);
    return std::string(buf);
  };
  std::string out = "AUC severity by augmentation set\n";
  out += "augmentation                      val A   val B  test A  test B\n";
  for (const auto& r : rows) {
    char label[40];
    std::snprintf(label, sizeof label, "%-32s", row_label(r.set));
    out += std::string(label) + cell(r.val_a) + "  " + cell(r.val_b) + "  " + cell(r.test_a) + "  " +
           cell(r.test_b) + "\n";
  }
  return out;
}

}  // namespace ctsev
