#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "ctsev/error.hpp"
#include "ctsev/training.hpp"
#include "support.hpp"

using namespace ctsev;

namespace {

std::vector<LabeledCase> make_cases(int n, int n_severe, int n_positive) {
  std::vector<LabeledCase> cases;
  for (int i = 0; i < n; ++i) cases.push_back({"s" + std::to_string(i), i < n_severe, i < n_positive});
  return cases;
}

double severe_share(const std::vector<std::string>& ids, const std::set<std::string>& severe) {
  std::size_t k = 0;
  for (const auto& id : ids) k += severe.count(id);
  return static_cast<double>(k) / static_cast<double>(ids.size());
}

// Toy stacks: a bright square marks severity, a mid-gray one positivity.
StackStore toy_store(int n, Hw hw, std::uint64_t seed) {
  PreprocessConfig pc;
  pc.n_slices = 4;
  pc.precrop_hw = hw;
  StackStore store(pc);
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    const bool positive = i % 2 == 0;
    const bool severe = i % 4 == 0;
    SliceStack s(pc.n_slices, hw.height, hw.width);
    for (double& v : s.data) v = 0.1 * rng.uniform();
    const double level = severe ? 0.9 : 0.5;
    if (positive) {
      const int z = static_cast<int>(rng.below(static_cast<std::uint64_t>(pc.n_slices)));
      for (int y = 3; y < hw.height - 3; ++y) {
        for (int x = 3; x < hw.width - 3; ++x) s.at(z, y, x) = level;
      }
    }
    store.add({"t" + std::to_string(i), severe, positive}, std::move(s));
  }
  return store;
}

TrainConfig toy_config() {
  TrainConfig c;
  c.preprocess.n_slices = 4;
  c.preprocess.precrop_hw = {16, 16};
  c.augment.crop_hw = {12, 12};
  c.augment.set_id = AugSet::Default;
  c.encoder_a = EncoderConfig::for_variant(Variant::A, {12, 12});
  c.encoder_a.channels = {4, 4, 8};
  c.encoder_b = EncoderConfig::for_variant(Variant::B, {12, 12});
  c.encoder_b.channels = {4, 8};
  c.optimizer.epochs = 2;
  c.optimizer.batch_size = 4;
  c.n_splits = 2;
  return c;
}

}  // namespace

TEST_CASE("ten subjects split eight to two") {
  // Two classes of five; a third class would force a third val member.
  const auto cases = make_cases(10, 0, 5);
  const SplitPlan plan = make_splits(cases, 5, 0.2, 3);
  REQUIRE(plan.splits.size() == 5);
  for (const auto& s : plan.splits) {
    CHECK(s.train.size() == 8);
    CHECK(s.val.size() == 2);
  }
  const SplitPlan again = make_splits(cases, 5, 0.2, 3);
  for (std::size_t k = 0; k < 5; ++k) {
    CHECK(again.splits[k].train == plan.splits[k].train);
    CHECK(again.splits[k].val == plan.splits[k].val);
  }
}

TEST_CASE("splits are stratified and leak-free") {
  const auto cases = make_cases(2000, 301, 1000);
  std::set<std::string> severe;
  for (const auto& c : cases) {
    if (c.severe) severe.insert(c.subject_id);
  }
  const SplitPlan plan = make_splits(cases, 5, 0.2, 17);
  std::set<std::vector<std::string>> distinct;
  for (const auto& s : plan.splits) {
    CHECK(std::abs(severe_share(s.val, severe) - 0.1505) <= 0.02);
    CHECK(std::abs(severe_share(s.train, severe) - 0.1505) <= 0.02);
    std::set<std::string> all(s.train.begin(), s.train.end());
    for (const auto& id : s.val) CHECK(all.insert(id).second);
    CHECK(all.size() == 2000);
    distinct.insert(s.val);
  }
  CHECK(distinct.size() == 5);
}

TEST_CASE("too few subjects") {
  CHECK_THROWS_AS(make_splits(make_cases(1, 0, 0), 5, 0.2, 1), Error);
  try {
    make_splits(make_cases(5, 1, 3), 5, 0.2, 1);
    FAIL("expected TooFewSubjects");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TooFewSubjects);
  }
}

TEST_CASE("balanced sampler weights") {
  const auto cases = make_cases(2000, 301, 1000);
  const SamplerWeights w = balanced_weights(cases);
  CHECK(w.weights[0] / w.weights[1999] == doctest::Approx(1699.0 / 301.0).epsilon(1e-14));
  CHECK(1699.0 / 301.0 == doctest::Approx(5.6445182724).epsilon(1e-10));

  for (const auto& uniform : {make_cases(6, 0, 3), make_cases(6, 3, 3)}) {
    const SamplerWeights u = balanced_weights(uniform);
    for (double x : u.weights) CHECK(x == u.weights[0]);
  }

  Rng rng(21);
  const auto idx = weighted_draw_indices(w, 100000, rng);
  const auto n_severe = std::count_if(idx.begin(), idx.end(), [](std::size_t i) { return i < 301; });
  CHECK(std::abs(static_cast<double>(n_severe) / 100000.0 - 0.5) < 0.01);

  const auto single = balanced_weights(make_cases(1, 0, 0));
  CHECK(weighted_draw(single, 7, rng) == std::vector<std::string>(7, "s0"));
}

TEST_CASE("zero epochs returns the initial parameters") {
  TrainConfig c = toy_config();
  c.optimizer.epochs = 0;
  const StackStore store = toy_store(8, {16, 16}, 1);
  SplitAssignment split;
  for (const auto& l : store.cases()) split.train.push_back(l.subject_id);
  const VariantResult r = train_variant(split, store, c, Variant::B, 99);
  Rng init_rng(derive_seed(99, "init", 1));
  CHECK(r.checkpoint.params == init_params(c.encoder_b, init_rng));
  CHECK(r.log.empty());
}

TEST_CASE("training fits a separable toy set") {
  TrainConfig c = toy_config();
  c.optimizer.epochs = 40;
  c.optimizer.lr = 0.05;
  c.augment.brightness = 0.0;
  c.augment.contrast = 0.0;
  const StackStore store = toy_store(20, {16, 16}, 2);
  SplitAssignment split;
  for (const auto& l : store.cases()) split.train.push_back(l.subject_id);
  const VariantResult r = train_variant(split, store, c, Variant::B, 5);
  REQUIRE(r.log.size() == 40);
  CHECK(r.log.back().loss < 0.1);
  CHECK(r.log.back().loss < r.log.front().loss);
}

TEST_CASE("training is bit-reproducible") {
  const TrainConfig c = toy_config();
  const StackStore store = toy_store(12, {16, 16}, 3);
  const TrainingRun a = train_bundle(store, c, 8);
  const TrainingRun b = train_bundle(store, c, 8);
  REQUIRE(a.bundle.splits.size() == 2);
  for (std::size_t k = 0; k < 2; ++k) {
    for (int v = 0; v < 2; ++v) {
      CHECK(checkpoint_to_json(a.bundle.splits[k][v]) == checkpoint_to_json(b.bundle.splits[k][v]));
    }
  }
  CHECK(training_log_csv(a.splits) == training_log_csv(b.splits));
  const TrainingRun other = train_bundle(store, c, 9);
  CHECK(other.bundle.splits[0][0].params != a.bundle.splits[0][0].params);
}

TEST_CASE("config validation") {
  TrainConfig c = TrainConfig::desk_scale();
  CHECK_NOTHROW(c.validate());
  c.augment.crop_hw = {32, 32};
  CHECK_THROWS_AS(c.validate(), Error);
  c = TrainConfig::desk_scale();
  c.optimizer.momentum = 1.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = TrainConfig::desk_scale();
  std::swap(c.encoder_a, c.encoder_b);
  CHECK_THROWS_AS(c.validate(), Error);
}
