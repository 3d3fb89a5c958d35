#include "ctsev/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ctsev/ablation.hpp"
#include "ctsev/config.hpp"
#include "ctsev/ensemble.hpp"
#include "ctsev/error.hpp"
#include "ctsev/manifest.hpp"
#include "ctsev/metrics.hpp"
#include "ctsev/phantom.hpp"
#include "ctsev/training.hpp"
#include "ctsev/volume_io.hpp"

namespace fs = std::filesystem;

namespace ctsev {

namespace {

std::string fmt4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string auc_text(const AucPair& auc) {
  return "AUC_severity=" + fmt4(auc.severity) + " AUC_covid=" + fmt4(auc.covid);
}

struct GenerateArgs {
  fs::path out;
  int cases = 240;
  double severe = 0.15;
  double positive = 0.5;
  std::optional<std::uint64_t> seed;
  int width = 64;
  int height = 64;
  int depth = 48;
  std::string prefix = "case";
};

struct TrainArgs {
  fs::path config;
  fs::path data;
  fs::path bundle;
  fs::path test;
  std::optional<std::uint64_t> seed;
  std::string set;
  std::optional<int> epochs;
  std::optional<int> splits;
  std::optional<double> lr;
  std::optional<int> batch_size;
  bool sweep = false;
};

struct PredictArgs {
  fs::path bundle;
  fs::path data;
  fs::path out;
  bool no_tta = false;
};

struct EvaluateArgs {
  fs::path predictions;
  fs::path labels;
  bool all_subjects = false;
};

int cmd_generate(const GenerateArgs& a, std::ostream& out) {
  PhantomSpec spec;
  spec.dims = {a.width, a.height, a.depth};
  spec.n_cases = a.cases;
  spec.severe_fraction = a.severe;
  spec.positive_fraction = a.positive;
  spec.seed = *a.seed;
  spec.id_prefix = a.prefix;
  const Manifest m = generate_dataset(spec, a.out);
  out << "generated " << m.n_cases << " cases (" << m.n_severe << " severe, " << m.n_positive
      << " positive) in " << a.out.string() << "\n";
  return kExitOk;
}

// Merges the optional config file with command-line overrides.
RunConfig train_config(const TrainArgs& a) {
  RunConfig c = a.config.empty() ? RunConfig{} : read_run_config(a.config);
  if (!a.data.empty()) c.data_dir = a.data;
  if (!a.bundle.empty()) c.bundle_dir = a.bundle;
  if (!a.test.empty()) c.test_dir = a.test;
  if (a.seed) c.seed = a.seed;
  if (!a.set.empty()) c.train.augment.set_id = aug_set_from_string(a.set);
  if (a.epochs) c.train.optimizer.epochs = *a.epochs;
  if (a.splits) c.train.n_splits = *a.splits;
  if (a.lr) c.train.optimizer.lr = *a.lr;
  if (a.batch_size) c.train.optimizer.batch_size = *a.batch_size;
  c.sync_encoders();
  return c;
}

void require_dir(const fs::path& dir, const char* what) {
  if (!fs::is_directory(dir)) {
    throw Error(ErrorCode::IoFailure, std::string(what) + " directory not found: " + dir.string());
  }
}

void print_split(std::ostream& out, int k, const SplitResult& r) {
  out << "split " << (k + 1) << ": " << auc_text(r.val_auc) << " (A " << fmt4(r.a.val_auc.severity)
      << "/" << fmt4(r.a.val_auc.covid) << ", B " << fmt4(r.b.val_auc.severity) << "/"
      << fmt4(r.b.val_auc.covid) << ")\n"
      << std::flush;
}

void save_run(const fs::path& dir, TrainingRun& run, const RunConfig& c) {
  run.bundle.tta_enabled = c.effective_tta();
  write_bundle(dir, run.bundle);
  write_text_file(dir / "training_log.csv", training_log_csv(run.splits));
  write_text_file(dir / "run_config.json", run_config_to_json(c));
}

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  RunConfig c = train_config(a);
  if (!c.seed) {
    err << "error: a seed is required (--seed or \"seed\" in the config)\n";
    return kExitUsage;
  }
  if (c.data_dir.empty() || c.bundle_dir.empty()) {
    err << "error: data and bundle directories are required\n";
    return kExitUsage;
  }
  require_dir(c.data_dir, "data");
  if (!c.test_dir.empty()) require_dir(c.test_dir, "test");
  c.train.validate();

  const auto t0 = std::chrono::steady_clock::now();
  const StackStore store = StackStore::from_directory(c.data_dir, c.train.preprocess);
  out << "loaded " << store.cases().size() << " subjects from " << c.data_dir.string() << "\n";

  if (!a.sweep) {
    TrainingRun run = train_bundle(store, c.train, *c.seed,
                                   [&](int k, const SplitResult& r) { print_split(out, k, r); });
    save_run(c.bundle_dir, run, c);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out << "wrote " << 2 * run.bundle.splits.size() << " checkpoints to " << c.bundle_dir.string()
        << " in " << static_cast<int>(secs) << " s\n";
    return kExitOk;
  }

  std::optional<StackStore> test;
  if (!c.test_dir.empty()) test = StackStore::from_directory(c.test_dir, c.train.preprocess);
  std::vector<TrainingRun> runs;
  const auto rows = run_ablation(
      store, test ? &*test : nullptr, c.train, *c.seed,
      [&](AugSet set, int k, const SplitResult& r) {
        out << to_string(set) << " ";
        print_split(out, k, r);
      },
      &runs);
  // One bundle per trained set; the TTA row reuses the last one.
  const AugSet trained[] = {AugSet::Default, AugSet::DefaultStrong, AugSet::DefaultStrongMixup};
  for (std::size_t i = 0; i < runs.size(); ++i) {
    RunConfig rc = c;
    rc.train.augment.set_id = trained[i];
    save_run(c.bundle_dir / std::string(to_string(trained[i])), runs[i], rc);
  }
  const std::string table = format_ablation_table(rows);
  write_text_file(c.bundle_dir / "ablation.txt", table);
  out << table;
  return kExitOk;
}

// A data directory without manifest.json is read as every *.mha in name order.
Manifest input_manifest(const fs::path& dir) {
  if (fs::exists(dir / kManifestName)) return read_manifest(dir);
  Manifest m;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".mha") files.push_back(e.path().filename());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) m.volumes.push_back({f.stem().string(), f.string()});
  m.n_cases = static_cast<int>(m.volumes.size());
  return m;
}

int cmd_predict(const PredictArgs& a, std::ostream& out, std::ostream& err) {
  EnsembleBundle bundle;
  try {
    bundle = read_bundle(a.bundle);
  } catch (const Error& e) {
    err << "error: cannot read bundle " << a.bundle.string() << ": " << e.what() << "\n";
    return kExitFailure;
  }
  bundle.tta_enabled = !a.no_tta;
  require_dir(a.data, "data");
  const Manifest manifest = input_manifest(a.data);
  const BatchResult result = predict_batch(a.data, manifest, bundle, a.out);
  for (const auto& f : result.failures) err << "skipped " << f.subject_id << ": " << f.message << "\n";
  out << "wrote " << result.predictions.size() << " predictions to " << a.out.string() << "\n";
  return result.failures.empty() ? kExitOk : kExitPartial;
}

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
  const AucPair auc =
      evaluate(read_text_file(a.predictions), read_text_file(a.labels), !a.all_subjects);
  out << auc_text(auc) << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"COVID-19 severity prediction on chest CT volumes", "ctsev"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Write a synthetic labeled phantom dataset");
  generate->add_option("--out", gen.out, "Output directory")->required();
  generate->add_option("--cases", gen.cases, "Number of subjects")->check(CLI::PositiveNumber);
  generate->add_option("--severe", gen.severe, "Fraction of severe subjects");
  generate->add_option("--positive", gen.positive, "Fraction of COVID-positive subjects");
  generate->add_option("--seed", gen.seed, "Random seed")->required();
  generate->add_option("--width", gen.width, "Volume width in voxels");
  generate->add_option("--height", gen.height, "Volume height in voxels");
  generate->add_option("--depth", gen.depth, "Volume depth in slices");
  generate->add_option("--prefix", gen.prefix, "Subject id prefix");

  TrainArgs tr;
  auto* train = app.add_subcommand("train", "Train the 5-split x 2-variant ensemble");
  train->add_option("--config", tr.config, "JSON run configuration")->check(CLI::ExistingFile);
  train->add_option("--data", tr.data, "Training dataset directory");
  train->add_option("--bundle", tr.bundle, "Output bundle directory");
  train->add_option("--test", tr.test, "Held-out dataset directory (sweep only)");
  train->add_option("--seed", tr.seed, "Random seed");
  train->add_option("--set", tr.set, "Augmentation set id");
  train->add_option("--epochs", tr.epochs, "Epochs per model");
  train->add_option("--splits", tr.splits, "Number of random splits");
  train->add_option("--lr", tr.lr, "SGD learning rate");
  train->add_option("--batch-size", tr.batch_size, "Mini-batch size");
  train->add_flag("--sweep", tr.sweep, "Train every augmentation set and print the ablation table");

  PredictArgs pr;
  auto* predict = app.add_subcommand("predict", "Write ensemble predictions for a dataset");
  predict->add_option("--bundle", pr.bundle, "Trained bundle directory")->required();
  predict->add_option("--data", pr.data, "Directory of MHA volumes")->required();
  predict->add_option("--out", pr.out, "Prediction CSV path")->required();
  predict->add_flag("--no-tta", pr.no_tta, "Center crop only, no test-time augmentation");

  EvaluateArgs ev;
  auto* eval = app.add_subcommand("evaluate", "Score a prediction CSV against labels");
  eval->add_option("--pred", ev.predictions, "Prediction CSV")->required()->check(CLI::ExistingFile);
  eval->add_option("--labels", ev.labels, "Label CSV")->required()->check(CLI::ExistingFile);
  eval->add_flag("--all-subjects", ev.all_subjects, "Severity AUC over all subjects, not positives only");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (generate->parsed()) return cmd_generate(gen, out);
    if (train->parsed()) return cmd_train(tr, out, err);
    if (predict->parsed()) return cmd_predict(pr, out, err);
    if (eval->parsed()) return cmd_evaluate(ev, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace ctsev
