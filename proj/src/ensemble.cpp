#include "ctsev/ensemble.hpp"

#include <json.hpp>

#include "ctsev/augment.hpp"
#include "ctsev/error.hpp"
#include "ctsev/volume_io.hpp"

namespace ctsev {

namespace {

constexpr int kBundleFormatVersion = 1;

std::filesystem::path checkpoint_path(int split, Variant variant) {
  return std::filesystem::path("split" + std::to_string(split + 1)) /
         ("variant" + std::string(to_string(variant)) + ".ckpt");
}

}  // namespace

void EnsembleBundle::validate() const {
  if (splits.empty()) throw Error(ErrorCode::InvalidArgument, "bundle has no splits");
  for (const auto& pair : splits) {
    if (pair[0].params.config.variant != Variant::A || pair[1].params.config.variant != Variant::B) {
      throw Error(ErrorCode::InvalidArgument, "each split needs variant A then variant B");
    }
    for (const auto& c : pair) {
      if (c.params.config.in_hw != crop_hw) {
        throw Error(ErrorCode::ShapeMismatch, "checkpoint input size differs from bundle crop size");
      }
    }
  }
  if (crop_hw.height > preprocess.precrop_hw.height || crop_hw.width > preprocess.precrop_hw.width) {
    throw Error(ErrorCode::CropTooLarge, "bundle crop exceeds pre-crop resolution");
  }
}

ProbPair predict_with_tta(const SliceStack& stack, const ModelParams& params, Hw crop_hw, bool tta) {
  if (!tta) return predict_stack(center_crop(stack, crop_hw), params);
  std::array<ProbPair, kTtaViews.size()> probs;
  for (std::size_t i = 0; i < kTtaViews.size(); ++i) {
    probs[i] = predict_stack(tta_view(stack, kTtaViews[i], crop_hw), params);
  }
  return mean_probability(probs);
}

ProbPair mean_probability(std::span<const ProbPair> probs) {
  if (probs.empty()) throw Error(ErrorCode::EmptyInput, "nothing to average");
  ProbPair m{0.0, 0.0};
  for (const auto& p : probs) {
    m.severe += p.severe;
    m.covid += p.covid;
  }
  m.severe /= static_cast<double>(probs.size());
  m.covid /= static_cast<double>(probs.size());
  return m;
}

ProbPair combine_ensemble(std::span<const std::array<ProbPair, 2>> per_split) {
  std::vector<ProbPair> split_means;
  split_means.reserve(per_split.size());
  for (const auto& pair : per_split) split_means.push_back(mean_probability(pair));
  return mean_probability(split_means);
}

Prediction predict_stack_ensemble(const SliceStack& stack, const EnsembleBundle& bundle) {
  std::vector<std::array<ProbPair, 2>> per_split;
  per_split.reserve(bundle.splits.size());
  for (const auto& pair : bundle.splits) {
    per_split.push_back({predict_with_tta(stack, pair[0].params, bundle.crop_hw, bundle.tta_enabled),
                         predict_with_tta(stack, pair[1].params, bundle.crop_hw, bundle.tta_enabled)});
  }
  const ProbPair p = combine_ensemble(per_split);
  return {stack.subject_id, p.severe, p.covid};
}

Prediction predict_subject(const Volume& volume, const EnsembleBundle& bundle) {
  Prediction p = predict_stack_ensemble(bundle.preprocess.apply(volume), bundle);
  p.subject_id = volume.subject_id;
  return p;
}

BatchResult predict_batch(const std::filesystem::path& data_dir, const Manifest& manifest,
                          const EnsembleBundle& bundle, const std::filesystem::path& out_path) {
  bundle.validate();
  BatchResult result;
  for (const auto& entry : manifest.volumes) {
    try {
      Volume v = read_mha_file(data_dir / entry.file);
      v.subject_id = entry.subject_id;
      result.predictions.push_back(predict_subject(v, bundle));
    } catch (const Error& e) {
      if (e.code() == ErrorCode::ShapeMismatch || e.code() == ErrorCode::CropTooLarge) throw;
      result.failures.push_back({entry.subject_id, e.what()});
    }
  }
  write_text_file(out_path, write_predictions(result.predictions));
  return result;
}

void write_bundle(const std::filesystem::path& dir, const EnsembleBundle& bundle) {
  bundle.validate();
  nlohmann::ordered_json doc;
  doc["format_version"] = kBundleFormatVersion;
  doc["n_splits"] = bundle.splits.size();
  doc["window"] = {{"level", bundle.preprocess.window.level},
                   {"width", bundle.preprocess.window.width}};
  doc["n_slices"] = bundle.preprocess.n_slices;
  doc["precrop_hw"] = {bundle.preprocess.precrop_hw.height, bundle.preprocess.precrop_hw.width};
  doc["crop_hw"] = {bundle.crop_hw.height, bundle.crop_hw.width};
  doc["tta_enabled"] = bundle.tta_enabled;
  doc["checkpoints"] = nlohmann::ordered_json::array();
  for (std::size_t s = 0; s < bundle.splits.size(); ++s) {
    nlohmann::ordered_json paths = nlohmann::ordered_json::array();
    for (const auto& c : bundle.splits[s]) {
      const auto rel = checkpoint_path(static_cast<int>(s), c.params.config.variant);
      std::error_code ec;
      std::filesystem::create_directories(dir / rel.parent_path(), ec);
      if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + (dir / rel.parent_path()).string());
      write_checkpoint(dir / rel, c);
      paths.push_back(rel.generic_string());
    }
    doc["checkpoints"].push_back(paths);
  }
  write_text_file(dir / "bundle.json", doc.dump(2) + "\n");
}

EnsembleBundle read_bundle(const std::filesystem::path& dir) {
  EnsembleBundle b;
  int n_splits = 0;
  try {
    const auto doc = nlohmann::json::parse(read_text_file(dir / "bundle.json"));
    if (doc.at("format_version").get<int>() != kBundleFormatVersion) {
      throw Error(ErrorCode::IoFailure, "unsupported bundle format version");
    }
    n_splits = doc.at("n_splits").get<int>();
    b.preprocess.window.level = doc.at("window").at("level").get<double>();
    b.preprocess.window.width = doc.at("window").at("width").get<double>();
    b.preprocess.n_slices = doc.at("n_slices").get<int>();
    b.preprocess.precrop_hw = {doc.at("precrop_hw").at(0).get<int>(), doc.at("precrop_hw").at(1).get<int>()};
    b.crop_hw = {doc.at("crop_hw").at(0).get<int>(), doc.at("crop_hw").at(1).get<int>()};
    b.tta_enabled = doc.at("tta_enabled").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::IoFailure, std::string("malformed bundle.json: ") + e.what());
  }
  if (n_splits < 1) throw Error(ErrorCode::IoFailure, "bundle declares no splits");
  for (int s = 0; s < n_splits; ++s) {
    b.splits.push_back({read_checkpoint(dir / checkpoint_path(s, Variant::A)),
                        read_checkpoint(dir / checkpoint_path(s, Variant::B))});
  }
  b.validate();
  return b;
}

}  // namespace ctsev
