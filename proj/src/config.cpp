#include "ctsev/config.hpp"

#include <json.hpp>

#include "ctsev/error.hpp"
#include "ctsev/volume_io.hpp"

namespace ctsev {

namespace {

using nlohmann::json;

Hw hw_from(const json& j) { return {j.at(0).get<int>(), j.at(1).get<int>()}; }

template <typename T>
void read_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void RunConfig::sync_encoders() {
  train.encoder_a.in_hw = train.augment.crop_hw;
  train.encoder_b.in_hw = train.augment.crop_hw;
}

RunConfig run_config_from_json(const std::string& json_text) {
  RunConfig c;
  try {
    const json doc = json::parse(json_text);
    if (doc.contains("data_dir")) c.data_dir = doc.at("data_dir").get<std::string>();
    if (doc.contains("bundle_dir")) c.bundle_dir = doc.at("bundle_dir").get<std::string>();
    if (doc.contains("test_dir")) c.test_dir = doc.at("test_dir").get<std::string>();
    if (doc.contains("seed")) c.seed = doc.at("seed").get<std::uint64_t>();
    if (doc.contains("tta_enabled")) c.tta_enabled = doc.at("tta_enabled").get<bool>();

    PreprocessConfig& pre = c.train.preprocess;
    if (doc.contains("window")) {
      read_if(doc.at("window"), "level", pre.window.level);
      read_if(doc.at("window"), "width", pre.window.width);
    }
    read_if(doc, "n_slices", pre.n_slices);
    if (doc.contains("precrop_hw")) pre.precrop_hw = hw_from(doc.at("precrop_hw"));

    if (doc.contains("augment")) {
      const json& a = doc.at("augment");
      AugConfig& aug = c.train.augment;
      if (a.contains("set_id")) aug.set_id = aug_set_from_string(a.at("set_id").get<std::string>());
      if (a.contains("crop_hw")) aug.crop_hw = hw_from(a.at("crop_hw"));
      read_if(a, "brightness", aug.brightness);
      read_if(a, "contrast", aug.contrast);
      read_if(a, "saturation", aug.saturation);
      read_if(a, "rotate_limit_deg", aug.rotate_limit_deg);
      if (a.contains("gamma_range")) {
        aug.gamma_min = a.at("gamma_range").at(0).get<double>();
        aug.gamma_max = a.at("gamma_range").at(1).get<double>();
      }
      read_if(a, "median_kernel", aug.median_kernel);
      read_if(a, "mixup_alpha", aug.mixup_alpha);
    }
    if (doc.contains("encoders")) {
      const json& e = doc.at("encoders");
      for (auto [key, enc] : {std::pair{"A", &c.train.encoder_a}, std::pair{"B", &c.train.encoder_b}}) {
        if (!e.contains(key)) continue;
        read_if(e.at(key), "channels", enc->channels);
        read_if(e.at(key), "input_mean", enc->input_mean);
        read_if(e.at(key), "input_std", enc->input_std);
      }
    }
    if (doc.contains("optimizer")) {
      const json& o = doc.at("optimizer");
      read_if(o, "lr", c.train.optimizer.lr);
      read_if(o, "momentum", c.train.optimizer.momentum);
      read_if(o, "epochs", c.train.optimizer.epochs);
      read_if(o, "batch_size", c.train.optimizer.batch_size);
    }
    read_if(doc, "n_splits", c.train.n_splits);
    read_if(doc, "val_fraction", c.train.val_fraction);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("malformed run config: ") + e.what());
  }
  c.sync_encoders();
  return c;
}

std::string run_config_to_json(const RunConfig& c) {
  nlohmann::ordered_json doc;
  doc["data_dir"] = c.data_dir.string();
  doc["bundle_dir"] = c.bundle_dir.string();
  if (!c.test_dir.empty()) doc["test_dir"] = c.test_dir.string();
  if (c.seed) doc["seed"] = *c.seed;
  const PreprocessConfig& pre = c.train.preprocess;
  doc["window"] = {{"level", pre.window.level}, {"width", pre.window.width}};
  doc["n_slices"] = pre.n_slices;
  doc["precrop_hw"] = {pre.precrop_hw.height, pre.precrop_hw.width};
  const AugConfig& a = c.train.augment;
  doc["augment"] = {{"set_id", std::string(to_string(a.set_id))},
                    {"crop_hw", {a.crop_hw.height, a.crop_hw.width}},
                    {"brightness", a.brightness},
                    {"contrast", a.contrast},
                    {"saturation", a.saturation},
                    {"rotate_limit_deg", a.rotate_limit_deg},
                    {"gamma_range", {a.gamma_min, a.gamma_max}},
                    {"median_kernel", a.median_kernel},
                    {"mixup_alpha", a.mixup_alpha}};
  const auto encoder_json = [](const EncoderConfig& e) {
    return json{{"channels", e.channels}, {"input_mean", e.input_mean}, {"input_std", e.input_std}};
  };
  doc["encoders"] = {{"A", encoder_json(c.train.encoder_a)}, {"B", encoder_json(c.train.encoder_b)}};
  const OptimizerConfig& o = c.train.optimizer;
  doc["optimizer"] = {{"lr", o.lr}, {"momentum", o.momentum}, {"epochs", o.epochs},
                      {"batch_size", o.batch_size}};
  doc["n_splits"] = c.train.n_splits;
  doc["val_fraction"] = c.train.val_fraction;
  if (c.tta_enabled) doc["tta_enabled"] = *c.tta_enabled;
  return doc.dump(2) + "\n";
}

RunConfig read_run_config(const std::filesystem::path& path) {
  return run_config_from_json(read_text_file(path));
}

}  // namespace ctsev
