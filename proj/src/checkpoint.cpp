#include "ctsev/checkpoint.hpp"

#include <json.hpp>

#include "ctsev/error.hpp"
#include "ctsev/volume_io.hpp"

namespace ctsev {

std::string checkpoint_to_json(const Checkpoint& checkpoint) {
  const ModelParams& p = checkpoint.params;
  if (!p.all_finite()) throw Error(ErrorCode::DivergedLoss, "refusing to save non-finite parameters");
  nlohmann::ordered_json doc;
  doc["format_version"] = kCheckpointFormatVersion;
  doc["encoder"] = {{"variant", std::string(to_string(p.config.variant))},
                    {"in_hw", {p.config.in_hw.height, p.config.in_hw.width}},
                    {"channels", p.config.channels},
                    {"input_mean", p.config.input_mean},
                    {"input_std", p.config.input_std}};
  doc["parameter_count"] = p.values.size();
  doc["parameters"] = p.values;
  doc["optimizer"] = {{"kind", "sgd_momentum"}, {"velocity", checkpoint.optimizer.velocity}};
  return doc.dump() + "\n";
}

Checkpoint checkpoint_from_json(const std::string& json_text) {
  try {
    const auto doc = nlohmann::json::parse(json_text);
    if (doc.at("format_version").get<int>() != kCheckpointFormatVersion) {
      throw Error(ErrorCode::IoFailure, "unsupported checkpoint format version");
    }
    Checkpoint c;
    const auto& enc = doc.at("encoder");
    c.params.config.variant = variant_from_string(enc.at("variant").get<std::string>());
    c.params.config.in_hw = {enc.at("in_hw").at(0).get<int>(), enc.at("in_hw").at(1).get<int>()};
    c.params.config.channels = enc.at("channels").get<std::vector<int>>();
    c.params.config.input_mean = enc.at("input_mean").get<double>();
    c.params.config.input_std = enc.at("input_std").get<double>();
    c.params.values = doc.at("parameters").get<std::vector<double>>();
    c.optimizer.velocity = doc.at("optimizer").at("velocity").get<std::vector<double>>();
    if (c.params.values.size() != param_layout(c.params.config).total) {
      throw Error(ErrorCode::ShapeMismatch, "checkpoint parameters do not match its encoder");
    }
    if (!c.optimizer.velocity.empty() && c.optimizer.velocity.size() != c.params.values.size()) {
      throw Error(ErrorCode::ShapeMismatch, "optimizer state does not match parameters");
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::IoFailure, std::string("malformed checkpoint: ") + e.what());
  }
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  write_text_file(path, checkpoint_to_json(checkpoint));
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from_json(read_text_file(path));
}

}  // namespace ctsev
