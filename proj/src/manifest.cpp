#include "ctsev/manifest.hpp"

#include <json.hpp>

#include "ctsev/error.hpp"
#include "ctsev/volume_io.hpp"

namespace ctsev {

std::vector<std::string> Manifest::files() const {
  std::vector<std::string> out;
  out.reserve(volumes.size() + 1);
  for (const auto& v : volumes) out.push_back(v.file);
  out.push_back(labels_file);
  return out;
}

std::string manifest_to_json(const Manifest& manifest) {
  nlohmann::ordered_json doc;
  doc["format_version"] = 1;
  doc["counts"] = {{"cases", manifest.n_cases},
                   {"severe", manifest.n_severe},
                   {"positive", manifest.n_positive}};
  doc["labels"] = manifest.labels_file;
  doc["volumes"] = nlohmann::ordered_json::array();
  for (const auto& v : manifest.volumes) {
    doc["volumes"].push_back({{"subject_id", v.subject_id}, {"file", v.file}});
  }
  doc["files"] = manifest.files();
  return doc.dump(2) + "\n";
}

Manifest manifest_from_json(const std::string& json_text) {
  try {
    const auto doc = nlohmann::json::parse(json_text);
    Manifest m;
    m.labels_file = doc.at("labels").get<std::string>();
    m.n_cases = doc.at("counts").at("cases").get<int>();
    m.n_severe = doc.at("counts").at("severe").get<int>();
    m.n_positive = doc.at("counts").at("positive").get<int>();
    for (const auto& v : doc.at("volumes")) {
      m.volumes.push_back({v.at("subject_id").get<std::string>(), v.at("file").get<std::string>()});
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::IoFailure, std::string("malformed manifest: ") + e.what());
  }
}

Manifest read_manifest(const std::filesystem::path& dir) {
  return manifest_from_json(read_text_file(dir / kManifestName));
}

void write_manifest(const std::filesystem::path& dir, const Manifest& manifest) {
  write_text_file(dir / kManifestName, manifest_to_json(manifest));
}

}  // namespace ctsev
