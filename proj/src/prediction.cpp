#include "ctsev/prediction.hpp"

#include <cmath>
#include <unordered_set>

#include "ctsev/error.hpp"
#include "ctsev/text.hpp"

namespace ctsev {

std::string write_predictions(std::span<const Prediction> predictions) {
  std::string out = "PatientID,probCOVID,probSevere\n";
  for (const auto& p : predictions) {
    out += p.subject_id + "," + text::format_double(p.prob_covid) + "," +
           text::format_double(p.prob_severe) + "\n";
  }
  return out;
}

std::vector<Prediction> read_predictions(std::string_view csv) {
  const auto rows = text::lines(csv);
  if (rows.empty() || text::trim(rows.front()) != "PatientID,probCOVID,probSevere") {
    throw Error(ErrorCode::MalformedRow, "prediction header must be PatientID,probCOVID,probSevere");
  }
  std::vector<Prediction> out;
  std::unordered_set<std::string> seen;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (text::trim(rows[i]).empty()) continue;
    const auto fields = text::split(rows[i], ',');
    if (fields.size() != 3) throw Error(ErrorCode::MalformedRow, "line " + std::to_string(i + 1));
    const auto covid = text::parse_double(fields[1]);
    const auto severe = text::parse_double(fields[2]);
    if (!covid || !severe || !std::isfinite(*covid) || !std::isfinite(*severe)) {
      throw Error(ErrorCode::MalformedRow, "line " + std::to_string(i + 1) + ": bad probability");
    }
    Prediction p{std::string(text::trim(fields[0])), *severe, *covid};
    if (!seen.insert(p.subject_id).second) throw Error(ErrorCode::DuplicateSubject, p.subject_id);
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace ctsev
