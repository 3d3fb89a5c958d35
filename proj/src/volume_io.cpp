#include "ctsev/volume_io.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <unordered_set>

#include "ctsev/error.hpp"
#include "ctsev/text.hpp"

namespace ctsev {

namespace {

constexpr long long kMaxDim = 1 << 20;

using Header = std::map<std::string, std::string, std::less<>>;

std::optional<std::string_view> lookup(const Header& header, std::string_view key) {
  const auto it = header.find(key);
  if (it == header.end()) return std::nullopt;
  return std::string_view(it->second);
}

std::string_view require(const Header& header, std::string_view key) {
  const auto value = lookup(header, key);
  if (!value) {
    throw Error(ErrorCode::MissingHeaderKey, "missing key " + std::string(key));
  }
  return *value;
}

// A present key with an unusable value counts as the key being absent.
[[noreturn]] void invalid_value(std::string_view key, std::string_view value) {
  throw Error(ErrorCode::MissingHeaderKey,
              "invalid value for " + std::string(key) + ": '" +
                  std::string(value.substr(0, 64)) + "'");
}

bool is_true(std::string_view value) {
  return value == "True" || value == "true" || value == "TRUE" || value == "1";
}

std::int16_t clamp_hu(long value, std::size_t& clamped) {
  if (value < kMinHu) {
    ++clamped;
    return kMinHu;
  }
  if (value > kMaxHu) {
    ++clamped;
    return kMaxHu;
  }
  return static_cast<std::int16_t>(value);
}

}  // namespace

void Volume::validate() const {
  if (dims.width <= 0 || dims.height <= 0 || dims.depth <= 0) {
    throw Error(ErrorCode::InvalidArgument, "volume dims must be positive");
  }
  for (double s : spacing) {
    if (!std::isfinite(s) || s <= 0.0) {
      throw Error(ErrorCode::InvalidArgument, "volume spacing must be finite and positive");
    }
  }
  if (hu.size() != dims.voxels()) {
    throw Error(ErrorCode::InvalidArgument, "volume data length does not match dims");
  }
  for (std::int16_t v : hu) {
    if (v < kMinHu || v > kMaxHu) {
      throw Error(ErrorCode::InvalidArgument, "HU value outside [-1024, 3071]");
    }
  }
}

Volume parse_mha(std::span<const std::uint8_t> bytes, std::string subject_id,
                 std::size_t* clamped) {
  const std::string_view all(reinterpret_cast<const char*>(bytes.data()), bytes.size());

  Header header;
  std::optional<std::size_t> data_offset;
  std::size_t pos = 0;
  while (pos < all.size()) {
    std::size_t end = all.find('\n', pos);
    const std::size_t next = end == std::string_view::npos ? all.size() : end + 1;
    if (end == std::string_view::npos) end = all.size();
    std::string_view line = all.substr(pos, end - pos);
    pos = next;

    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) continue;
    const std::string_view key = text::trim(line.substr(0, eq));
    const std::string_view value = text::trim(line.substr(eq + 1));
    header.insert_or_assign(std::string(key), std::string(value));
    if (key == "ElementDataFile") {
      data_offset = next;
      break;
    }
  }
  if (!data_offset) {
    throw Error(ErrorCode::MissingHeaderKey, "missing key ElementDataFile");
  }
  if (const auto file = require(header, "ElementDataFile"); file != "LOCAL") {
    throw Error(ErrorCode::NonLocalData,
                "ElementDataFile = " + std::string(file.substr(0, 64)));
  }
  if (const auto compressed = lookup(header, "CompressedData");
      compressed && is_true(*compressed)) {
    throw Error(ErrorCode::UnsupportedElementType, "compressed payloads are not supported");
  }
  if (const auto channels = lookup(header, "ElementNumberOfChannels")) {
    const auto n = text::parse_int(*channels);
    if (!n || *n != 1) {
      throw Error(ErrorCode::UnsupportedElementType, "multi-component voxels are not supported");
    }
  }

  const auto ndims_text = require(header, "NDims");
  if (const auto ndims = text::parse_int(ndims_text); !ndims || *ndims != 3) {
    invalid_value("NDims", ndims_text);
  }

  Volume volume;
  volume.subject_id = std::move(subject_id);

  const auto dim_text = require(header, "DimSize");
  const auto dim_tokens = text::split_ws(dim_text);
  if (dim_tokens.size() != 3) invalid_value("DimSize", dim_text);
  std::array<int, 3> dims{};
  for (std::size_t i = 0; i < 3; ++i) {
    const auto d = text::parse_int(dim_tokens[i]);
    if (!d || *d <= 0 || *d > kMaxDim) invalid_value("DimSize", dim_text);
    dims[i] = static_cast<int>(*d);
  }
  volume.dims = Dims{dims[0], dims[1], dims[2]};

  if (const auto spacing_text = lookup(header, "ElementSpacing")) {
    const auto tokens = text::split_ws(*spacing_text);
    if (tokens.size() != 3) invalid_value("ElementSpacing", *spacing_text);
    for (std::size_t i = 0; i < 3; ++i) {
      const auto s = text::parse_double(tokens[i]);
      if (!s || !std::isfinite(*s) || *s <= 0.0) invalid_value("ElementSpacing", *spacing_text);
      volume.spacing[i] = *s;
    }
  }

  const auto type = require(header, "ElementType");
  std::size_t element_size = 0;
  if (type == "MET_SHORT") {
    element_size = 2;
  } else if (type == "MET_UCHAR") {
    element_size = 1;
  } else {
    throw Error(ErrorCode::UnsupportedElementType,
                "ElementType " + std::string(type.substr(0, 64)));
  }

  bool msb = false;
  if (const auto v = lookup(header, "ElementByteOrderMSB")) msb = is_true(*v);
  if (const auto v = lookup(header, "BinaryDataByteOrderMSB")) msb = msb || is_true(*v);

  const std::size_t voxels = volume.dims.voxels();
  const std::size_t payload = bytes.size() - *data_offset;
  if (payload != voxels * element_size) {
    throw Error(ErrorCode::PayloadSizeMismatch,
                "expected " + std::to_string(voxels * element_size) + " payload bytes, got " +
                    std::to_string(payload));
  }

  std::size_t clamp_count = 0;
  volume.hu.resize(voxels);
  const std::uint8_t* data = bytes.data() + *data_offset;
  if (element_size == 1) {
    for (std::size_t i = 0; i < voxels; ++i) volume.hu[i] = clamp_hu(data[i], clamp_count);
  } else {
    for (std::size_t i = 0; i < voxels; ++i) {
      const std::uint8_t b0 = data[2 * i];
      const std::uint8_t b1 = data[2 * i + 1];
      const std::uint16_t raw = msb ? static_cast<std::uint16_t>((b0 << 8) | b1)
                                    : static_cast<std::uint16_t>((b1 << 8) | b0);
      volume.hu[i] = clamp_hu(static_cast<std::int16_t>(raw), clamp_count);
    }
  }
  if (clamped) *clamped = clamp_count;
  return volume;
}

std::vector<std::uint8_t> write_mha(const Volume& volume) {
  std::string header;
  header += "ObjectType = Image\n";
  header += "NDims = 3\n";
  header += "BinaryData = True\n";
  header += "ElementByteOrderMSB = False\n";
  header += "ElementSpacing = " + text::format_double(volume.spacing[0]) + " " +
            text::format_double(volume.spacing[1]) + " " +
            text::format_double(volume.spacing[2]) + "\n";
  header += "DimSize = " + std::to_string(volume.dims.width) + " " +
            std::to_string(volume.dims.height) + " " + std::to_string(volume.dims.depth) +
            "\n";
  header += "ElementType = MET_SHORT\n";
  header += "ElementDataFile = LOCAL\n";

  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(header.size() + 2 * volume.hu.size());
  for (std::int16_t v : volume.hu) {
    const auto u = static_cast<std::uint16_t>(v);
    out.push_back(static_cast<std::uint8_t>(u & 0xFF));
    out.push_back(static_cast<std::uint8_t>(u >> 8));
  }
  return out;
}

std::vector<LabeledCase> read_labels(std::string_view csv) {
  const auto rows = text::lines(csv);
  if (rows.empty() || text::trim(rows.front()) != "PatientID,probCOVID,probSevere") {
    throw Error(ErrorCode::MalformedRow, "label header must be PatientID,probCOVID,probSevere");
  }
  const auto parse_bit = [](std::string_view field, std::size_t line) {
    field = text::trim(field);
    if (field == "0") return false;
    if (field == "1") return true;
    throw Error(ErrorCode::MalformedRow,
                "line " + std::to_string(line) + ": label must be 0 or 1");
  };

  std::vector<LabeledCase> cases;
  std::unordered_set<std::string> seen;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (text::trim(rows[i]).empty()) continue;
    const auto fields = text::split(rows[i], ',');
    if (fields.size() != 3 || text::trim(fields[0]).empty()) {
      throw Error(ErrorCode::MalformedRow, "line " + std::to_string(i + 1));
    }
    LabeledCase c;
    c.subject_id = std::string(text::trim(fields[0]));
    c.covid_positive = parse_bit(fields[1], i + 1);
    c.severe = parse_bit(fields[2], i + 1);
    if (c.severe && !c.covid_positive) {
      throw Error(ErrorCode::SeverityWithoutPositivity, c.subject_id);
    }
    if (!seen.insert(c.subject_id).second) {
      throw Error(ErrorCode::DuplicateSubject, c.subject_id);
    }
    cases.push_back(std::move(c));
  }
  return cases;
}

std::string write_labels(std::span<const LabeledCase> cases) {
  std::string out = "PatientID,probCOVID,probSevere\n";
  for (const auto& c : cases) {
    out += c.subject_id;
    out += c.covid_positive ? ",1" : ",0";
    out += c.severe ? ",1\n" : ",0\n";
  }
  return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::IoFailure, "cannot read " + path.string());
  return bytes;
}

void write_file_bytes(const std::filesystem::path& path,
                      std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot create " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return std::string(bytes.begin(), bytes.end());
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()),
                                   text.size()));
}

Volume read_mha_file(const std::filesystem::path& path, std::size_t* clamped) {
  const auto bytes = read_file_bytes(path);
  return parse_mha(bytes, path.stem().string(), clamped);
}

void write_mha_file(const std::filesystem::path& path, const Volume& volume) {
  write_file_bytes(path, write_mha(volume));
}

}  // namespace ctsev
