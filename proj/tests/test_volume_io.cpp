#include <doctest.h>

#include <algorithm>
#include <string>
#include <vector>

#include "ctsev/error.hpp"
#include "ctsev/rng.hpp"
#include "ctsev/volume_io.hpp"
#include "support.hpp"

using namespace ctsev;

namespace {

std::vector<std::uint8_t> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }

ErrorCode code_of(const std::vector<std::uint8_t>& bytes) {
  try {
    parse_mha(bytes);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::InvalidArgument;
}

Volume random_volume(Rng& rng) {
  Volume v;
  v.dims = {1 + static_cast<int>(rng.below(9)), 1 + static_cast<int>(rng.below(9)),
            1 + static_cast<int>(rng.below(9))};
  v.spacing = {rng.uniform(0.1, 5.0), rng.uniform(0.1, 5.0), rng.uniform(0.1, 5.0)};
  v.hu.resize(v.dims.voxels());
  for (auto& h : v.hu) h = static_cast<std::int16_t>(kMinHu + static_cast<int>(rng.below(kMaxHu - kMinHu + 1)));
  return v;
}

}  // namespace

TEST_CASE("single voxel MET_SHORT parses") {
  auto bytes = bytes_of("NDims = 3\nDimSize = 1 1 1\nElementType = MET_SHORT\nElementDataFile = LOCAL\n");
  bytes.push_back(0);
  bytes.push_back(0);
  const Volume v = parse_mha(bytes, "s");
  CHECK(v.dims == Dims{1, 1, 1});
  CHECK(v.hu == std::vector<std::int16_t>{0});
  CHECK(v.spacing == std::array<double, 3>{1.0, 1.0, 1.0});
  CHECK(v.subject_id == "s");
}

TEST_CASE("extreme HU values encode little-endian") {
  Volume v;
  v.dims = {2, 1, 1};
  v.hu = {-1024, 3071};
  const auto bytes = write_mha(v);
  REQUIRE(bytes.size() >= 4);
  const std::vector<std::uint8_t> payload(bytes.end() - 4, bytes.end());
  CHECK(payload == std::vector<std::uint8_t>{0x00, 0xFC, 0xFF, 0x0B});
  CHECK(parse_mha(bytes) == v);
}

TEST_CASE("canonical header key order") {
  Volume v;
  v.dims = {1, 1, 1};
  v.hu = {0};
  const auto bytes = write_mha(v);
  const std::string text(bytes.begin(), bytes.end() - 2);
  const char* keys[] = {"ObjectType", "NDims", "BinaryData", "ElementByteOrderMSB",
                        "ElementSpacing", "DimSize", "ElementType", "ElementDataFile"};
  std::size_t last = 0;
  for (const char* k : keys) {
    const auto pos = text.find(std::string(k) + " =");
    REQUIRE(pos != std::string::npos);
    CHECK(pos >= last);
    last = pos;
  }
}

TEST_CASE("payload one element short") {
  const std::string header =
      "NDims = 3\nDimSize = 2 3 4\nElementType = MET_SHORT\nElementDataFile = LOCAL\n";
  auto bytes = bytes_of(header);
  bytes.resize(bytes.size() + 2 * 2 * 3 * 4 - 2, 0);
  CHECK(code_of(bytes) == ErrorCode::PayloadSizeMismatch);
}

TEST_CASE("header errors") {
  CHECK(code_of(bytes_of("NDims = 3\nElementType = MET_SHORT\nElementDataFile = LOCAL\n")) ==
        ErrorCode::MissingHeaderKey);
  CHECK(code_of(bytes_of("NDims = 3\nDimSize = 1 1 1\nElementType = MET_FLOAT\nElementDataFile = LOCAL\n")) ==
        ErrorCode::UnsupportedElementType);
  CHECK(code_of(bytes_of("NDims = 3\nDimSize = 1 1 1\nElementType = MET_SHORT\nElementDataFile = scan.raw\n")) ==
        ErrorCode::NonLocalData);
  CHECK(code_of(bytes_of("NDims = 3\nDimSize = 1 1 1\nCompressedData = True\nElementType = MET_SHORT\n"
                         "ElementDataFile = LOCAL\n\x01\x02")) == ErrorCode::UnsupportedElementType);
  // Keys are case-sensitive.
  CHECK(code_of(bytes_of("NDims = 3\ndimsize = 1 1 1\nElementType = MET_SHORT\nElementDataFile = LOCAL\n\0\0")) ==
        ErrorCode::MissingHeaderKey);
}

TEST_CASE("big-endian, uchar and clamping") {
  auto be = bytes_of("NDims=3\nDimSize=1 1 2\nElementByteOrderMSB=True\nElementType=MET_SHORT\nElementDataFile=LOCAL\n");
  be.insert(be.end(), {0x0B, 0xFF, 0xF8, 0x00});  // 3071, -2048
  std::size_t clamped = 0;
  const Volume v = parse_mha(be, {}, &clamped);
  CHECK(v.hu == std::vector<std::int16_t>{3071, -1024});
  CHECK(clamped == 1);

  auto uc = bytes_of("NDims = 3\nDimSize = 3 1 1\nElementType = MET_UCHAR\nElementDataFile = LOCAL\n");
  uc.insert(uc.end(), {0, 7, 255});
  CHECK(parse_mha(uc).hu == std::vector<std::int16_t>{0, 7, 255});
}

TEST_CASE("full-size scan dimensions") {
  Volume v;
  v.dims = {512, 512, 128};
  v.hu.assign(v.dims.voxels(), -1000);
  v.hu[12345] = 40;
  const Volume back = parse_mha(write_mha(v));
  CHECK(back.dims == Dims{512, 512, 128});
  CHECK(back == v);
}

TEST_CASE("random volumes round-trip") {
  Rng rng(derive_seed(1, "test-mha"));
  for (int i = 0; i < 50; ++i) {
    const Volume v = random_volume(rng);
    REQUIRE(parse_mha(write_mha(v)) == v);
  }
}

TEST_CASE("mutated headers never escape as anything but Error") {
  Rng rng(derive_seed(2, "test-mha-fuzz"));
  Volume v;
  v.dims = {3, 2, 2};
  v.hu.assign(12, 5);
  const auto good = write_mha(v);
  for (int i = 0; i < 2000; ++i) {
    auto bytes = good;
    const int edits = 1 + static_cast<int>(rng.below(4));
    for (int e = 0; e < edits && !bytes.empty(); ++e) {
      const auto pos = rng.below(bytes.size());
      switch (rng.below(4)) {
        case 0: bytes[pos] = static_cast<std::uint8_t>(rng.below(256)); break;
        case 1: bytes.erase(bytes.begin() + static_cast<long>(pos)); break;
        case 2: bytes.insert(bytes.begin() + static_cast<long>(pos), static_cast<std::uint8_t>(rng.below(256))); break;
        default: bytes.resize(pos); break;
      }
    }
    try {
      const Volume out = parse_mha(bytes);
      CHECK_NOTHROW(out.validate());
    } catch (const Error&) {
    }
  }
}

TEST_CASE("label rows") {
  const auto ok = read_labels("PatientID,probCOVID,probSevere\ns1,1,1\ns3,1,0\ns4,0,0\n");
  REQUIRE(ok.size() == 3);
  CHECK(ok[0] == LabeledCase{"s1", true, true});
  CHECK(ok[1] == LabeledCase{"s3", false, true});

  const auto code = [](const char* csv) {
    try {
      read_labels(csv);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::InvalidArgument;
  };
  CHECK(code("PatientID,probCOVID,probSevere\ns2,0,1\n") == ErrorCode::SeverityWithoutPositivity);
  CHECK(code("PatientID,probCOVID,probSevere\ns1,1,1\ns1,0,0\n") == ErrorCode::DuplicateSubject);
  CHECK(code("PatientID,probCOVID,probSevere\ns1,1\n") == ErrorCode::MalformedRow);
  CHECK(code("PatientID,probCOVID,probSevere\ns1,2,0\n") == ErrorCode::MalformedRow);
  CHECK(code("id,covid,severe\ns1,1,1\n") == ErrorCode::MalformedRow);
}

TEST_CASE("2000 subjects with 301 severe") {
  std::vector<LabeledCase> cases;
  for (int i = 0; i < 2000; ++i) {
    cases.push_back({"p" + std::to_string(i), i < 301, i < 1000});
  }
  const auto back = read_labels(write_labels(cases));
  CHECK(back == cases);
  CHECK(std::count_if(back.begin(), back.end(), [](const LabeledCase& c) { return c.severe; }) == 301);
}

TEST_CASE("file helpers use the stem as subject id") {
  testing::TempDir dir("mha");
  Volume v;
  v.dims = {2, 2, 1};
  v.hu = {-1024, 0, 40, 3071};
  write_mha_file(dir.path() / "subject7.mha", v);
  const Volume back = read_mha_file(dir.path() / "subject7.mha");
  CHECK(back.subject_id == "subject7");
  CHECK(back.hu == v.hu);
  CHECK_THROWS_AS(read_mha_file(dir.path() / "missing.mha"), Error);
}
