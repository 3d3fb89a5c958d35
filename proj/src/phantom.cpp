#include "ctsev/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <vector>

#include "ctsev/error.hpp"
#include "ctsev/rng.hpp"

namespace ctsev {

namespace {

struct Ellipsoid {
  double cx, cy, cz;
  double rx, ry, rz;

  bool contains(double u, double v, double t) const {
    const double a = (u - cx) / rx;
    const double b = (v - cy) / ry;
    const double c = (t - cz) / rz;
    return a * a + b * b + c * c <= 1.0;
  }
};

double jitter(Rng& rng) { return rng.uniform(0.9, 1.1); }

// Lesion blobs per class: count and nominal radius in normalized units.
constexpr int kMildBlobs = 2;
constexpr double kMildRadius = 0.35;
constexpr int kSevereBlobs = 10;
constexpr double kSevereRadius = 0.45;

std::vector<int> label_order(const PhantomSpec& spec) {
  std::vector<int> order(static_cast<std::size_t>(spec.n_cases));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(spec.seed, "phantom-labels"));
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[rng.below(i)]);
  }
  return order;
}

}  // namespace

int PhantomSpec::severe_count() const {
  return static_cast<int>(std::llround(n_cases * severe_fraction));
}

int PhantomSpec::positive_count() const {
  return static_cast<int>(std::llround(n_cases * positive_fraction));
}

void PhantomSpec::validate() const {
  if (dims.width < 16 || dims.height < 16 || dims.depth < 16) {
    throw Error(ErrorCode::InvalidArgument, "phantom dims must each be >= 16");
  }
  if (n_cases < 1) throw Error(ErrorCode::InvalidArgument, "n_cases must be positive");
  const auto in_unit = [](double f) { return std::isfinite(f) && f >= 0.0 && f < 1.0; };
  if (!in_unit(severe_fraction) || !in_unit(positive_fraction)) {
    throw Error(ErrorCode::InvalidArgument, "fractions must lie in [0, 1)");
  }
  if (severe_fraction > positive_fraction) {
    throw Error(ErrorCode::InvalidArgument, "severe_fraction must not exceed positive_fraction");
  }
}

std::string phantom_subject_id(const PhantomSpec& spec, int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d", index);
  return spec.id_prefix + buf;
}

PhantomCase generate_case(const PhantomSpec& spec, int index) {
  spec.validate();
  if (index < 0 || index >= spec.n_cases) {
    throw Error(ErrorCode::InvalidArgument, "phantom index out of range");
  }

  const auto order = label_order(spec);
  const int rank = static_cast<int>(
      std::find(order.begin(), order.end(), index) - order.begin());

  PhantomCase out;
  out.label.subject_id = phantom_subject_id(spec, index);
  out.label.severe = rank < spec.severe_count();
  out.label.covid_positive = rank < std::max(spec.positive_count(), spec.severe_count());

  Rng rng(derive_seed(spec.seed, "phantom-case", static_cast<std::uint64_t>(index)));

  const double tissue_hu = phantom_hu::kSoftTissue * jitter(rng);
  const double lung_hu = phantom_hu::kLung * jitter(rng);
  const double lesion_hu = phantom_hu::kGroundGlass * jitter(rng);

  const Ellipsoid body{0.0, 0.0, 0.0, 0.9 * jitter(rng), 0.75 * jitter(rng), 1e9};
  std::array<Ellipsoid, 2> lungs{};
  for (int side = 0; side < 2; ++side) {
    const double sign = side == 0 ? -1.0 : 1.0;
    lungs[side] = Ellipsoid{sign * 0.42 * jitter(rng), -0.05 * jitter(rng), 0.0,
                            0.32 * jitter(rng), 0.5 * jitter(rng), 0.85 * jitter(rng)};
  }

  std::vector<Ellipsoid> lesions;
  if (out.label.covid_positive) {
    const int blobs = out.label.severe ? kSevereBlobs : kMildBlobs;
    const double radius = out.label.severe ? kSevereRadius : kMildRadius;
    for (int b = 0; b < blobs; ++b) {
      const Ellipsoid& lung = lungs[rng.below(2)];
      // Center drawn uniformly in the inner part of the chosen lung.
      double du, dv, dt;
      do {
        du = rng.uniform(-1.0, 1.0);
        dv = rng.uniform(-1.0, 1.0);
        dt = rng.uniform(-1.0, 1.0);
      } while (du * du + dv * dv + dt * dt > 1.0);
      const double r = radius * jitter(rng);
      lesions.push_back({lung.cx + 0.6 * du * lung.rx, lung.cy + 0.6 * dv * lung.ry,
                         lung.cz + 0.6 * dt * lung.rz, r, r, r});
    }
  }

  Volume& v = out.volume;
  v.dims = spec.dims;
  v.spacing = {0.7, 0.7, 1.5};
  v.subject_id = out.label.subject_id;
  v.hu.resize(spec.dims.voxels());

  std::size_t i = 0;
  for (int z = 0; z < spec.dims.depth; ++z) {
    const double t = (z + 0.5) / spec.dims.depth * 2.0 - 1.0;
    for (int y = 0; y < spec.dims.height; ++y) {
      const double vv = (y + 0.5) / spec.dims.height * 2.0 - 1.0;
      for (int x = 0; x < spec.dims.width; ++x, ++i) {
        const double u = (x + 0.5) / spec.dims.width * 2.0 - 1.0;
        double hu = phantom_hu::kAir;
        if (body.contains(u, vv, 0.0)) {
          hu = tissue_hu;
          if (lungs[0].contains(u, vv, t) || lungs[1].contains(u, vv, t)) {
            hu = lung_hu;
            for (const auto& lesion : lesions) {
              if (lesion.contains(u, vv, t)) {
                hu = lesion_hu + rng.uniform(-phantom_hu::kLesionTexture, phantom_hu::kLesionTexture);
                ++out.lesion_voxels;
                break;
              }
            }
          }
        }
        hu += rng.uniform(-phantom_hu::kVoxelNoise, phantom_hu::kVoxelNoise);
        const double clamped = std::clamp(std::round(hu), double{kMinHu}, double{kMaxHu});
        v.hu[i] = static_cast<std::int16_t>(clamped);
      }
    }
  }
  return out;
}

Manifest generate_dataset(const PhantomSpec& spec, const std::filesystem::path& out_dir) {
  spec.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + out_dir.string());

  Manifest manifest;
  std::vector<LabeledCase> labels;
  for (int i = 0; i < spec.n_cases; ++i) {
    PhantomCase c = generate_case(spec, i);
    const std::string file = c.label.subject_id + ".mha";
    write_mha_file(out_dir / file, c.volume);
    manifest.volumes.push_back({c.label.subject_id, file});
    manifest.n_severe += c.label.severe ? 1 : 0;
    manifest.n_positive += c.label.covid_positive ? 1 : 0;
    labels.push_back(std::move(c.label));
  }
  manifest.n_cases = spec.n_cases;
  write_text_file(out_dir / manifest.labels_file, write_labels(labels));
  write_manifest(out_dir, manifest);
  return manifest;
}

}  // namespace ctsev
