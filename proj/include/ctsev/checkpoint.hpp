#pragma once

#include <filesystem>
#include <string>

#include "ctsev/model.hpp"

namespace ctsev {

inline constexpr int kCheckpointFormatVersion = 1;

struct Checkpoint {
  ModelParams params;
  SgdState optimizer;
};

/// JSON text: format_version, encoder config, flat parameters in layout
/// order and the optimizer velocity. Doubles are written in shortest
/// round-trip form, so reading back reproduces the parameters bit-exactly.
std::string checkpoint_to_json(const Checkpoint& checkpoint);
Checkpoint checkpoint_from_json(const std::string& json_text);

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace ctsev
