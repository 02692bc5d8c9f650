#pragma once

#include <string>

#include "hoi/config.hpp"
#include "hoi/model.hpp"

namespace hoi {

// Single-file parameter snapshot: a text manifest (name, shape, offset in
// doubles) followed by one little-endian float64 blob covering every named
// parameter in registration order. load(save(p)) is bit-exact.
void save_checkpoint(const ModelParams& params, const std::string& path);

// Rebuilds the parameter registry for cfg and fills it from the file.
// Unreadable/garbled manifest or a blob whose length disagrees with the
// manifest -> CorruptionError; name or shape disagreement with cfg ->
// CompatibilityError naming every offending entry.
ModelParams load_checkpoint(const std::string& path, const RunConfig& cfg);

}  // namespace hoi
