#pragma once

#include "tangled/model.hpp"

#include <string>

namespace tangled {

// Binary checkpoint file ("ABTC1"): the model config as key-value text, then
// every named parameter as (name, shape, row-major float64), little-endian
// throughout. Exact layout in docs/FORMATS.md. Writes are atomic.
void save_checkpoint(ModelParams& params, const std::string& path);

// Rebuilds the model described by the stored config and fills every
// parameter. Bad magic, unknown or missing config keys, and missing, extra,
// duplicate, or misshapen parameters all raise ParseError.
ModelParams load_checkpoint(const std::string& path);

}  // namespace tangled
