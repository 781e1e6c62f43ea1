#pragma once

#include <string>

namespace tangled {

// Writes bytes to a temp file next to `path`, then renames into place, so a
// failed write never leaves a partial file. Creates parent directories.
void write_file_atomic(const std::string& path, const std::string& bytes);

std::string read_file(const std::string& path);

}  // namespace tangled
