#pragma once

#include <string>

namespace dpf {

// Whole-file helpers. Writes go through a sibling temp file plus rename so a
// failed run never leaves a partial output behind.
std::string read_file(const std::string& path);
void write_file_atomic(const std::string& path, const std::string& bytes);

}  // namespace dpf
