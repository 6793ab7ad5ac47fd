#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace voxnox {

std::string read_file(const std::string& path);

// Writes to `path.tmp` and renames over `path`, so readers never see a partial file.
void write_file_atomic(const std::string& path, std::string_view contents);

bool file_exists(const std::string& path);

} // namespace voxnox
