#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>

namespace ces {

// Writes through a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::function<void(std::ostream&)>& writer,
                       bool binary = false);

// 64-bit FNV-1a digest of a file's bytes as 16 hex digits.
std::string file_digest(const std::filesystem::path& path);

}  // namespace ces
