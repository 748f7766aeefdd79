#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace tlab {

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

/// Parses a whole string as a double; throws std::invalid_argument otherwise.
double parse_double(std::string_view text);

/// FNV-1a 64-bit hash, rendered as 16 hex digits.
std::string fnv1a_hex(std::string_view data);

/// Writes `contents` to a temporary sibling and renames it over `path`.
/// Creates missing parent directories.
void atomic_write(const std::filesystem::path& path, std::string_view contents);

/// Whole file as a string; throws InputError if it cannot be opened.
std::string read_file(const std::filesystem::path& path);

}  // namespace tlab
