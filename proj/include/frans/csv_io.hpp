#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace frans {

std::string_view trim(std::string_view s);

/// Splits on commas; the formats here never quote fields.
std::vector<std::string_view> split_csv_line(std::string_view line);

/// Shortest decimal text that parses back to the same double.
std::string format_number(double v);

/// FNV-1a 64 of a file's bytes, as 16 hex digits.
std::string file_checksum(const std::filesystem::path& path);

}  // namespace frans
