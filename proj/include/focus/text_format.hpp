#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace focus {

// Shortest decimal form that parses back to the identical double.
std::string format_double(double value);

// Strict parse of a full token; throws InputError on trailing junk or overflow.
double parse_double(std::string_view token);
long long parse_integer(std::string_view token);

std::vector<std::string_view> split(std::string_view line, char delimiter);
std::string_view trim(std::string_view text);

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temporary file and renames it into place, so readers never
// observe a half-written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace focus
