#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace reluphase {

// Numbers destined for files go through g17 so outputs are byte-comparable
// across runs: 17 significant digits round-trip any double exactly.
std::string g17(double value);

std::string read_file(const std::filesystem::path& path);

// Writes to a temp file in the same directory, then renames over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::uint64_t fnv1a64(std::string_view bytes);

std::string iso8601_utc_now();

std::vector<std::string> split(std::string_view text, char sep);
std::string trim(std::string_view text);
double parse_double(std::string_view text);
long long parse_int(std::string_view text);
std::string hex16(std::uint64_t value);

}  // namespace reluphase
