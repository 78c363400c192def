#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

// Locale-independent number parsing/formatting and minimal CSV helpers.
namespace ted::text {

std::string_view trim(std::string_view s);

/// Splits one CSV line on commas, trimming surrounding whitespace from each
/// cell. Double-quoted cells are unquoted ("" escapes a quote).
std::vector<std::string> split_csv_line(std::string_view line);

std::optional<double> parse_double(std::string_view s);
std::optional<long long> parse_int(std::string_view s);

/// Shortest round-trip form is not used; reals are always written with 17
/// significant digits so output bytes are stable across platforms.
std::string format_double(double v);

/// Reads the whole file; throws Error(io) naming the path.
std::string read_file(const std::filesystem::path& path);
/// Writes (truncating) the file; throws Error(io) naming the path.
void write_file(const std::filesystem::path& path, std::string_view contents);

/// Splits on '\n', dropping a trailing '\r' from each line.
std::vector<std::string_view> split_lines(std::string_view text);

}  // namespace ted::text
