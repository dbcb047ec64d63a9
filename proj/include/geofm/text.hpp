#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace geofm::text {

/// Shortest representation that parses back to the same double.
std::string format_double(double v);

/// Splits on commas. Quoting is not supported; fields never contain commas.
std::vector<std::string_view> split_csv(std::string_view line);

/// Strict full-field parse. Leading/trailing blanks are trimmed.
std::optional<double> parse_double(std::string_view field);
std::optional<long long> parse_int(std::string_view field);

std::string_view trim(std::string_view s) noexcept;

/// Whole file, throwing IoError naming the path on failure.
std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace geofm::text
