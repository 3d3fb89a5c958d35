#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

// Small text helpers shared by the CSV, header and config readers.
namespace ctsev::text {

std::string_view trim(std::string_view s);
std::vector<std::string_view> split(std::string_view s, char sep);
/// Splits on runs of spaces/tabs, dropping empty tokens.
std::vector<std::string_view> split_ws(std::string_view s);

/// Lines separated by '\n'; a trailing '\r' is stripped from each line.
std::vector<std::string_view> lines(std::string_view s);

std::optional<long long> parse_int(std::string_view s);
std::optional<double> parse_double(std::string_view s);

/// Shortest representation that parses back to the same double.
std::string format_double(double value);

}  // namespace ctsev::text
