#pragma once

#include "gfmate/common.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

// Small helpers shared by the text file formats (datasets, model and prompt
// files, config files).
namespace gfmate::text {

std::vector<std::string> read_lines(const std::filesystem::path& file);

/// Splits on runs of spaces/tabs; empty fields are skipped.
std::vector<std::string_view> split_ws(std::string_view line);
std::vector<std::string_view> split_char(std::string_view line, char sep);
std::string_view trim(std::string_view s);

double parse_double(std::string_view s, std::string_view context);
long long parse_int(std::string_view s, std::string_view context);

/// Shortest decimal representation that round-trips exactly.
std::string format_double(double v);

/// Writes one row of space-separated values.
std::string format_row(const double* data, Index n);

/// Parses `key=value` lines. Blank lines and lines starting with '#' are
/// ignored. Duplicate keys are errors.
std::map<std::string, std::string> parse_key_values(const std::vector<std::string>& lines,
                                                    std::string_view context);

void write_file(const std::filesystem::path& file, const std::string& contents);

}  // namespace gfmate::text
