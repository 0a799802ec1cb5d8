#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace ciforge::text {

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);

// Trims and collapses every whitespace run (including newlines) to one space.
std::string collapse_ws(std::string_view s);

// Lowercased alphanumeric runs; everything else separates tokens.
std::vector<std::string> alnum_tokens(std::string_view s);

// Whitespace-delimited token count.
std::size_t word_count(std::string_view s);

bool iequals(std::string_view a, std::string_view b);
bool istarts_with(std::string_view s, std::string_view prefix);

// True when `value` is the "None" sentinel used by model answers: "none" in
// any casing, optionally followed by punctuation or a parenthetical remark.
bool is_none_sentinel(std::string_view value);

// Lowercase hex SHA-256 of the bytes of `data`.
std::string sha256_hex(std::string_view data);

// Half-away-from-zero rounding to `digits` decimals, tolerant of binary
// representation error (64.825 rounds to 64.83).
double round_half_up(double value, int digits = 2);
std::string fixed2(double value);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);
std::vector<std::string> read_lines(const std::filesystem::path& path);
std::vector<std::string> split_lines(std::string_view s);

}  // namespace ciforge::text
