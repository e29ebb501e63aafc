#pragma once

#include <cstdint>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fgd {

/// Shortest decimal that parses back to exactly `v`.
std::string format_double(double v);
/// Strict parse of a whole string; throws ConfigError on trailing garbage.
double parse_double(std::string_view text);
std::uint64_t parse_uint(std::string_view text);

std::string_view trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);

/// Writes to `<path>.tmp` and renames over `path`; creates parent directories.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);

/// One row per line, space-separated shortest decimals.
std::string format_grid(std::span<const double> values, std::size_t rows, std::size_t cols);
std::vector<std::vector<double>> parse_grid(std::string_view text);

/// Binary 8-bit PGM (P5), min..max linearly mapped to 0..255.
std::string format_pgm(std::span<const double> values, std::size_t rows, std::size_t cols);

}  // namespace fgd
