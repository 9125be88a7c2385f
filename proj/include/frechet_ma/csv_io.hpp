#pragma once

// Minimal numeric CSV reading and lossless writing.

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace frechet_ma::io {

/// Thrown for malformed input files; carries file and line context.
class InputError : public std::invalid_argument {
public:
	using std::invalid_argument::invalid_argument;
};

struct CsvTable {
	std::vector<std::string> header;          ///< empty when the file has no header
	std::vector<std::vector<double>> rows;
	std::vector<std::size_t> line_numbers;    ///< 1-based source line of each row
};

/// Splits one CSV line on commas and trims surrounding whitespace.
std::vector<std::string> split_line(std::string_view line);

/// Parses a full cell as a finite or non-finite double; false if it is not a number.
bool parse_double(std::string_view cell, double& out);

/// Reads a CSV whose first line is a header and whose remaining lines are
/// numeric. With `rectangular`, every row must have the header's width.
CsvTable read_numeric_csv(const std::filesystem::path& path, bool rectangular = true);

/// Reads ragged numeric rows; a first line that does not parse as numbers is
/// treated as a header and skipped.
CsvTable read_ragged_csv(const std::filesystem::path& path);

/// 17 significant digits; reading the text back gives the same double.
std::string format_double(double v);

/// Writes `contents` to a sibling temp file, then renames it over `path`.
void write_atomic(const std::filesystem::path& path, const std::string& contents);

} // namespace frechet_ma::io
