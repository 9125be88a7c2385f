#include "frechet_ma/csv_io.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace frechet_ma::io {

namespace {

std::string_view trim(std::string_view s) {
	const auto first = s.find_first_not_of(" \t\r\n");
	if (first == std::string_view::npos) {
		return {};
	}
	const auto last = s.find_last_not_of(" \t\r\n");
	return s.substr(first, last - first + 1);
}

std::ifstream open(const std::filesystem::path& path) {
	std::ifstream in(path);
	if (!in) {
		throw InputError(path.string() + ": cannot open file");
	}
	return in;
}

std::string where(const std::filesystem::path& path, std::size_t line) {
	return path.string() + ":" + std::to_string(line);
}

std::vector<double> parse_row(const std::vector<std::string>& cells, const std::filesystem::path& path,
                              std::size_t line) {
	std::vector<double> row(cells.size());
	for (std::size_t c = 0; c < cells.size(); ++c) {
		if (!parse_double(cells[c], row[c]) || !std::isfinite(row[c])) {
			throw InputError(where(path, line) + ": column " + std::to_string(c + 1) + " is not a finite number ('" +
			                 cells[c] + "')");
		}
	}
	return row;
}

} // namespace

std::vector<std::string> split_line(std::string_view line) {
	std::vector<std::string> cells;
	std::size_t start = 0;
	while (true) {
		const auto comma = line.find(',', start);
		cells.emplace_back(trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
		if (comma == std::string_view::npos) {
			break;
		}
		start = comma + 1;
	}
	return cells;
}

bool parse_double(std::string_view cell, double& out) {
	const std::string text(trim(cell));
	if (text.empty()) {
		return false;
	}
	char* end = nullptr;
	errno = 0;
	out = std::strtod(text.c_str(), &end);
	return end == text.c_str() + text.size() && errno != ERANGE;
}

CsvTable read_numeric_csv(const std::filesystem::path& path, bool rectangular) {
	auto in = open(path);
	CsvTable table;
	std::string line;
	std::size_t line_no = 0;
	bool have_header = false;
	while (std::getline(in, line)) {
		++line_no;
		if (trim(line).empty()) {
			continue;
		}
		auto cells = split_line(line);
		if (!have_header) {
			table.header = std::move(cells);
			have_header = true;
			continue;
		}
		if (rectangular && cells.size() != table.header.size()) {
			throw InputError(where(path, line_no) + ": expected " + std::to_string(table.header.size()) +
			                 " columns, found " + std::to_string(cells.size()));
		}
		table.rows.push_back(parse_row(cells, path, line_no));
		table.line_numbers.push_back(line_no);
	}
	if (!have_header) {
		throw InputError(path.string() + ": file is empty");
	}
	return table;
}

CsvTable read_ragged_csv(const std::filesystem::path& path) {
	auto in = open(path);
	CsvTable table;
	std::string line;
	std::size_t line_no = 0;
	bool first = true;
	while (std::getline(in, line)) {
		++line_no;
		if (trim(line).empty()) {
			continue;
		}
		auto cells = split_line(line);
		if (first) {
			first = false;
			double probe = 0.0;
			if (!parse_double(cells.front(), probe)) {
				table.header = std::move(cells);
				continue;
			}
		}
		std::vector<std::string> nonempty;
		for (auto& c : cells) {
			if (!c.empty()) {
				nonempty.push_back(std::move(c));
			}
		}
		table.rows.push_back(parse_row(nonempty, path, line_no));
		table.line_numbers.push_back(line_no);
	}
	return table;
}

std::string format_double(double v) {
	if (std::isnan(v)) {
		return "nan";
	}
	char buf[32];
	std::snprintf(buf, sizeof buf, "%.17g", v);
	return buf;
}

void write_atomic(const std::filesystem::path& path, const std::string& contents) {
	auto tmp = path;
	tmp += ".tmp";
	{
		std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
		if (!out) {
			throw std::runtime_error(tmp.string() + ": cannot open for writing");
		}
		out << contents;
		out.flush();
		if (!out) {
			throw std::runtime_error(tmp.string() + ": write failed");
		}
	}
	std::filesystem::rename(tmp, path);
}

} // namespace frechet_ma::io
