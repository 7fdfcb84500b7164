// accent/binary_io.hpp
//
// Helpers shared by the artifact formats: a UTF-8 header line followed by
// IEEE-754 binary64 little-endian payloads.

#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace accent::io {

void write_f64_le(std::ostream& os, std::span<const double> values);
void read_f64_le(std::istream& is, std::span<double> values);

/// Row-major dump of a dense matrix.
void write_matrix_rows(std::ostream& os, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix_rows(std::istream& is, Eigen::Index rows, Eigen::Index cols);

/// Shortest decimal form that parses back to the same double.
std::string format_double(double v);
/// Strict parse of the whole token; nullopt on any trailing garbage.
std::optional<double> parse_double(std::string_view s);
std::optional<long long> parse_int(std::string_view s);

std::vector<std::string> split_ws(std::string_view line);
std::string_view trim(std::string_view s);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace accent::io
