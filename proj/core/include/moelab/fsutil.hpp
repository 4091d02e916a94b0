#pragma once

#include <string>
#include <vector>

namespace moelab {

/// Shortest 17-significant-digit form; round-trips IEEE doubles exactly, so
/// text files rebuild bit-identical values.
std::string format_double(double v);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);
bool file_exists(const std::string& path);
void ensure_directory(const std::string& path);

/// Hex SHA-256 of a byte string (OpenSSL EVP).
std::string sha256_hex(const std::string& bytes);

/// Minimal CSV split of one line (no quoting; fields in this project never
/// contain commas).
std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace moelab
