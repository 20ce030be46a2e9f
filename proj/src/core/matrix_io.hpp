#pragma once

#include "core/common.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace sbr {

// SBRM layout: "SBRMAT01", u64 rows, u64 cols (little endian), then rows*cols
// little-endian doubles in row-major order.
inline constexpr char kSbrmMagic[8] = {'S', 'B', 'R', 'M', 'A', 'T', '0', '1'};

void write_sbrm(std::ostream& out, const Matrix& m);
Matrix read_sbrm(std::istream& in, const std::string& what = "stream");

void write_sbrm(const std::filesystem::path& path, const Matrix& m);
Matrix read_sbrm(const std::filesystem::path& path);

struct CsvMatrix {
  Matrix values;
  std::vector<std::string> header;  // empty when the file has no header row
};

/// Comma-separated numeric table, optional header row. Non-finite entries
/// are rejected with their (1-based) row and column.
CsvMatrix read_csv(const std::filesystem::path& path);

void write_csv(const std::filesystem::path& path, const Matrix& m,
               const std::vector<std::string>& header = {});

/// Reads either format, chosen by the leading magic bytes.
CsvMatrix read_matrix(const std::filesystem::path& path);

bool is_sbrm(const std::filesystem::path& path);

/// 17 significant digits; round-trips every double.
std::string format_double(double v);

/// FNV-1a over shape and raw values; used to key cached Gram files.
std::uint64_t content_hash(const Matrix& m);

}  // namespace sbr
