#include "core/matrix_io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace sbr {
namespace {

static_assert(sizeof(double) == 8);

std::uint64_t to_le(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  std::uint64_t r = 0;
  for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xffu) << (8 * (7 - i));
  return r;
}

void put_u64(std::ostream& out, std::uint64_t v) {
  v = to_le(v);
  out.write(reinterpret_cast<const char*>(&v), 8);
}

std::uint64_t get_u64(std::istream& in, const std::string& what) {
  std::uint64_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), 8)) fail(ErrorKind::Io, what + ": truncated SBRM header");
  return to_le(v);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? line.npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

// Accepts the tokens from_chars accepts (including "nan"/"inf") so that the
// caller can report non-finite values with their position.
bool parse_number(std::string_view tok, double& out) {
  if (tok.empty()) return false;
  if (tok.front() == '+') tok.remove_prefix(1);
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec == std::errc::result_out_of_range) {
    out = std::strtod(std::string(tok).c_str(), nullptr);
    return true;
  }
  return ec == std::errc() && ptr == last;
}

}  // namespace

void write_sbrm(std::ostream& out, const Matrix& m) {
  out.write(kSbrmMagic, 8);
  put_u64(out, static_cast<std::uint64_t>(m.rows()));
  put_u64(out, static_cast<std::uint64_t>(m.cols()));
  std::vector<double> row(static_cast<std::size_t>(m.cols()));
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      double v = m(i, j);
      if constexpr (std::endian::native != std::endian::little) {
        std::uint64_t bits = to_le(std::bit_cast<std::uint64_t>(v));
        v = std::bit_cast<double>(bits);
      }
      row[static_cast<std::size_t>(j)] = v;
    }
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(double)));
  }
  if (!out) fail(ErrorKind::Io, "failed writing SBRM data");
}

Matrix read_sbrm(std::istream& in, const std::string& what) {
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kSbrmMagic, 8) != 0)
    fail(ErrorKind::Io, what + ": missing SBRMAT01 magic");
  const std::uint64_t rows = get_u64(in, what);
  const std::uint64_t cols = get_u64(in, what);
  if (rows > (1ull << 40) || cols > (1ull << 40) || (rows != 0 && cols > (1ull << 40) / rows))
    fail(ErrorKind::Io, what + ": implausible SBRM dimensions");
  Matrix m(static_cast<Index>(rows), static_cast<Index>(cols));
  std::vector<double> row(cols);
  for (std::uint64_t i = 0; i < rows; ++i) {
    if (!in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(cols * 8)))
      fail(ErrorKind::Io, what + ": truncated SBRM data");
    for (std::uint64_t j = 0; j < cols; ++j) {
      double v = row[j];
      if constexpr (std::endian::native != std::endian::little)
        v = std::bit_cast<double>(to_le(std::bit_cast<std::uint64_t>(v)));
      m(static_cast<Index>(i), static_cast<Index>(j)) = v;
    }
  }
  return m;
}

void write_sbrm(const std::filesystem::path& path, const Matrix& m) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  write_sbrm(out, m);
}

Matrix read_sbrm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  return read_sbrm(in, path.string());
}

bool is_sbrm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  char magic[8];
  return in.read(magic, 8) && std::memcmp(magic, kSbrmMagic, 8) == 0;
}

CsvMatrix read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  CsvMatrix out;
  std::vector<double> values;
  std::size_t cols = 0;
  std::size_t rows = 0;
  std::size_t line_no = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view body = trim(line);
    if (body.empty()) continue;
    const auto toks = split_commas(body);
    std::vector<double> parsed(toks.size());
    bool numeric = true;
    for (std::size_t j = 0; j < toks.size(); ++j) {
      if (!parse_number(toks[j], parsed[j])) {
        numeric = false;
        break;
      }
    }
    if (!numeric) {
      if (rows == 0 && out.header.empty()) {
        for (auto t : toks) out.header.emplace_back(t);
        cols = toks.size();
        continue;
      }
      fail(ErrorKind::Data, path.string() + ": non-numeric entry on line " + std::to_string(line_no));
    }
    if (cols == 0) cols = toks.size();
    if (toks.size() != cols)
      fail(ErrorKind::Data, path.string() + ": line " + std::to_string(line_no) + " has " +
                                std::to_string(toks.size()) + " fields, expected " + std::to_string(cols));
    for (std::size_t j = 0; j < cols; ++j) {
      if (!std::isfinite(parsed[j]))
        fail(ErrorKind::Data, path.string() + ": non-finite entry at row " + std::to_string(rows + 1) +
                                  ", col " + std::to_string(j + 1));
    }
    values.insert(values.end(), parsed.begin(), parsed.end());
    ++rows;
  }
  out.values.resize(static_cast<Index>(rows), static_cast<Index>(cols));
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      out.values(static_cast<Index>(i), static_cast<Index>(j)) = values[i * cols + j];
  return out;
}

void write_csv(const std::filesystem::path& path, const Matrix& m, const std::vector<std::string>& header) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  if (!header.empty()) {
    for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
    out << '\n';
  }
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << format_double(m(i, j));
    out << '\n';
  }
  if (!out) fail(ErrorKind::Io, "failed writing " + path.string());
}

CsvMatrix read_matrix(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) fail(ErrorKind::Io, "no such file: " + path.string());
  if (is_sbrm(path)) {
    CsvMatrix out;
    out.values = read_sbrm(path);
    if (!out.values.allFinite()) {
      for (Index i = 0; i < out.values.rows(); ++i)
        for (Index j = 0; j < out.values.cols(); ++j)
          if (!std::isfinite(out.values(i, j)))
            fail(ErrorKind::Data, path.string() + ": non-finite entry at row " + std::to_string(i + 1) +
                                      ", col " + std::to_string(j + 1));
    }
    return out;
  }
  return read_csv(path);
}

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  (void)ec;
  return std::string(buf, ptr);
}

std::uint64_t content_hash(const Matrix& m) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= p[i];
      h *= 1099511628211ull;
    }
  };
  const std::uint64_t shape[2] = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
  mix(shape, sizeof shape);
  mix(m.data(), static_cast<std::size_t>(m.size()) * sizeof(double));
  return h;
}

}  // namespace sbr
