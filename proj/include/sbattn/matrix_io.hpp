#pragma once

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include "sbattn/matrix.hpp"

namespace sbattn {

static_assert(std::endian::native == std::endian::little,
              "binary matrix files assume a little-endian host");

enum class MatrixFormat { text, binary };

// Text format:   first line "DMAT <rows> <cols>", then one line per row of
//                space-separated decimals (shortest round-trip form).
// Binary format: magic "DMATB1", little-endian u64 rows, u64 cols, then
//                rows*cols little-endian IEEE-754 doubles.
inline constexpr char kBinaryMagic[6] = {'D', 'M', 'A', 'T', 'B', '1'};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline void reject_nonfinite(double v, const std::string& path, std::size_t row,
                             std::size_t col) {
  if (!std::isfinite(v))
    throw IoError(path + ": non-finite value at row " + std::to_string(row) + ", column " +
                  std::to_string(col));
}

}  // namespace detail

inline void save_matrix_text(const std::string& path, const DenseMatrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path + ": cannot open for writing");
  out << "DMAT " << m.rows << ' ' << m.cols << '\n';
  std::string line;
  for (std::size_t i = 0; i < m.rows; ++i) {
    line.clear();
    for (std::size_t j = 0; j < m.cols; ++j) {
      double v = m.at(i, j);
      detail::reject_nonfinite(v, path, i, j);
      if (j) line += ' ';
      line += detail::format_double(v);
    }
    line += '\n';
    out << line;
  }
  if (!out) throw IoError(path + ": write failed");
}

inline DenseMatrix load_matrix_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path + ": cannot open for reading");
  std::string header;
  if (!std::getline(in, header)) throw IoError(path + ": empty file");
  std::size_t rows = 0, cols = 0;
  {
    const char* p = header.c_str();
    if (header.rfind("DMAT ", 0) != 0)
      throw IoError(path + ": malformed header (expected 'DMAT <rows> <cols>') at line 1");
    p += 5;
    auto r1 = std::from_chars(p, header.c_str() + header.size(), rows);
    if (r1.ec != std::errc{} || *r1.ptr != ' ')
      throw IoError(path + ": malformed header at line 1");
    auto r2 = std::from_chars(r1.ptr + 1, header.c_str() + header.size(), cols);
    if (r2.ec != std::errc{})
      throw IoError(path + ": malformed header at line 1");
  }
  DenseMatrix m(rows, cols);
  std::string line;
  for (std::size_t i = 0; i < rows; ++i) {
    if (!std::getline(in, line))
      throw IoError(path + ": truncated payload at row " + std::to_string(i) + " (line " +
                    std::to_string(i + 2) + ")");
    const char* p = line.c_str();
    const char* end = p + line.size();
    for (std::size_t j = 0; j < cols; ++j) {
      while (p < end && *p == ' ') ++p;
      double v = 0.0;
      auto res = std::from_chars(p, end, v);
      if (res.ec != std::errc{})
        throw IoError(path + ": truncated payload at row " + std::to_string(i) + ", column " +
                      std::to_string(j) + " (line " + std::to_string(i + 2) + ")");
      detail::reject_nonfinite(v, path, i, j);
      m.at(i, j) = v;
      p = res.ptr;
    }
    while (p < end && *p == ' ') ++p;
    if (p != end)
      throw IoError(path + ": trailing data at row " + std::to_string(i) + " (line " +
                    std::to_string(i + 2) + ")");
  }
  return m;
}

inline void save_matrix_binary(const std::string& path, const DenseMatrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path + ": cannot open for writing");
  out.write(kBinaryMagic, sizeof kBinaryMagic);
  std::uint64_t dims[2] = {m.rows, m.cols};
  out.write(reinterpret_cast<const char*>(dims), sizeof dims);
  for (std::size_t k = 0; k < m.data.size(); ++k)
    detail::reject_nonfinite(m.data[k], path, k / m.cols, k % m.cols);
  // Chunked writes keep the I/O buffer bounded for multi-GiB payloads.
  constexpr std::size_t kChunk = 1u << 20;
  const char* bytes = reinterpret_cast<const char*>(m.data.data());
  std::size_t total = m.data.size() * sizeof(double);
  for (std::size_t off = 0; off < total; off += kChunk)
    out.write(bytes + off, static_cast<std::streamsize>(std::min(kChunk, total - off)));
  if (!out) throw IoError(path + ": write failed");
}

inline DenseMatrix load_matrix_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path + ": cannot open for reading");
  char magic[6];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kBinaryMagic, sizeof magic) != 0)
    throw IoError(path + ": malformed header (bad magic at offset 0)");
  std::uint64_t dims[2];
  if (!in.read(reinterpret_cast<char*>(dims), sizeof dims))
    throw IoError(path + ": truncated header at offset 6");
  if (dims[0] != 0 && dims[1] > (1ull << 62) / dims[0])
    throw IoError(path + ": implausible dimensions in header");
  DenseMatrix m(static_cast<std::size_t>(dims[0]), static_cast<std::size_t>(dims[1]));
  constexpr std::size_t kChunk = 1u << 20;
  char* bytes = reinterpret_cast<char*>(m.data.data());
  std::size_t total = m.data.size() * sizeof(double);
  for (std::size_t off = 0; off < total; off += kChunk) {
    std::size_t want = std::min(kChunk, total - off);
    if (!in.read(bytes + off, static_cast<std::streamsize>(want)))
      throw IoError(path + ": truncated payload at offset " + std::to_string(22 + off));
  }
  for (std::size_t k = 0; k < m.data.size(); ++k)
    detail::reject_nonfinite(m.data[k], path, k / std::max<std::size_t>(m.cols, 1),
                             m.cols ? k % m.cols : 0);
  return m;
}

// Sniffs the 6-byte prefix to pick the format.
inline DenseMatrix load_matrix(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path + ": cannot open for reading");
  char head[6] = {0, 0, 0, 0, 0, 0};
  in.read(head, sizeof head);
  in.close();
  if (std::memcmp(head, kBinaryMagic, sizeof head) == 0) return load_matrix_binary(path);
  if (std::memcmp(head, "DMAT ", 5) == 0) return load_matrix_text(path);
  throw IoError(path + ": unrecognized format (expected DMAT text or DMATB1 binary)");
}

inline void save_matrix(const std::string& path, const DenseMatrix& m, MatrixFormat fmt) {
  if (fmt == MatrixFormat::text)
    save_matrix_text(path, m);
  else
    save_matrix_binary(path, m);
}

}  // namespace sbattn
