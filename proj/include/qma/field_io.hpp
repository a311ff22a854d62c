#pragma once

// "QMA1" binary dumps: magic, u32 LE dim count, u32 LE sizes, f64 LE values in
// row-major order. Scalar fields use the 4n grid sizes as dims. Form fields
// append (2n, 2n, 2) for the coefficient matrix and its real/imaginary parts.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "qma/errors.hpp"
#include "qma/torus.hpp"

namespace qma {

struct RawDump {
  std::vector<std::uint32_t> dims;
  std::vector<double> values;
};

namespace detail {

inline constexpr std::array<char, 4> kDumpMagic{'Q', 'M', 'A', '1'};

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

inline void put_f64(std::string& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFFu));
}

inline std::uint64_t get_le(const std::string& in, std::size_t& pos, int bytes) {
  if (pos + static_cast<std::size_t>(bytes) > in.size()) throw IoError("field dump: truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  pos += static_cast<std::size_t>(bytes);
  return v;
}

}  // namespace detail

inline std::string encode_dump(const RawDump& dump) {
  std::size_t count = 1;
  for (auto d : dump.dims) count *= d;
  if (count != dump.values.size()) throw MalformedInput("field dump: value count does not match dims");
  std::string out(detail::kDumpMagic.begin(), detail::kDumpMagic.end());
  detail::put_u32(out, static_cast<std::uint32_t>(dump.dims.size()));
  for (auto d : dump.dims) detail::put_u32(out, d);
  for (double v : dump.values) detail::put_f64(out, v);
  return out;
}

inline RawDump decode_dump(const std::string& bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), detail::kDumpMagic.data(), 4) != 0)
    throw IoError("field dump: bad magic");
  std::size_t pos = 4;
  RawDump dump;
  const auto rank = detail::get_le(bytes, pos, 4);
  if (rank > 64) throw IoError("field dump: implausible dim count");
  std::size_t count = 1;
  for (std::uint64_t i = 0; i < rank; ++i) {
    dump.dims.push_back(static_cast<std::uint32_t>(detail::get_le(bytes, pos, 4)));
    count *= dump.dims.back();
  }
  if (bytes.size() - pos != 8 * count) throw IoError("field dump: payload size does not match dims");
  dump.values.resize(count);
  for (auto& v : dump.values) v = std::bit_cast<double>(detail::get_le(bytes, pos, 8));
  return dump;
}

inline void write_dump(const std::filesystem::path& path, const RawDump& dump) {
  const std::string bytes = encode_dump(dump);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failed: " + path.string());
}

inline RawDump read_dump(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_dump(bytes);
}

inline RawDump to_dump(const ScalarField& f) {
  RawDump d;
  for (int s : f.grid.sizes()) d.dims.push_back(static_cast<std::uint32_t>(s));
  d.values = f.values;
  return d;
}

inline RawDump to_dump(const Form2Field& f) {
  RawDump d;
  const int m = 2 * f.grid.n();
  for (int s : f.grid.sizes()) d.dims.push_back(static_cast<std::uint32_t>(s));
  d.dims.insert(d.dims.end(), {static_cast<std::uint32_t>(m), static_cast<std::uint32_t>(m), 2u});
  d.values.reserve(f.size() * static_cast<std::size_t>(m * m * 2));
  for (const auto& q : f.values)
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        d.values.push_back(q(i, j).real());
        d.values.push_back(q(i, j).imag());
      }
  return d;
}

/// A scalar dump must carry exactly the grid sizes.
inline ScalarField scalar_from_dump(const RawDump& d, const TorusGrid& grid) {
  if (d.dims.size() != grid.sizes().size()) throw MalformedInput("field dump: dims do not match grid");
  for (std::size_t i = 0; i < d.dims.size(); ++i)
    if (static_cast<int>(d.dims[i]) != grid.sizes()[i]) throw MalformedInput("field dump: dims do not match grid");
  return {grid, d.values};
}

inline Form2Field form_from_dump(const RawDump& d, const TorusGrid& grid) {
  const int m = 2 * grid.n();
  const auto& sizes = grid.sizes();
  if (d.dims.size() != sizes.size() + 3) throw MalformedInput("form dump: dims do not match grid");
  for (std::size_t i = 0; i < sizes.size(); ++i)
    if (static_cast<int>(d.dims[i]) != sizes[i]) throw MalformedInput("form dump: dims do not match grid");
  const std::size_t k = sizes.size();
  if (static_cast<int>(d.dims[k]) != m || static_cast<int>(d.dims[k + 1]) != m || d.dims[k + 2] != 2)
    throw MalformedInput("form dump: trailing dims must be (2n, 2n, 2)");
  Form2Field out(grid, QForm2(grid.n()));
  std::size_t pos = 0;
  for (auto& q : out.values) {
    Eigen::MatrixXcd a(m, m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        a(i, j) = cplx(d.values[pos], d.values[pos + 1]);
        pos += 2;
      }
    q = QForm2::from_matrix(a);
  }
  return out;
}

}  // namespace qma
