// Copyright 2026 The vidpriv Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Persistence: binary checkpoints, trade-off tables and scatter plot data.
//
// Checkpoint layout (all integers and reals little-endian):
//
//   "VPCK"  u32 version
//   u32 role  i32 depth  f64 width  i32 num_outputs  i32 channels
//   u64 seed  u64 step   u32 tensor count
//   per tensor: u32 name length, name bytes, u32 rank, i32 dims[rank],
//               u64 count, f64 values[count]

#ifndef VIDPRIV_IO_HPP_
#define VIDPRIV_IO_HPP_

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <bit>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "vidpriv/common.hpp"
#include "vidpriv/evaluation.hpp"
#include "vidpriv/models.hpp"

namespace vidpriv {

inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

class ByteWriter {
 public:
  template <typename U>
  void put(U v) {
    static_assert(std::is_integral_v<U>);
    using W = std::make_unsigned_t<U>;
    auto u = static_cast<W>(v);
    for (std::size_t i = 0; i < sizeof(U); ++i) bytes_.push_back(static_cast<char>((u >> (8 * i)) & 0xFF));
  }
  void put_f64(double d) { put(std::bit_cast<std::uint64_t>(d)); }
  void put_raw(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
  const std::string& bytes() const { return bytes_; }

 private:
  std::string bytes_;
};

class ByteReader {
 public:
  ByteReader(std::string bytes, std::string what) : bytes_(std::move(bytes)), what_(std::move(what)) {}

  template <typename U>
  U get() {
    static_assert(std::is_integral_v<U>);
    need(sizeof(U));
    std::make_unsigned_t<U> u = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i)
      u |= static_cast<std::make_unsigned_t<U>>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += sizeof(U);
    return static_cast<U>(u);
  }
  double get_f64() { return std::bit_cast<double>(get<std::uint64_t>()); }
  std::string get_raw(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw IoError(what_ + ": truncated checkpoint");
  }
  std::string bytes_;
  std::string what_;
  std::size_t pos_ = 0;
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + p.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + p.string());
}

}  // namespace detail

template <typename S>
struct Checkpoint {
  ParameterSet<S> params;
  std::uint64_t step = 0;
};

template <typename S>
std::string encode_checkpoint(const ParameterSet<S>& p, std::uint64_t step) {
  detail::ByteWriter w;
  w.put_raw("VPCK");
  w.put(kCheckpointVersion);
  w.put(static_cast<std::uint32_t>(p.arch.role));
  w.put(static_cast<std::int32_t>(p.arch.depth));
  w.put_f64(p.arch.width_multiplier);
  w.put(static_cast<std::int32_t>(p.arch.num_outputs));
  w.put(static_cast<std::int32_t>(p.arch.channels));
  w.put(p.seed);
  w.put(step);
  w.put(static_cast<std::uint32_t>(p.weights.size()));
  for (const auto& t : p.weights) {
    w.put(static_cast<std::uint32_t>(t.name.size()));
    w.put_raw(t.name);
    w.put(static_cast<std::uint32_t>(t.shape.size()));
    for (int d : t.shape) w.put(static_cast<std::int32_t>(d));
    w.put(static_cast<std::uint64_t>(t.values.size()));
    for (S v : t.values) w.put_f64(static_cast<double>(v));
  }
  return w.bytes();
}

/// Decodes and validates a checkpoint. Tensor names and shapes must match the
/// stored architecture exactly.
template <typename S>
Checkpoint<S> decode_checkpoint(std::string bytes, const std::string& what = "checkpoint") {
  detail::ByteReader r(std::move(bytes), what);
  if (r.get_raw(4) != "VPCK") throw IoError(what + ": not a checkpoint (bad magic)");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw IoError(detail::concat(what, ": unsupported checkpoint version ", version));
  Checkpoint<S> c;
  ArchSpec& a = c.params.arch;
  const auto role = r.get<std::uint32_t>();
  if (role > 2) throw IoError(detail::concat(what, ": bad role ", role));
  a.role = static_cast<Role>(role);
  a.depth = r.get<std::int32_t>();
  a.width_multiplier = r.get_f64();
  a.num_outputs = r.get<std::int32_t>();
  a.channels = r.get<std::int32_t>();
  c.params.seed = r.get<std::uint64_t>();
  c.step = r.get<std::uint64_t>();
  try {
    validate(a);
  } catch (const ArgumentError& e) {
    throw IoError(what + ": " + e.what());
  }
  const auto n = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n; ++i) {
    NamedTensor<S> t;
    t.name = r.get_raw(r.get<std::uint32_t>());
    const auto rank = r.get<std::uint32_t>();
    if (rank > 8) throw IoError(detail::concat(what, ": tensor ", t.name, " has rank ", rank));
    std::uint64_t expect = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      t.shape.push_back(r.get<std::int32_t>());
      expect *= static_cast<std::uint64_t>(std::max(t.shape.back(), 0));
    }
    const auto count = r.get<std::uint64_t>();
    if (count != expect) throw IoError(detail::concat(what, ": tensor ", t.name, " size does not match its shape"));
    t.values.resize(count);
    for (auto& v : t.values) v = static_cast<S>(r.get_f64());
    c.params.weights.push_back(std::move(t));
  }
  if (!r.done()) throw IoError(what + ": trailing bytes");

  const ParameterSet<S> ref = init_params<S>(a, 0);
  if (ref.weights.size() != c.params.weights.size())
    throw IoError(detail::concat(what, ": expected ", ref.weights.size(), " tensors, found ",
                                 c.params.weights.size()));
  for (std::size_t i = 0; i < ref.weights.size(); ++i) {
    const auto& want = ref.weights[i];
    const auto& got = c.params.weights[i];
    if (want.name != got.name || want.shape != got.shape)
      throw IoError(detail::concat(what, ": tensor ", i, " is '", got.name, "', expected '", want.name,
                                   "' with matching shape"));
    for (S v : got.values)
      if (!std::isfinite(static_cast<double>(v))) throw IoError(what + ": non-finite weight in " + got.name);
  }
  return c;
}

template <typename S>
void save_checkpoint(const std::filesystem::path& path, const ParameterSet<S>& p, std::uint64_t step) {
  detail::write_file(path, encode_checkpoint(p, step));
}

template <typename S>
Checkpoint<S> load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint<S>(detail::read_file(path), path.string());
}

// ---------------------------------------------------------------------------
// Trade-off tables.

inline constexpr const char* kTableHeader = "method,variant,A_T,A_B,n_attackers";

enum class TablePrecision {
  kPercent,  // one decimal, in percent
  kFull,     // fractions, shortest exact representation
};

namespace detail {

inline std::string format_value(double v, TablePrecision p) {
  if (p == TablePrecision::kPercent) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", v * 100.0);
    return buf;
  }
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

inline double parse_real(const std::string& s, std::size_t line, const char* col) {
  double v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw SchemaError(detail::concat("line ", line, ": bad ", col, " value '", s, "'"));
  return v;
}

}  // namespace detail

inline std::string format_row(const TradeoffPoint& p, TablePrecision prec) {
  return p.method + "," + p.variant.tag() + "," + detail::format_value(p.A_T, prec) + "," +
         detail::format_value(p.A_B, prec) + "," + std::to_string(p.n_attackers);
}

inline std::string format_table(const std::vector<TradeoffPoint>& rows, TablePrecision prec) {
  std::string s = std::string(kTableHeader) + "\n";
  for (const auto& r : rows) s += format_row(r, prec) + "\n";
  return s;
}

/// Parses a table. Errors name the 1-based line. Blank lines are skipped.
inline std::vector<TradeoffPoint> parse_table(std::istream& in, TablePrecision prec) {
  std::vector<TradeoffPoint> rows;
  std::string line;
  std::size_t no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!header) {
      if (line != kTableHeader)
        throw SchemaError(detail::concat("line ", no, ": expected header '", kTableHeader, "'"));
      header = true;
      continue;
    }
    const auto f = detail::split_csv(line);
    if (f.size() != 5) throw SchemaError(detail::concat("line ", no, ": expected 5 fields, found ", f.size()));
    TradeoffPoint p;
    p.method = f[0];
    try {
      p.variant = Variant::parse(f[0], f[1]);
    } catch (const SchemaError& e) {
      throw SchemaError(detail::concat("line ", no, ": ", e.what()));
    }
    const double scale = prec == TablePrecision::kPercent ? 100.0 : 1.0;
    p.A_T = detail::parse_real(f[2], no, "A_T") / scale;
    p.A_B = detail::parse_real(f[3], no, "A_B") / scale;
    if (!(p.A_T >= 0 && p.A_T <= 1) || !(p.A_B >= 0 && p.A_B <= 1))
      throw SchemaError(detail::concat("line ", no, ": accuracy out of range"));
    const double n = detail::parse_real(f[4], no, "n_attackers");
    if (n < 0 || n != static_cast<int>(n))
      throw SchemaError(detail::concat("line ", no, ": bad n_attackers '", f[4], "'"));
    p.n_attackers = static_cast<int>(n);
    rows.push_back(std::move(p));
  }
  return rows;
}

inline std::vector<TradeoffPoint> read_table(const std::filesystem::path& path, TablePrecision prec) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return parse_table(in, prec);
  } catch (const SchemaError& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

/// Companion file holding the full-precision copy of a table.
inline std::filesystem::path full_precision_path(const std::filesystem::path& table) {
  auto p = table;
  p.replace_extension(".full.csv");
  return p;
}

/// Appends one row under an exclusive lock, writing the header into an empty
/// file. Safe for concurrent writers on the same table.
inline void append_row(const std::filesystem::path& path, const TradeoffPoint& p, TablePrecision prec) {
  const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
  if (fd < 0) throw IoError("cannot open " + path.string() + ": " + std::strerror(errno));
  struct Closer {
    int fd;
    ~Closer() { ::close(fd); }
  } closer{fd};
  if (::flock(fd, LOCK_EX) != 0) throw IoError("cannot lock " + path.string());
  std::string text;
  if (::lseek(fd, 0, SEEK_END) == 0) text = std::string(kTableHeader) + "\n";
  text += format_row(p, prec) + "\n";
  std::size_t off = 0;
  while (off < text.size()) {
    const ssize_t n = ::write(fd, text.data() + off, text.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw IoError("write to " + path.string() + " failed: " + std::strerror(errno));
    }
    off += static_cast<std::size_t>(n);
  }
  ::flock(fd, LOCK_UN);
}

/// Appends to the one-decimal table and its full-precision companion.
inline void record_point(const std::filesystem::path& table, const TradeoffPoint& p) {
  append_row(table, p, TablePrecision::kPercent);
  append_row(full_precision_path(table), p, TablePrecision::kFull);
}

// ---------------------------------------------------------------------------
// Plot data.

/// Scatter-ready rows "A_B,A_T,method,variant,marker_size" in percent. When a
/// downsample r=1 row exists (no anonymization), its A_T and A_B are emitted
/// first as "# ref_A_T=..." and "# ref_A_B=..." comment lines.
inline std::string plotdata(const std::vector<TradeoffPoint>& rows) {
  if (rows.empty()) return {};
  std::ostringstream os;
  for (const auto& r : rows)
    if (r.method == "downsample" && r.variant.r == 1) {
      os << "# ref_A_T=" << detail::format_value(r.A_T, TablePrecision::kPercent) << "\n";
      os << "# ref_A_B=" << detail::format_value(r.A_B, TablePrecision::kPercent) << "\n";
      break;
    }
  os << "A_B,A_T,method,variant,marker_size\n";
  for (const auto& r : rows)
    os << detail::format_value(r.A_B, TablePrecision::kPercent) << ','
       << detail::format_value(r.A_T, TablePrecision::kPercent) << ',' << r.method << ',' << r.variant.tag()
       << ',' << r.variant.marker_size() << "\n";
  return os.str();
}

}  // namespace vidpriv

#endif  // VIDPRIV_IO_HPP_
