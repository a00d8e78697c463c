#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "nlsmod/dynamics.hpp"
#include "nlsmod/grid.hpp"

namespace nlsmod::io {

namespace fs = std::filesystem;
using nlohmann::json;

/// Writes to a temporary sibling and renames it over `path`.
inline void write_atomic(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_json(const fs::path& path, const json& j) { write_atomic(path, j.dump(2) + "\n"); }

inline json read_json(const fs::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw Error("malformed JSON in " + path.string() + ": " + e.what());
  }
}

namespace detail {

inline std::uint64_t swap_bytes(std::uint64_t v) {
  std::uint64_t r = 0;
  for (int i = 0; i < 8; ++i) r = (r << 8) | ((v >> (8 * i)) & 0xffu);
  return r;
}

inline void put_le(std::string& out, double d) {
  auto bits = std::bit_cast<std::uint64_t>(d);
  if constexpr (std::endian::native == std::endian::big) bits = swap_bytes(bits);
  char buf[8];
  std::memcpy(buf, &bits, 8);
  out.append(buf, 8);
}

inline double get_le(const char* p) {
  std::uint64_t bits;
  std::memcpy(&bits, p, 8);
  if constexpr (std::endian::native == std::endian::big) bits = swap_bytes(bits);
  return std::bit_cast<double>(bits);
}

}  // namespace detail

inline json snapshot_header(const Field& f, double b) {
  return json{{"dimension", f.grid.dimension}, {"M", f.grid.points}, {"L", f.grid.half_width},
              {"frame", to_string(f.frame)},   {"time", f.time},       {"b", b}};
}

/// `base`.bin (little-endian float64, interleaved Re, Im) and `base`.json.
inline void write_snapshot(const fs::path& base, const Field& f, double b) {
  std::string bytes;
  bytes.reserve(f.size() * 16);
  for (const auto& z : f.values) {
    detail::put_le(bytes, z.real());
    detail::put_le(bytes, z.imag());
  }
  fs::path bin = base, hdr = base;
  bin += ".bin";
  hdr += ".json";
  write_atomic(bin, bytes);
  write_json(hdr, snapshot_header(f, b));
}

struct Snapshot {
  Field field;
  double b = 0.0;
};

inline Snapshot read_snapshot(const fs::path& base) {
  fs::path bin = base, hdr = base;
  bin += ".bin";
  hdr += ".json";
  const json h = read_json(hdr);
  Snapshot s;
  try {
    GridSpec g(h.at("dimension").get<int>(), h.at("L").get<double>(), h.at("M").get<int>());
    s.field = Field(g, frame_from_string(h.at("frame").get<std::string>()), h.at("time").get<double>());
    s.b = h.at("b").get<double>();
  } catch (const json::exception& e) {
    throw Error("snapshot header " + hdr.string() + " is missing a field: " + e.what());
  }
  const std::string bytes = read_file(bin);
  if (bytes.size() != s.field.size() * 16)
    throw Error("snapshot " + bin.string() + " has " + std::to_string(bytes.size()) +
                " bytes, expected " + std::to_string(s.field.size() * 16));
  for (std::size_t i = 0; i < s.field.size(); ++i)
    s.field[i] = Complex(detail::get_le(&bytes[16 * i]), detail::get_le(&bytes[16 * i + 8]));
  return s;
}

/// 1-D snapshot as CSV columns x, re, im.
inline void write_csv_1d(const fs::path& path, const Field& f) {
  if (f.grid.dimension != 1) throw Error("CSV snapshots are 1-D only");
  std::ostringstream os;
  os << std::setprecision(17) << "x,re,im\n";
  for (int i = 0; i < f.grid.points; ++i)
    os << f.grid.coordinate(i) << ',' << f[i].real() << ',' << f[i].imag() << '\n';
  write_atomic(path, os.str());
}

/// A checkpoint directory: state.{bin,json} with the schedule cursor, plus the snapshots so far.
inline void write_checkpoint(const fs::path& dir, const IntegratorState& st, double b,
                             const std::string& config_hash) {
  fs::create_directories(dir);
  for (std::size_t k = 0; k < st.snapshots.size(); ++k) {
    std::ostringstream name;
    name << "snap_" << std::setw(5) << std::setfill('0') << k;
    if (!fs::exists(dir / (name.str() + ".bin"))) write_snapshot(dir / name.str(), st.snapshots[k], b);
  }
  write_snapshot(dir / "state", st.current, b);
  // The cursor is written last so a torn checkpoint is never picked up.
  write_json(dir / "cursor.json", json{{"step", st.step},
                                       {"next_snapshot", st.next_snapshot},
                                       {"snapshots", st.snapshots.size()},
                                       {"time", st.current.time},
                                       {"config_hash", config_hash}});
}

inline bool checkpoint_exists(const fs::path& dir) { return fs::exists(dir / "cursor.json"); }

inline IntegratorState read_checkpoint(const fs::path& dir, const std::string& config_hash) {
  const json c = read_json(dir / "cursor.json");
  if (c.value("config_hash", std::string()) != config_hash)
    throw Error("checkpoint " + dir.string() + " was written for a different configuration");
  IntegratorState st;
  st.step = c.at("step").get<long>();
  st.next_snapshot = c.at("next_snapshot").get<std::size_t>();
  st.current = read_snapshot(dir / "state").field;
  const auto n = c.at("snapshots").get<std::size_t>();
  for (std::size_t k = 0; k < n; ++k) {
    std::ostringstream name;
    name << "snap_" << std::setw(5) << std::setfill('0') << k;
    st.snapshots.push_back(read_snapshot(dir / name.str()).field);
  }
  return st;
}

}  // namespace nlsmod::io
