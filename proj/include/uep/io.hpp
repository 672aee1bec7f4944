#pragma once

// File formats: annotations (JSON / CSV + dimensions sidecar), binary and CSV
// grids, map-set manifests, and the JSON/CSV forms of partitions, proxy
// tables, IPH pairs, error reports and comparison matrices.
//
// Every JSON document carries "format": "<family>/<major>"; readers reject
// other families and other majors. Doubles round-trip bit-exactly: JSON uses
// shortest round-trip output, CSV uses 17 significant digits.

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "json.hpp"
#include "uep/density.hpp"
#include "uep/error.hpp"
#include "uep/grid.hpp"
#include "uep/noise.hpp"
#include "uep/partition.hpp"
#include "uep/proxy.hpp"
#include "uep/quantization.hpp"

namespace uep::io {

using nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Basics

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

inline json read_json(const fs::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw DataError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

inline void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

inline std::string format_tag(std::string_view family, int major = 1) {
  return std::string(family) + "/" + std::to_string(major);
}

// Throws FormatError unless j["format"] is "<family>/<major>".
inline void check_format(const json& j, std::string_view family, int major = 1) {
  if (!j.is_object() || !j.contains("format") || !j["format"].is_string()) {
    throw FormatError("missing \"format\" tag (expected " + format_tag(family, major) + ")");
  }
  const std::string tag = j["format"].get<std::string>();
  const auto slash = tag.rfind('/');
  if (slash == std::string::npos || tag.substr(0, slash) != family) {
    throw FormatError("unexpected format '" + tag + "' (expected " + format_tag(family, major) +
                      ")");
  }
  if (tag.substr(slash + 1) != std::to_string(major)) {
    throw FormatError("incompatible version '" + tag + "': this reader understands " +
                      format_tag(family, major));
  }
}

namespace detail {

template <typename T>
T get_field(const json& j, const char* key) {
  if (!j.contains(key)) throw DataError(std::string("missing field \"") + key + "\"");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw DataError(std::string("field \"") + key + "\": " + e.what());
  }
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

inline std::optional<std::uint32_t> parse_u32(std::string_view s) {
  std::uint32_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

inline std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start < text.size()) {
    auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    out.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Annotations

inline json to_json(const PointAnnotation& a) {
  json pts = json::array();
  for (const auto& p : a.points) pts.push_back({p.x, p.y});
  return {{"image_id", a.image_id}, {"width", a.width}, {"height", a.height}, {"points", pts}};
}

inline PointAnnotation annotation_from_json(const json& j) {
  PointAnnotation a;
  a.image_id = detail::get_field<std::string>(j, "image_id");
  a.width = detail::get_field<std::uint32_t>(j, "width");
  a.height = detail::get_field<std::uint32_t>(j, "height");
  const auto pts = detail::get_field<std::vector<std::vector<double>>>(j, "points");
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (pts[i].size() != 2) {
      throw DataError("annotation '" + a.image_id + "': point " + std::to_string(i) +
                      " must be [x, y]");
    }
    a.points.push_back({pts[i][0], pts[i][1]});
  }
  a.validate();
  return a;
}

// A single annotation object or an array of them.
inline std::vector<PointAnnotation> load_annotations_json(const fs::path& path) {
  const json j = read_json(path);
  std::vector<PointAnnotation> out;
  if (j.is_array()) {
    for (const auto& item : j) out.push_back(annotation_from_json(item));
  } else {
    out.push_back(annotation_from_json(j));
  }
  return out;
}

inline void save_annotations_json(const fs::path& path, std::span<const PointAnnotation> anns) {
  json arr = json::array();
  for (const auto& a : anns) arr.push_back(to_json(a));
  write_json(path, arr);
}

// Points CSV (image_id,x,y) plus a dimensions sidecar (image_id,width,height).
// A header row is optional in both. Images appear in sidecar order.
inline std::vector<PointAnnotation> load_annotations_csv(const fs::path& points_path,
                                                         const fs::path& dims_path) {
  std::vector<PointAnnotation> out;
  std::map<std::string, std::size_t, std::less<>> index;
  {
    const std::string text = read_text(dims_path);
    const auto lines = detail::lines_of(text);
    for (std::size_t ln = 0; ln < lines.size(); ++ln) {
      if (detail::trim(lines[ln]).empty()) continue;
      const auto f = detail::split_csv(lines[ln]);
      if (ln == 0 && f.size() == 3 && f[1] == "width") continue;
      const auto w = f.size() == 3 ? detail::parse_u32(f[1]) : std::nullopt;
      const auto h = f.size() == 3 ? detail::parse_u32(f[2]) : std::nullopt;
      if (!w || !h) {
        throw DataError(dims_path.string() + ":" + std::to_string(ln + 1) +
                        ": expected image_id,width,height");
      }
      const std::string id(f[0]);
      if (index.contains(id)) {
        throw DataError(dims_path.string() + ":" + std::to_string(ln + 1) + ": duplicate image '" +
                        id + "'");
      }
      index.emplace(id, out.size());
      out.push_back({id, *w, *h, {}});
    }
  }
  const std::string text = read_text(points_path);
  const auto lines = detail::lines_of(text);
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    if (detail::trim(lines[ln]).empty()) continue;
    const auto f = detail::split_csv(lines[ln]);
    if (ln == 0 && f.size() == 3 && f[1] == "x") continue;
    const auto x = f.size() == 3 ? detail::parse_double(f[1]) : std::nullopt;
    const auto y = f.size() == 3 ? detail::parse_double(f[2]) : std::nullopt;
    if (!x || !y) {
      throw DataError(points_path.string() + ":" + std::to_string(ln + 1) +
                      ": expected image_id,x,y");
    }
    const auto it = index.find(f[0]);
    if (it == index.end()) {
      throw DataError(points_path.string() + ":" + std::to_string(ln + 1) + ": image '" +
                      std::string(f[0]) + "' has no entry in the dimensions sidecar");
    }
    out[it->second].points.push_back({*x, *y});
  }
  for (const auto& a : out) a.validate();
  return out;
}

inline void save_annotations_csv(const fs::path& points_path, const fs::path& dims_path,
                                 std::span<const PointAnnotation> anns) {
  std::string pts = "image_id,x,y\n";
  std::string dims = "image_id,width,height\n";
  for (const auto& a : anns) {
    dims += a.image_id + "," + std::to_string(a.width) + "," + std::to_string(a.height) + "\n";
    for (const auto& p : a.points)
      pts += a.image_id + "," + format_double(p.x) + "," + format_double(p.y) + "\n";
  }
  write_text(points_path, pts);
  write_text(dims_path, dims);
}

// JSON by default; ".csv" requires the dimensions sidecar.
inline std::vector<PointAnnotation> load_annotations(const fs::path& path,
                                                     const std::optional<fs::path>& dims = {}) {
  if (path.extension() == ".csv") {
    if (!dims) throw ParameterError("CSV annotations need a dimensions sidecar");
    return load_annotations_csv(path, *dims);
  }
  return load_annotations_json(path);
}

// ---------------------------------------------------------------------------
// Binary grids
//
// 16-byte header: magic (4 bytes), u32 rows, u32 cols, u32 aux; payload row-major.
// All integers and floats little-endian.
//   "UEPD": aux = 0, payload f64.
//   "UEPC": aux = u16 cell width (2) | u16 class count << 16, payload u16.

inline constexpr std::string_view kDensityMagic = "UEPD";
inline constexpr std::string_view kClassMagic = "UEPC";

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint64_t get_le(std::string_view in, std::size_t off, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    v |= std::uint64_t{static_cast<unsigned char>(in[off + static_cast<std::size_t>(i)])}
         << (8 * i);
  }
  return v;
}

struct GridHeader {
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::uint32_t aux = 0;
};

inline GridHeader read_header(std::string_view bytes, std::string_view magic,
                              std::size_t cell_bytes, const std::string& name) {
  if (bytes.size() < 16 || bytes.substr(0, 4) != magic) {
    throw FormatError("'" + name + "' is not a " + std::string(magic) + " grid file");
  }
  GridHeader h{static_cast<std::uint32_t>(get_le(bytes, 4, 4)),
               static_cast<std::uint32_t>(get_le(bytes, 8, 4)),
               static_cast<std::uint32_t>(get_le(bytes, 12, 4))};
  const std::uint64_t expected = 16 + std::uint64_t{h.rows} * h.cols * cell_bytes;
  if (bytes.size() != expected) {
    throw FormatError("'" + name + "': payload size " + std::to_string(bytes.size()) +
                      " does not match a " + std::to_string(h.rows) + "x" + std::to_string(h.cols) +
                      " grid");
  }
  return h;
}

}  // namespace detail

inline std::string encode_grid(const Grid<double>& g) {
  std::string out(kDensityMagic);
  detail::put_u32(out, static_cast<std::uint32_t>(g.rows()));
  detail::put_u32(out, static_cast<std::uint32_t>(g.cols()));
  detail::put_u32(out, 0);
  for (double v : g.flat()) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
  }
  return out;
}

inline Grid<double> decode_grid(std::string_view bytes, const std::string& name = "grid") {
  const auto h = detail::read_header(bytes, kDensityMagic, 8, name);
  std::vector<double> data(std::size_t{h.rows} * h.cols);
  for (std::size_t k = 0; k < data.size(); ++k) {
    const std::uint64_t bits = detail::get_le(bytes, 16 + 8 * k, 8);
    std::memcpy(&data[k], &bits, sizeof bits);
  }
  return Grid<double>(h.rows, h.cols, std::move(data));
}

inline std::string encode_class_grid(const Grid<std::uint16_t>& g, std::size_t m) {
  std::string out(kClassMagic);
  detail::put_u32(out, static_cast<std::uint32_t>(g.rows()));
  detail::put_u32(out, static_cast<std::uint32_t>(g.cols()));
  detail::put_u32(out, 2u | (static_cast<std::uint32_t>(m) << 16));
  for (std::uint16_t v : g.flat()) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>(v >> 8));
  }
  return out;
}

inline std::pair<Grid<std::uint16_t>, std::size_t> decode_class_grid(
    std::string_view bytes, const std::string& name = "class grid") {
  const auto h = detail::read_header(bytes, kClassMagic, 2, name);
  if ((h.aux & 0xffff) != 2) throw FormatError("'" + name + "': unsupported class cell width");
  const std::size_t m = h.aux >> 16;
  std::vector<std::uint16_t> data(std::size_t{h.rows} * h.cols);
  for (std::size_t k = 0; k < data.size(); ++k) {
    data[k] = static_cast<std::uint16_t>(detail::get_le(bytes, 16 + 2 * k, 2));
    if (data[k] >= m) {
      throw DataError("'" + name + "': class " + std::to_string(data[k]) + " at cell " +
                      std::to_string(k) + " exceeds class count " + std::to_string(m));
    }
  }
  return {Grid<std::uint16_t>(h.rows, h.cols, std::move(data)), m};
}

inline std::string grid_to_csv(const Grid<double>& g) {
  std::string out;
  for (std::size_t r = 0; r < g.rows(); ++r) {
    for (std::size_t c = 0; c < g.cols(); ++c) {
      if (c) out.push_back(',');
      out += format_double(g(r, c));
    }
    out.push_back('\n');
  }
  return out;
}

inline Grid<double> grid_from_csv(std::string_view text, const std::string& name = "grid") {
  std::vector<double> data;
  std::size_t rows = 0;
  std::size_t cols = 0;
  const auto lines = detail::lines_of(text);
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    if (detail::trim(lines[ln]).empty()) continue;
    const auto f = detail::split_csv(lines[ln]);
    if (rows == 0) cols = f.size();
    if (f.size() != cols) {
      throw DataError(name + ":" + std::to_string(ln + 1) + ": ragged row (" +
                      std::to_string(f.size()) + " cells, expected " + std::to_string(cols) + ")");
    }
    for (auto cell : f) {
      const auto v = detail::parse_double(cell);
      if (!v) throw DataError(name + ":" + std::to_string(ln + 1) + ": bad number");
      data.push_back(*v);
    }
    ++rows;
  }
  return Grid<double>(rows, cols, std::move(data));
}

// ---------------------------------------------------------------------------
// Map sets: a directory holding manifest.json plus one grid file per image.

enum class GridFormat { binary, csv };

inline constexpr std::string_view kMapSetFamily = "uep-maps";

namespace detail {

inline fs::path manifest_path(const fs::path& p) {
  return fs::is_directory(p) ? p / "manifest.json" : p;
}

inline std::string entry_name(std::size_t i, std::string_view ext) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06zu", i);
  return std::string(buf) + std::string(ext);
}

struct MapSetEntry {
  std::string image_id;
  fs::path file;
};

inline std::vector<MapSetEntry> read_manifest(const fs::path& path, std::string_view kind,
                                              json* manifest_out = nullptr) {
  const fs::path mp = manifest_path(path);
  const json j = read_json(mp);
  check_format(j, kMapSetFamily);
  const auto k = get_field<std::string>(j, "kind");
  if (k != kind) {
    throw DataError("'" + mp.string() + "' holds " + k + " maps, expected " + std::string(kind));
  }
  std::vector<MapSetEntry> out;
  for (const auto& e : get_field<json>(j, "maps")) {
    out.push_back({get_field<std::string>(e, "image_id"),
                   mp.parent_path() / get_field<std::string>(e, "file")});
  }
  if (manifest_out) *manifest_out = j;
  return out;
}

inline Grid<double> read_value_grid(const fs::path& file) {
  const std::string bytes = read_text(file);
  if (file.extension() == ".csv") return grid_from_csv(bytes, file.string());
  return decode_grid(bytes, file.string());
}

template <typename Map>
void save_value_maps(const fs::path& dir, std::span<const Map> maps, std::string_view kind,
                     GridFormat fmt, std::optional<int> patch_size) {
  fs::create_directories(dir);
  json entries = json::array();
  for (std::size_t i = 0; i < maps.size(); ++i) {
    const std::string name = entry_name(i, fmt == GridFormat::csv ? ".csv" : ".uepd");
    write_text(dir / name,
               fmt == GridFormat::csv ? grid_to_csv(maps[i].values) : encode_grid(maps[i].values));
    entries.push_back({{"image_id", maps[i].image_id},
                       {"file", name},
                       {"rows", maps[i].values.rows()},
                       {"cols", maps[i].values.cols()}});
  }
  json manifest = {{"format", format_tag(kMapSetFamily)}, {"kind", kind}, {"maps", entries}};
  if (patch_size) manifest["patch_size"] = *patch_size;
  write_json(dir / "manifest.json", manifest);
}

}  // namespace detail

inline void save_density_maps(const fs::path& dir, std::span<const DensityMap> maps,
                              GridFormat fmt = GridFormat::binary) {
  detail::save_value_maps(dir, maps, "density", fmt, std::nullopt);
}

inline std::vector<DensityMap> load_density_maps(const fs::path& path) {
  std::vector<DensityMap> out;
  for (const auto& e : detail::read_manifest(path, "density")) {
    out.push_back({e.image_id, detail::read_value_grid(e.file)});
  }
  return out;
}

inline void save_local_count_maps(const fs::path& dir, std::span<const LocalCountMap> maps,
                                  GridFormat fmt = GridFormat::binary) {
  const int s = maps.empty() ? 1 : maps.front().patch_size;
  detail::save_value_maps(dir, maps, "local-count", fmt, s);
}

inline std::vector<LocalCountMap> load_local_count_maps(const fs::path& path) {
  json manifest;
  const auto entries = detail::read_manifest(path, "local-count", &manifest);
  const int s = manifest.value("patch_size", 1);
  std::vector<LocalCountMap> out;
  for (const auto& e : entries) out.push_back({e.image_id, s, detail::read_value_grid(e.file)});
  return out;
}

inline void save_class_maps(const fs::path& dir, std::span<const ClassMap> maps) {
  fs::create_directories(dir);
  json entries = json::array();
  for (std::size_t i = 0; i < maps.size(); ++i) {
    const std::string name = detail::entry_name(i, ".uepc");
    write_text(dir / name, encode_class_grid(maps[i].values, maps[i].m));
    entries.push_back({{"image_id", maps[i].image_id},
                       {"file", name},
                       {"rows", maps[i].values.rows()},
                       {"cols", maps[i].values.cols()}});
  }
  const std::size_t m = maps.empty() ? 0 : maps.front().m;
  write_json(
      dir / "manifest.json",
      {{"format", format_tag(kMapSetFamily)}, {"kind", "class"}, {"m", m}, {"maps", entries}});
}

inline std::vector<ClassMap> load_class_maps(const fs::path& path) {
  std::vector<ClassMap> out;
  for (const auto& e : detail::read_manifest(path, "class")) {
    auto [grid, m] = decode_class_grid(read_text(e.file), e.file.string());
    out.push_back({e.image_id, m, std::move(grid)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Partitions, proxies, IPH pairs

inline constexpr std::string_view kPartitionFamily = "uep-partition";
inline constexpr std::string_view kProxiesFamily = "uep-proxies";
inline constexpr std::string_view kIphFamily = "uep-iph";

inline json to_json(const Partition& p) {
  json j = {{"format", format_tag(kPartitionFamily)},
            {"strategy", to_string(p.strategy())},
            {"m", p.m()},
            {"t0", p.t0()},
            {"t_max", p.t_max()},
            {"borders", std::vector<double>(p.borders().begin(), p.borders().end())},
            {"epsilon", nullptr},
            {"final_l_bar", nullptr}};
  if (p.search()) {
    j["epsilon"] = p.search()->epsilon;
    j["final_l_bar"] = p.search()->final_l_bar;
  }
  return j;
}

inline Partition partition_from_json(const json& j) {
  check_format(j, kPartitionFamily);
  auto borders = detail::get_field<std::vector<double>>(j, "borders");
  const Strategy s = parse_strategy(detail::get_field<std::string>(j, "strategy"));
  std::optional<SearchInfo> search;
  if (j.contains("epsilon") && !j["epsilon"].is_null()) {
    search = SearchInfo{detail::get_field<double>(j, "epsilon"),
                        detail::get_field<double>(j, "final_l_bar")};
  }
  Partition p(std::move(borders), s, search);
  if (detail::get_field<std::size_t>(j, "m") != p.m() ||
      detail::get_field<double>(j, "t0") != p.t0() ||
      detail::get_field<double>(j, "t_max") != p.t_max()) {
    throw DataError("partition file: m / t0 / t_max disagree with the borders");
  }
  return p;
}

inline json to_json(const ProxyTable& t) {
  return {{"format", format_tag(kProxiesFamily)},
          {"method", to_string(t.method)},
          {"proxies", t.proxies},
          {"empty_flags", t.empty_flags}};
}

inline ProxyTable proxies_from_json(const json& j) {
  check_format(j, kProxiesFamily);
  ProxyTable t;
  t.method = parse_proxy_method(detail::get_field<std::string>(j, "method"));
  t.proxies = detail::get_field<std::vector<double>>(j, "proxies");
  t.empty_flags = detail::get_field<std::vector<bool>>(j, "empty_flags");
  if (t.empty_flags.size() != t.proxies.size()) {
    throw DataError("proxy file: empty_flags and proxies differ in length");
  }
  return t;
}

inline json to_json(const Head& h) {
  return {{"partition", to_json(h.partition)}, {"proxies", to_json(h.proxies)}};
}

inline Head head_from_json(const json& j) {
  Head h{partition_from_json(detail::get_field<json>(j, "partition")),
         proxies_from_json(detail::get_field<json>(j, "proxies"))};
  if (h.proxies.size() != h.partition.m()) {
    throw DataError("head: proxy table does not match its partition");
  }
  return h;
}

inline json to_json(const IphPair& pair) {
  return {{"format", format_tag(kIphFamily)},
          {"head0", to_json(pair.head0)},
          {"head1", to_json(pair.head1)}};
}

inline IphPair iph_from_json(const json& j) {
  check_format(j, kIphFamily);
  return {head_from_json(detail::get_field<json>(j, "head0")),
          head_from_json(detail::get_field<json>(j, "head1"))};
}

// ---------------------------------------------------------------------------
// Error reports

inline constexpr std::string_view kErrorReportFamily = "uep-error-report";

inline json to_json(const ErrorReport& r) {
  json images = json::array();
  for (const auto& im : r.images) {
    images.push_back({{"image_id", im.image_id},
                      {"truth", im.truth},
                      {"predicted", im.predicted},
                      {"signed_diff", im.signed_diff},
                      {"abs_error", im.abs_error}});
  }
  json intervals = json::array();
  for (const auto& ie : r.intervals) {
    intervals.push_back({{"n", ie.n},
                         {"length", ie.length},
                         {"nl", ie.nl},
                         {"signed_sum", ie.signed_sum},
                         {"abs_sum", ie.abs_sum},
                         {"class_mae", ie.class_mae},
                         {"discretization_signed", ie.discretization_signed},
                         {"misclass_signed", ie.misclass_signed}});
  }
  return {{"format", format_tag(kErrorReportFamily)},
          {"mae", r.mae},
          {"mse", r.mse},
          {"total_signed", r.total_signed},
          {"pooled_abs", r.pooled_abs},
          {"clamped", r.clamped},
          {"images", images},
          {"intervals", intervals}};
}

inline ErrorReport error_report_from_json(const json& j) {
  check_format(j, kErrorReportFamily);
  ErrorReport r;
  r.mae = detail::get_field<double>(j, "mae");
  r.mse = detail::get_field<double>(j, "mse");
  r.total_signed = detail::get_field<double>(j, "total_signed");
  r.pooled_abs = detail::get_field<double>(j, "pooled_abs");
  r.clamped = detail::get_field<std::size_t>(j, "clamped");
  for (const auto& im : detail::get_field<json>(j, "images")) {
    r.images.push_back(
        {detail::get_field<std::string>(im, "image_id"), detail::get_field<double>(im, "truth"),
         detail::get_field<double>(im, "predicted"), detail::get_field<double>(im, "signed_diff"),
         detail::get_field<double>(im, "abs_error")});
  }
  for (const auto& ie : detail::get_field<json>(j, "intervals")) {
    r.intervals.push_back(
        {detail::get_field<std::size_t>(ie, "n"), detail::get_field<double>(ie, "length"),
         detail::get_field<double>(ie, "nl"), detail::get_field<double>(ie, "signed_sum"),
         detail::get_field<double>(ie, "abs_sum"), detail::get_field<double>(ie, "class_mae"),
         detail::get_field<double>(ie, "discretization_signed"),
         detail::get_field<double>(ie, "misclass_signed")});
  }
  return r;
}

// One row per interval, then a "summary" row holding column totals
// (class_mae in the summary row is total abs error over total cells).
inline std::string error_report_csv(const ErrorReport& r) {
  std::string out =
      "interval,n,length,nl,signed_sum,abs_sum,class_mae,discretization_signed,misclass_signed\n";
  std::size_t n = 0;
  CompensatedSum len, nl, sg, ab, di, mi;
  for (std::size_t i = 0; i < r.intervals.size(); ++i) {
    const auto& ie = r.intervals[i];
    out += std::to_string(i) + "," + std::to_string(ie.n) + "," + format_double(ie.length) + "," +
           format_double(ie.nl) + "," + format_double(ie.signed_sum) + "," +
           format_double(ie.abs_sum) + "," + format_double(ie.class_mae) + "," +
           format_double(ie.discretization_signed) + "," + format_double(ie.misclass_signed) + "\n";
    n += ie.n;
    len.add(ie.length);
    nl.add(ie.nl);
    sg.add(ie.signed_sum);
    ab.add(ie.abs_sum);
    di.add(ie.discretization_signed);
    mi.add(ie.misclass_signed);
  }
  const double cell_mae = n ? ab.value() / static_cast<double>(n) : 0.0;
  out += "summary," + std::to_string(n) + "," + format_double(len.value()) + "," +
         format_double(nl.value()) + "," + format_double(sg.value()) + "," +
         format_double(ab.value()) + "," + format_double(cell_mae) + "," +
         format_double(di.value()) + "," + format_double(mi.value()) + "\n";
  return out;
}

// Per-interval contribution series for external plotting.
inline std::string plot_data_csv(const ErrorReport& r) {
  std::string out = "class,n,l,nl,class_mae\n";
  for (std::size_t i = 0; i < r.intervals.size(); ++i) {
    const auto& ie = r.intervals[i];
    out += std::to_string(i) + "," + std::to_string(ie.n) + "," + format_double(ie.length) + "," +
           format_double(ie.nl) + "," + format_double(ie.class_mae) + "\n";
  }
  return out;
}

inline std::string images_csv(const ErrorReport& r) {
  std::string out = "image_id,truth,predicted,signed_diff,abs_error\n";
  for (const auto& im : r.images) {
    out += im.image_id + "," + format_double(im.truth) + "," + format_double(im.predicted) + "," +
           format_double(im.signed_diff) + "," + format_double(im.abs_error) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Comparison matrices

inline constexpr std::string_view kComparisonFamily = "uep-comparison";
inline constexpr std::string_view kComparisonSetFamily = "uep-comparison-set";

inline json to_json(const ComparisonMatrix& cm) {
  json strategies = json::array();
  for (Strategy s : cm.strategies) strategies.push_back(to_string(s));
  json methods = json::array();
  for (ProxyMethod pm : cm.methods) methods.push_back(to_string(pm));
  json cells = json::array();
  for (const auto& c : cm.cells) {
    json images = json::array();
    for (const auto& im : c.images) {
      images.push_back({{"image_id", im.image_id},
                        {"truth", im.truth},
                        {"predicted", im.predicted},
                        {"discretization", im.discretization}});
    }
    cells.push_back({{"strategy", to_string(c.strategy)},
                     {"method", to_string(c.method)},
                     {"feasible", c.feasible},
                     {"error", c.error},
                     {"mae", c.mae},
                     {"mse", c.mse},
                     {"discretization", c.discretization},
                     {"nl_cv", c.nl_cv},
                     {"images", images}});
  }
  return {{"format", format_tag(kComparisonFamily)},
          {"seed", cm.seed},
          {"noise", cm.noise},
          {"m", cm.m},
          {"strategies", strategies},
          {"methods", methods},
          {"cells", cells}};
}

inline ComparisonMatrix comparison_from_json(const json& j) {
  check_format(j, kComparisonFamily);
  ComparisonMatrix cm;
  cm.seed = detail::get_field<std::uint64_t>(j, "seed");
  cm.noise = detail::get_field<std::string>(j, "noise");
  cm.m = detail::get_field<std::size_t>(j, "m");
  for (const auto& s : detail::get_field<std::vector<std::string>>(j, "strategies")) {
    cm.strategies.push_back(parse_strategy(s));
  }
  for (const auto& s : detail::get_field<std::vector<std::string>>(j, "methods")) {
    cm.methods.push_back(parse_proxy_method(s));
  }
  for (const auto& c : detail::get_field<json>(j, "cells")) {
    ComparisonCell cell;
    cell.strategy = parse_strategy(detail::get_field<std::string>(c, "strategy"));
    cell.method = parse_proxy_method(detail::get_field<std::string>(c, "method"));
    cell.feasible = detail::get_field<bool>(c, "feasible");
    cell.error = detail::get_field<std::string>(c, "error");
    cell.mae = detail::get_field<double>(c, "mae");
    cell.mse = detail::get_field<double>(c, "mse");
    cell.discretization = detail::get_field<double>(c, "discretization");
    cell.nl_cv = detail::get_field<double>(c, "nl_cv");
    for (const auto& im : detail::get_field<json>(c, "images")) {
      cell.images.push_back({detail::get_field<std::string>(im, "image_id"),
                             detail::get_field<double>(im, "truth"),
                             detail::get_field<double>(im, "predicted"),
                             detail::get_field<double>(im, "discretization")});
    }
    cm.cells.push_back(std::move(cell));
  }
  if (cm.cells.size() != cm.strategies.size() * cm.methods.size()) {
    throw DataError("comparison matrix: cell count does not match rows x columns");
  }
  return cm;
}

inline json to_json(std::span<const ComparisonMatrix> set) {
  json arr = json::array();
  for (const auto& cm : set) arr.push_back(to_json(cm));
  return {{"format", format_tag(kComparisonSetFamily)}, {"matrices", arr}};
}

inline std::vector<ComparisonMatrix> comparison_set_from_json(const json& j) {
  check_format(j, kComparisonSetFamily);
  std::vector<ComparisonMatrix> out;
  for (const auto& cm : detail::get_field<json>(j, "matrices")) {
    out.push_back(comparison_from_json(cm));
  }
  return out;
}

// One row per (seed, cell) followed by one "mean" row per cell averaged over seeds.
inline std::string comparison_csv(std::span<const ComparisonMatrix> set) {
  std::string out = "seed,strategy,proxies,feasible,mae,mse,discretization,nl_cv\n";
  for (const auto& cm : set) {
    for (const auto& c : cm.cells) {
      out += std::to_string(cm.seed) + "," + std::string(to_string(c.strategy)) + "," +
             std::string(to_string(c.method)) + "," + (c.feasible ? "1" : "0") + "," +
             format_double(c.mae) + "," + format_double(c.mse) + "," +
             format_double(c.discretization) + "," + format_double(c.nl_cv) + "\n";
    }
  }
  if (set.empty()) return out;
  const auto n = static_cast<double>(set.size());
  for (std::size_t k = 0; k < set.front().cells.size(); ++k) {
    const auto& first = set.front().cells[k];
    CompensatedSum mae, mse, disc, cv;
    bool feasible = true;
    for (const auto& cm : set) {
      feasible = feasible && cm.cells[k].feasible;
      mae.add(cm.cells[k].mae);
      mse.add(cm.cells[k].mse);
      disc.add(cm.cells[k].discretization);
      cv.add(cm.cells[k].nl_cv);
    }
    out += "mean," + std::string(to_string(first.strategy)) + "," +
           std::string(to_string(first.method)) + "," + (feasible ? "1" : "0") + "," +
           format_double(mae.value() / n) + "," + format_double(mse.value() / n) + "," +
           format_double(disc.value() / n) + "," + format_double(cv.value() / n) + "\n";
  }
  return out;
}

inline std::string comparison_images_csv(std::span<const ComparisonMatrix> set) {
  std::string out = "seed,strategy,proxies,image_id,truth,predicted,discretization\n";
  for (const auto& cm : set) {
    for (const auto& c : cm.cells) {
      for (const auto& im : c.images) {
        out += std::to_string(cm.seed) + "," + std::string(to_string(c.strategy)) + "," +
               std::string(to_string(c.method)) + "," + im.image_id + "," +
               format_double(im.truth) + "," + format_double(im.predicted) + "," +
               format_double(im.discretization) + "\n";
      }
    }
  }
  return out;
}

inline json to_json(const IphAblationReport& r) {
  return {{"format", format_tag("uep-iph-ablation")},
          {"seed", r.seed},
          {"single_mae", r.single_mae},
          {"single_mse", r.single_mse},
          {"iph_mae", r.iph_mae},
          {"iph_mse", r.iph_mse},
          {"both_correct", r.both_correct},
          {"head0_only", r.head0_only},
          {"head1_only", r.head1_only},
          {"neither", r.neither}};
}

// ---------------------------------------------------------------------------
// Dataset manifests and run configurations

struct DatasetManifest {
  std::string name;
  std::string split = "train";  // train | eval
  std::vector<fs::path> annotations;
  std::optional<fs::path> dims;  // sidecar for CSV annotation files
  KernelSpec kernel;
  int patch_size = 8;
  std::string notes;
};

inline DatasetManifest load_dataset_manifest(const fs::path& path) {
  const json j = read_json(path);
  check_format(j, "uep-dataset");
  DatasetManifest d;
  const fs::path base = path.parent_path();
  d.name = detail::get_field<std::string>(j, "name");
  d.split = detail::get_field<std::string>(j, "split");
  if (d.split != "train" && d.split != "eval") {
    throw DataError("dataset split must be \"train\" or \"eval\"");
  }
  for (const auto& a : detail::get_field<std::vector<std::string>>(j, "annotations")) {
    d.annotations.push_back(base / a);
  }
  if (j.contains("dims")) d.dims = base / detail::get_field<std::string>(j, "dims");
  d.patch_size = j.value("patch_size", 8);
  d.notes = j.value("notes", "");
  const json k = j.value("kernel", json::object());
  if (k.contains("adaptive")) {
    const json& a = k["adaptive"];
    d.kernel.mode =
        GeometryAdaptive{a.value("k", 3), a.value("beta", 0.3), a.value("fallback_sigma", 15.0)};
  } else {
    d.kernel.mode = FixedSigma{k.value("sigma", 15.0)};
  }
  d.kernel.truncation_radius_sigmas = k.value("truncation", 4.0);
  d.kernel.renormalize_at_borders = k.value("renormalize", true);
  if (d.patch_size < 1) throw ParameterError("dataset patch_size must be >= 1");
  d.kernel.validate();
  for (const auto& a : d.annotations) {
    if (!fs::exists(a)) throw DataError("dataset '" + d.name + "': missing file " + a.string());
  }
  if (d.dims && !fs::exists(*d.dims)) {
    throw DataError("dataset '" + d.name + "': missing file " + d.dims->string());
  }
  return d;
}

struct RunConfig {
  std::size_t m = 25;
  double t0 = 1.6e-4;
  std::optional<double> epsilon;
  Strategy strategy = Strategy::uep;
  ProxyMethod proxies = ProxyMethod::mcp;
  NoiseModel noise;
  std::uint64_t seed = 0;
  std::string out;

  void validate() const {
    if (m < 2) throw ParameterError("m must be >= 2");
    if (!(t0 > 0.0)) throw ParameterError("t0 must be positive");
    if (epsilon && !(*epsilon > 0.0)) throw ParameterError("epsilon must be positive");
    noise.validate();
  }
};

inline json to_json(const RunConfig& c) {
  return {{"format", format_tag("uep-run")},
          {"m", c.m},
          {"t0", c.t0},
          {"epsilon", c.epsilon ? json(*c.epsilon) : json(nullptr)},
          {"strategy", to_string(c.strategy)},
          {"proxies", to_string(c.proxies)},
          {"noise", format_noise(c.noise)},
          {"seed", c.seed},
          {"out", c.out}};
}

inline RunConfig run_config_from_json(const json& j) {
  check_format(j, "uep-run");
  RunConfig c;
  c.m = detail::get_field<std::size_t>(j, "m");
  c.t0 = detail::get_field<double>(j, "t0");
  if (j.contains("epsilon") && !j["epsilon"].is_null()) c.epsilon = j["epsilon"].get<double>();
  c.strategy = parse_strategy(detail::get_field<std::string>(j, "strategy"));
  c.proxies = parse_proxy_method(detail::get_field<std::string>(j, "proxies"));
  c.seed = detail::get_field<std::uint64_t>(j, "seed");
  c.noise = parse_noise(detail::get_field<std::string>(j, "noise"), c.seed);
  c.out = j.value("out", "");
  c.validate();
  return c;
}

}  // namespace uep::io
