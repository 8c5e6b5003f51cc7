#include "primht/io.hpp"

#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

namespace primht {

namespace {

void finalize(PointCloud& cloud, std::vector<double>& xyz, std::vector<double>& n) {
  const Index count = static_cast<Index>(xyz.size() / 3);
  cloud.points = Eigen::Map<Points3>(xyz.data(), 3, count);
  if (!n.empty() && n.size() == xyz.size()) {
    cloud.normals = Eigen::Map<Points3>(n.data(), 3, count);
    cloud.normal_reliable.assign(static_cast<std::size_t>(count), 1);
    for (Index i = 0; i < count; ++i) {
      const double len = cloud.normals.col(i).norm();
      if (len > 0) cloud.normals.col(i) /= len;
    }
  }
}

}  // namespace

PointCloud read_xyz(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path.string());
  std::vector<double> xyz, normals;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t start = line.find_first_not_of(" \t\r");
    if (start == std::string::npos || line[start] == '#') continue;
    std::istringstream ls(line);
    double v[6];
    int got = 0;
    while (got < 6 && (ls >> v[got])) ++got;
    if (got != 3 && got != 6)
      throw InvalidInput(path.string() + ":" + std::to_string(lineno) + ": expected 3 or 6 numbers");
    xyz.insert(xyz.end(), v, v + 3);
    if (got == 6) normals.insert(normals.end(), v + 3, v + 6);
  }
  if (xyz.empty()) throw InvalidInput(path.string() + ": no points");
  PointCloud cloud;
  cloud.id = path.stem().string();
  finalize(cloud, xyz, normals);
  return cloud;
}

void write_xyz(const std::filesystem::path& path, const PointCloud& cloud) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot open " + path.string() + " for writing");
  out.precision(17);
  for (Index i = 0; i < cloud.size(); ++i) {
    out << cloud.points(0, i) << ' ' << cloud.points(1, i) << ' ' << cloud.points(2, i);
    if (cloud.has_normals())
      out << ' ' << cloud.normals(0, i) << ' ' << cloud.normals(1, i) << ' ' << cloud.normals(2, i);
    out << '\n';
  }
}

namespace {

struct PlyProperty {
  std::string name;
  std::string type;
  bool is_list = false;
  std::string count_type;
};

struct PlyElement {
  std::string name;
  long count = 0;
  std::vector<PlyProperty> props;
};

std::size_t scalar_size(const std::string& type) {
  if (type == "char" || type == "uchar" || type == "int8" || type == "uint8") return 1;
  if (type == "short" || type == "ushort" || type == "int16" || type == "uint16") return 2;
  if (type == "int" || type == "uint" || type == "int32" || type == "uint32" || type == "float" ||
      type == "float32")
    return 4;
  if (type == "double" || type == "float64" || type == "int64" || type == "uint64") return 8;
  throw InvalidInput("unknown ply type: " + type);
}

double read_binary_scalar(std::istream& in, const std::string& type) {
  unsigned char buf[8];
  const std::size_t size = scalar_size(type);
  in.read(reinterpret_cast<char*>(buf), static_cast<std::streamsize>(size));
  if (!in) throw InvalidInput("unexpected end of ply data");
  auto as = [&](auto value) {
    std::memcpy(&value, buf, sizeof(value));
    return static_cast<double>(value);
  };
  if (type == "char" || type == "int8") return as(std::int8_t{});
  if (type == "uchar" || type == "uint8") return as(std::uint8_t{});
  if (type == "short" || type == "int16") return as(std::int16_t{});
  if (type == "ushort" || type == "uint16") return as(std::uint16_t{});
  if (type == "int" || type == "int32") return as(std::int32_t{});
  if (type == "uint" || type == "uint32") return as(std::uint32_t{});
  if (type == "float" || type == "float32") return as(float{});
  if (type == "double" || type == "float64") return as(double{});
  if (type == "int64") return as(std::int64_t{});
  if (type == "uint64") return as(std::uint64_t{});
  throw InvalidInput("unknown ply type: " + type);
}

}  // namespace

PointCloud read_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw InvalidInput(path.string() + ": empty file");
  if (line.rfind("ply", 0) != 0) throw InvalidInput(path.string() + ": not a ply file");

  bool binary = false;
  std::vector<PlyElement> elements;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "comment" || word == "obj_info" || word.empty()) continue;
    if (word == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt == "ascii") {
        binary = false;
      } else if (fmt == "binary_little_endian") {
        binary = true;
      } else {
        throw InvalidInput(path.string() + ": unsupported ply format " + fmt);
      }
    } else if (word == "element") {
      PlyElement el;
      ls >> el.name >> el.count;
      elements.push_back(el);
    } else if (word == "property") {
      if (elements.empty()) throw InvalidInput(path.string() + ": property before element");
      PlyProperty p;
      std::string type;
      ls >> type;
      if (type == "list") {
        p.is_list = true;
        ls >> p.count_type >> p.type >> p.name;
      } else {
        p.type = type;
        ls >> p.name;
      }
      elements.back().props.push_back(p);
    } else if (word == "end_header") {
      break;
    } else {
      throw InvalidInput(path.string() + ": unexpected header line: " + line);
    }
  }

  std::vector<double> xyz, normals;
  bool have_normals = false;

  for (const auto& el : elements) {
    const bool is_vertex = el.name == "vertex";
    int ix = -1, iy = -1, iz = -1, inx = -1, iny = -1, inz = -1;
    if (is_vertex) {
      for (std::size_t p = 0; p < el.props.size(); ++p) {
        const std::string& n = el.props[p].name;
        if (n == "x") ix = static_cast<int>(p);
        if (n == "y") iy = static_cast<int>(p);
        if (n == "z") iz = static_cast<int>(p);
        if (n == "nx") inx = static_cast<int>(p);
        if (n == "ny") iny = static_cast<int>(p);
        if (n == "nz") inz = static_cast<int>(p);
      }
      if (ix < 0 || iy < 0 || iz < 0)
        throw InvalidInput(path.string() + ": vertex element lacks x/y/z");
      have_normals = inx >= 0 && iny >= 0 && inz >= 0;
      xyz.reserve(static_cast<std::size_t>(el.count) * 3);
    }

    std::vector<double> values(el.props.size());
    for (long row = 0; row < el.count; ++row) {
      if (binary) {
        for (std::size_t p = 0; p < el.props.size(); ++p) {
          const auto& prop = el.props[p];
          if (prop.is_list) {
            const long n = static_cast<long>(read_binary_scalar(in, prop.count_type));
            for (long j = 0; j < n; ++j) read_binary_scalar(in, prop.type);
            values[p] = 0;
          } else {
            values[p] = read_binary_scalar(in, prop.type);
          }
        }
      } else {
        if (!std::getline(in, line)) throw InvalidInput(path.string() + ": truncated ply data");
        std::istringstream ls(line);
        for (std::size_t p = 0; p < el.props.size(); ++p) {
          const auto& prop = el.props[p];
          if (prop.is_list) {
            long n = 0;
            if (!(ls >> n)) throw InvalidInput(path.string() + ": bad list count");
            double tmp;
            for (long j = 0; j < n; ++j) ls >> tmp;
            values[p] = 0;
          } else if (!(ls >> values[p])) {
            throw InvalidInput(path.string() + ": bad ply row");
          }
        }
      }
      if (is_vertex) {
        xyz.push_back(values[static_cast<std::size_t>(ix)]);
        xyz.push_back(values[static_cast<std::size_t>(iy)]);
        xyz.push_back(values[static_cast<std::size_t>(iz)]);
        if (have_normals) {
          normals.push_back(values[static_cast<std::size_t>(inx)]);
          normals.push_back(values[static_cast<std::size_t>(iny)]);
          normals.push_back(values[static_cast<std::size_t>(inz)]);
        }
      }
    }
  }

  if (xyz.empty()) throw InvalidInput(path.string() + ": no vertices");
  PointCloud cloud;
  cloud.id = path.stem().string();
  finalize(cloud, xyz, normals);
  return cloud;
}

void write_ply_colored(const std::filesystem::path& path, const PointCloud& cloud,
                       const std::vector<std::array<std::uint8_t, 3>>& colors) {
  if (static_cast<Index>(colors.size()) != cloud.size())
    throw InvalidInput("write_ply_colored: one colour per point required");
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot open " + path.string() + " for writing");
  out << "ply\nformat ascii 1.0\nelement vertex " << cloud.size()
      << "\nproperty double x\nproperty double y\nproperty double z\n"
         "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";
  out.precision(17);
  for (Index i = 0; i < cloud.size(); ++i) {
    const auto& c = colors[static_cast<std::size_t>(i)];
    out << cloud.points(0, i) << ' ' << cloud.points(1, i) << ' ' << cloud.points(2, i) << ' '
        << static_cast<int>(c[0]) << ' ' << static_cast<int>(c[1]) << ' ' << static_cast<int>(c[2])
        << '\n';
  }
}

PointCloud read_cloud(const std::filesystem::path& path) {
  return path.extension() == ".ply" ? read_ply(path) : read_xyz(path);
}

std::array<std::uint8_t, 3> segment_color(long label) {
  if (label < 0) return {0, 0, 0};
  // Golden-ratio hue rotation keeps consecutive labels visually distinct.
  const double hue = std::fmod(0.61803398875 * static_cast<double>(label), 1.0) * 6.0;
  const int sector = static_cast<int>(hue);
  const double f = hue - sector;
  const double q = 1.0 - f;
  double r = 0, g = 0, b = 0;
  switch (sector % 6) {
    case 0: r = 1; g = f; break;
    case 1: r = q; g = 1; break;
    case 2: g = 1; b = f; break;
    case 3: g = q; b = 1; break;
    case 4: r = f; b = 1; break;
    default: r = 1; b = q; break;
  }
  auto u8 = [](double v) { return static_cast<std::uint8_t>(std::lround(40 + 215 * v)); };
  return {u8(r), u8(g), u8(b)};
}

}  // namespace primht
