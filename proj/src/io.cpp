#include "scenerecon/io.hpp"

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace scenerecon {
namespace {

std::ifstream open_input(const std::filesystem::path& path, bool binary = false) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw Error("cannot open " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

Error parse_error(const std::filesystem::path& path, int line, const std::string& what) {
  return Error(path.string() + ":" + std::to_string(line) + ": " + what);
}

Points to_points(const std::vector<double>& flat) {
  Points out(3, static_cast<Eigen::Index>(flat.size() / 3));
  std::copy(flat.begin(), flat.end(), out.data());
  return out;
}

std::string format_coord(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

}  // namespace

Mesh read_obj(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  std::vector<double> verts;
  std::vector<int> faces;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      double x, y, z;
      if (!(ls >> x >> y >> z)) throw parse_error(path, line_no, "malformed vertex");
      verts.insert(verts.end(), {x, y, z});
    } else if (tag == "f") {
      std::vector<int> idx;
      std::string tok;
      while (ls >> tok) {
        int v = 0;
        try {
          v = std::stoi(tok.substr(0, tok.find('/')));
        } catch (const std::exception&) {
          throw parse_error(path, line_no, "malformed face index '" + tok + "'");
        }
        const int count = static_cast<int>(verts.size() / 3);
        const int resolved = v < 0 ? count + v : v - 1;
        if (v == 0 || resolved < 0) throw parse_error(path, line_no, "invalid face index");
        idx.push_back(resolved);
      }
      if (idx.size() < 3) throw parse_error(path, line_no, "face with fewer than 3 vertices");
      // Fan-triangulate polygons.
      for (std::size_t k = 1; k + 1 < idx.size(); ++k) {
        faces.insert(faces.end(), {idx[0], idx[k], idx[k + 1]});
      }
    }
  }
  Mesh mesh;
  mesh.vertices = to_points(verts);
  mesh.faces.resize(3, static_cast<Eigen::Index>(faces.size() / 3));
  std::copy(faces.begin(), faces.end(), mesh.faces.data());
  try {
    validate(mesh);
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
  return mesh;
}

void write_obj(const Mesh& mesh, const std::filesystem::path& path) {
  std::ofstream out = open_output(path);
  for (Eigen::Index i = 0; i < mesh.vertices.cols(); ++i) {
    out << "v " << format_coord(mesh.vertices(0, i)) << ' ' << format_coord(mesh.vertices(1, i))
        << ' ' << format_coord(mesh.vertices(2, i)) << '\n';
  }
  for (Eigen::Index f = 0; f < mesh.faces.cols(); ++f) {
    out << "f " << mesh.faces(0, f) + 1 << ' ' << mesh.faces(1, f) + 1 << ' '
        << mesh.faces(2, f) + 1 << '\n';
  }
  if (!out) throw Error("failed writing " + path.string());
}

Points read_xyz(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  std::vector<double> flat;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    double x, y, z;
    if (!(ls >> x)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
      throw parse_error(path, line_no, "malformed point");
    }
    if (!(ls >> y >> z)) throw parse_error(path, line_no, "malformed point");
    flat.insert(flat.end(), {x, y, z});
  }
  return to_points(flat);
}

void write_xyz(const Points& points, const std::filesystem::path& path) {
  std::ofstream out = open_output(path);
  for (Eigen::Index i = 0; i < points.cols(); ++i) {
    out << format_coord(points(0, i)) << ' ' << format_coord(points(1, i)) << ' '
        << format_coord(points(2, i)) << '\n';
  }
  if (!out) throw Error("failed writing " + path.string());
}

Points read_ply(const std::filesystem::path& path) {
  std::ifstream in = open_input(path, true);
  std::string line;
  if (!std::getline(in, line) || line.rfind("ply", 0) != 0) {
    throw Error(path.string() + ": not a PLY file");
  }
  struct Property {
    std::string name;
    std::string type;
  };
  std::string format;
  long long vertex_count = -1;
  std::vector<Property> props;
  bool in_vertex = false;
  bool vertex_first = true;
  bool seen_element = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "format") {
      ls >> format;
    } else if (tag == "element") {
      std::string name;
      long long count = 0;
      ls >> name >> count;
      in_vertex = name == "vertex";
      if (in_vertex) {
        vertex_count = count;
        vertex_first = !seen_element;
      }
      seen_element = true;
    } else if (tag == "property" && in_vertex) {
      std::string type, name;
      ls >> type;
      if (type == "list") throw Error(path.string() + ": list properties on vertices unsupported");
      ls >> name;
      props.push_back({name, type});
    } else if (tag == "end_header") {
      break;
    }
  }
  if (vertex_count < 0) throw Error(path.string() + ": no vertex element");
  if (!vertex_first) throw Error(path.string() + ": vertex element must come first");
  int ix = -1, iy = -1, iz = -1;
  for (int p = 0; p < static_cast<int>(props.size()); ++p) {
    if (props[p].name == "x") ix = p;
    if (props[p].name == "y") iy = p;
    if (props[p].name == "z") iz = p;
  }
  if (ix < 0 || iy < 0 || iz < 0) throw Error(path.string() + ": missing x/y/z properties");

  Points out(3, vertex_count);
  if (format == "ascii") {
    for (long long i = 0; i < vertex_count; ++i) {
      if (!std::getline(in, line)) throw Error(path.string() + ": truncated vertex data");
      std::istringstream ls(line);
      std::vector<double> row(props.size());
      for (auto& v : row) {
        if (!(ls >> v)) throw Error(path.string() + ": malformed vertex row");
      }
      out.col(i) << row[ix], row[iy], row[iz];
    }
  } else if (format == "binary_little_endian") {
    auto read_value = [&](const std::string& type) -> double {
      const std::string t = lower(type);
      auto get = [&](auto v) {
        if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) {
          throw Error(path.string() + ": truncated vertex data");
        }
        return static_cast<double>(v);
      };
      if (t == "float" || t == "float32") return get(float{});
      if (t == "double" || t == "float64") return get(double{});
      if (t == "uchar" || t == "uint8") return get(std::uint8_t{});
      if (t == "char" || t == "int8") return get(std::int8_t{});
      if (t == "ushort" || t == "uint16") return get(std::uint16_t{});
      if (t == "short" || t == "int16") return get(std::int16_t{});
      if (t == "uint" || t == "uint32") return get(std::uint32_t{});
      if (t == "int" || t == "int32") return get(std::int32_t{});
      throw Error(path.string() + ": unsupported property type '" + type + "'");
    };
    std::vector<double> row(props.size());
    for (long long i = 0; i < vertex_count; ++i) {
      for (std::size_t p = 0; p < props.size(); ++p) row[p] = read_value(props[p].type);
      out.col(i) << row[ix], row[iy], row[iz];
    }
  } else {
    throw Error(path.string() + ": unsupported PLY format '" + format + "'");
  }
  return out;
}

Points read_point_cloud(const std::filesystem::path& path) {
  const std::string ext = lower(path.extension().string());
  if (ext == ".xyz" || ext == ".txt") return read_xyz(path);
  if (ext == ".ply") return read_ply(path);
  if (ext == ".obj") return read_obj(path).vertices;
  throw Error(path.string() + ": unknown point cloud format '" + ext + "'");
}

}  // namespace scenerecon
