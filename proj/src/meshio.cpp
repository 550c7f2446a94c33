#include "meshio.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cstring>
#include <sstream>

#include "config.hpp"
#include "error.hpp"
#include "fsutil.hpp"
#include "normals.hpp"

namespace dpf {

namespace {

std::string lower_ext(const std::string& path) {
  const std::size_t dot = path.find_last_of('.');
  if (dot == std::string::npos) return "";
  std::string ext = path.substr(dot + 1);
  for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext;
}

// ---------------------------------------------------------------------------
// PLY

enum class PlyType { Char, UChar, Short, UShort, Int, UInt, Float, Double };

std::size_t ply_type_size(PlyType t) {
  switch (t) {
    case PlyType::Char:
    case PlyType::UChar: return 1;
    case PlyType::Short:
    case PlyType::UShort: return 2;
    case PlyType::Int:
    case PlyType::UInt:
    case PlyType::Float: return 4;
    case PlyType::Double: return 8;
  }
  return 0;
}

PlyType parse_ply_type(const std::string& token, std::size_t line_no) {
  if (token == "char" || token == "int8") return PlyType::Char;
  if (token == "uchar" || token == "uint8") return PlyType::UChar;
  if (token == "short" || token == "int16") return PlyType::Short;
  if (token == "ushort" || token == "uint16") return PlyType::UShort;
  if (token == "int" || token == "int32") return PlyType::Int;
  if (token == "uint" || token == "uint32") return PlyType::UInt;
  if (token == "float" || token == "float32") return PlyType::Float;
  if (token == "double" || token == "float64") return PlyType::Double;
  fail(ErrorCode::Parse, "line " + std::to_string(line_no) + ": unknown property type " + token);
}

struct PlyProperty {
  std::string name;
  bool is_list = false;
  PlyType count_type = PlyType::UChar;
  PlyType value_type = PlyType::Float;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> properties;
};

struct BinaryCursor {
  const std::string& bytes;
  std::size_t at;

  double read_scalar(PlyType t) {
    const std::size_t size = ply_type_size(t);
    require(at + size <= bytes.size(), ErrorCode::Parse,
            "unexpected end of binary data at byte offset " + std::to_string(at));
    std::uint64_t raw = 0;
    for (std::size_t i = 0; i < size; ++i) {
      raw |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[at + i])) << (8 * i);
    }
    at += size;
    switch (t) {
      case PlyType::Char: return static_cast<double>(static_cast<std::int8_t>(raw));
      case PlyType::UChar: return static_cast<double>(static_cast<std::uint8_t>(raw));
      case PlyType::Short: return static_cast<double>(static_cast<std::int16_t>(raw));
      case PlyType::UShort: return static_cast<double>(static_cast<std::uint16_t>(raw));
      case PlyType::Int: return static_cast<double>(static_cast<std::int32_t>(raw));
      case PlyType::UInt: return static_cast<double>(static_cast<std::uint32_t>(raw));
      case PlyType::Float: return static_cast<double>(std::bit_cast<float>(static_cast<std::uint32_t>(raw)));
      case PlyType::Double: return std::bit_cast<double>(raw);
    }
    return 0.0;
  }
};

struct AsciiCursor {
  std::istringstream in;
  std::size_t line_no;
  std::istringstream line;

  explicit AsciiCursor(const std::string& body, std::size_t start_line)
      : in(body), line_no(start_line) {}

  double next_scalar() {
    double v;
    while (!(line >> v)) {
      std::string next;
      require(static_cast<bool>(std::getline(in, next)), ErrorCode::Parse,
              "unexpected end of ascii data near line " + std::to_string(line_no));
      ++line_no;
      line.clear();
      line.str(next);
    }
    return v;
  }
};

struct ParsedMesh {
  std::vector<Vec3> vertices;
  std::vector<Vec3> normals;  // may be empty
  bool has_normals = false;
  std::vector<Face> faces;
};

ParsedMesh parse_ply(const std::string& bytes) {
  std::size_t line_no = 0;
  std::size_t at = 0;
  auto next_line = [&]() {
    require(at < bytes.size(), ErrorCode::Parse, "unexpected end of header at line " +
                                                     std::to_string(line_no));
    std::size_t end = bytes.find('\n', at);
    if (end == std::string::npos) end = bytes.size();
    std::string line = bytes.substr(at, end - at);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    at = end + 1;
    ++line_no;
    return line;
  };

  require(next_line() == "ply", ErrorCode::Parse, "missing ply magic on line 1");

  bool binary = false;
  bool have_format = false;
  std::vector<PlyElement> elements;
  while (true) {
    const std::string line = next_line();
    std::istringstream tokens(line);
    std::string word;
    tokens >> word;
    if (word.empty() || word == "comment" || word == "obj_info") continue;
    if (word == "format") {
      std::string fmt, version;
      tokens >> fmt >> version;
      if (fmt == "ascii") {
        binary = false;
      } else if (fmt == "binary_little_endian") {
        binary = true;
      } else if (fmt == "binary_big_endian") {
        fail(ErrorCode::UnsupportedFeature, "big-endian PLY is not supported");
      } else {
        fail(ErrorCode::Parse, "line " + std::to_string(line_no) + ": unknown format " + fmt);
      }
      have_format = true;
    } else if (word == "element") {
      PlyElement el;
      tokens >> el.name >> el.count;
      require(!tokens.fail(), ErrorCode::Parse,
              "line " + std::to_string(line_no) + ": malformed element declaration");
      elements.push_back(el);
    } else if (word == "property") {
      require(!elements.empty(), ErrorCode::Parse,
              "line " + std::to_string(line_no) + ": property before any element");
      PlyProperty prop;
      std::string type;
      tokens >> type;
      if (type == "list") {
        std::string count_type, value_type;
        tokens >> count_type >> value_type >> prop.name;
        prop.is_list = true;
        prop.count_type = parse_ply_type(count_type, line_no);
        prop.value_type = parse_ply_type(value_type, line_no);
      } else {
        prop.value_type = parse_ply_type(type, line_no);
        tokens >> prop.name;
      }
      require(!prop.name.empty(), ErrorCode::Parse,
              "line " + std::to_string(line_no) + ": property without a name");
      elements.back().properties.push_back(prop);
    } else if (word == "end_header") {
      break;
    } else {
      fail(ErrorCode::Parse, "line " + std::to_string(line_no) + ": unknown header token " + word);
    }
  }
  require(have_format, ErrorCode::Parse, "header has no format line");

  ParsedMesh mesh;
  BinaryCursor bin{bytes, at};
  AsciiCursor ascii(binary ? std::string() : bytes.substr(at), line_no);
  auto read_scalar = [&](PlyType t) { return binary ? bin.read_scalar(t) : ascii.next_scalar(); };

  for (const PlyElement& el : elements) {
    if (el.name == "vertex") {
      int ix = -1, iy = -1, iz = -1, inx = -1, iny = -1, inz = -1;
      for (std::size_t p = 0; p < el.properties.size(); ++p) {
        require(!el.properties[p].is_list, ErrorCode::UnsupportedFeature,
                "list property on vertex element is not supported");
        const std::string& name = el.properties[p].name;
        if (name == "x") ix = static_cast<int>(p);
        if (name == "y") iy = static_cast<int>(p);
        if (name == "z") iz = static_cast<int>(p);
        if (name == "nx") inx = static_cast<int>(p);
        if (name == "ny") iny = static_cast<int>(p);
        if (name == "nz") inz = static_cast<int>(p);
      }
      require(ix >= 0 && iy >= 0 && iz >= 0, ErrorCode::Parse,
              "vertex element lacks x/y/z properties");
      const bool normals = inx >= 0 && iny >= 0 && inz >= 0;
      mesh.has_normals = normals;
      mesh.vertices.reserve(el.count);
      std::vector<double> row(el.properties.size());
      for (std::size_t v = 0; v < el.count; ++v) {
        try {
          for (std::size_t p = 0; p < el.properties.size(); ++p) {
            row[p] = read_scalar(el.properties[p].value_type);
          }
        } catch (const Error& e) {
          fail(ErrorCode::Parse, "vertex " + std::to_string(v) + " of declared " +
                                     std::to_string(el.count) + ": " + e.what());
        }
        mesh.vertices.push_back(Vec3{row[ix], row[iy], row[iz]});
        if (normals) mesh.normals.push_back(Vec3{row[inx], row[iny], row[inz]});
      }
    } else if (el.name == "face") {
      int list_prop = -1;
      for (std::size_t p = 0; p < el.properties.size(); ++p) {
        if (el.properties[p].is_list &&
            (el.properties[p].name == "vertex_indices" || el.properties[p].name == "vertex_index")) {
          list_prop = static_cast<int>(p);
        }
      }
      require(list_prop >= 0, ErrorCode::Parse, "face element lacks a vertex index list");
      for (std::size_t f = 0; f < el.count; ++f) {
        for (std::size_t p = 0; p < el.properties.size(); ++p) {
          const PlyProperty& prop = el.properties[p];
          if (!prop.is_list) {
            read_scalar(prop.value_type);
            continue;
          }
          const std::size_t count = static_cast<std::size_t>(read_scalar(prop.count_type));
          std::vector<std::uint32_t> corners(count);
          for (std::size_t c = 0; c < count; ++c) {
            const double idx = read_scalar(prop.value_type);
            require(idx >= 0 && idx < static_cast<double>(mesh.vertices.size()),
                    ErrorCode::Parse, "face " + std::to_string(f) + " vertex index out of range");
            corners[c] = static_cast<std::uint32_t>(idx);
          }
          if (static_cast<int>(p) == list_prop) {
            require(count >= 3, ErrorCode::Parse,
                    "face " + std::to_string(f) + " has fewer than 3 vertices");
            for (std::size_t c = 1; c + 1 < count; ++c) {
              mesh.faces.push_back(Face{corners[0], corners[c], corners[c + 1]});
            }
          }
        }
      }
    } else {
      // Skip unknown elements item by item.
      for (std::size_t i = 0; i < el.count; ++i) {
        for (const PlyProperty& prop : el.properties) {
          if (prop.is_list) {
            const std::size_t count = static_cast<std::size_t>(read_scalar(prop.count_type));
            for (std::size_t c = 0; c < count; ++c) read_scalar(prop.value_type);
          } else {
            read_scalar(prop.value_type);
          }
        }
      }
    }
  }
  return mesh;
}

// ---------------------------------------------------------------------------
// OBJ

ParsedMesh parse_obj(const std::string& bytes) {
  ParsedMesh mesh;
  std::vector<Vec3> file_normals;
  std::vector<int> vertex_normal_index;  // per vertex, -1 if unassigned
  bool any_corner_normals = false;

  std::istringstream in(bytes);
  std::string line;
  std::size_t line_no = 0;

  auto resolve = [&](long idx, std::size_t count, const char* what) -> std::uint32_t {
    long resolved = idx;
    if (idx < 0) resolved = static_cast<long>(count) + idx + 1;
    require(resolved >= 1 && resolved <= static_cast<long>(count), ErrorCode::Parse,
            "line " + std::to_string(line_no) + ": " + what + " index " + std::to_string(idx) +
                " out of range");
    return static_cast<std::uint32_t>(resolved - 1);
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream tokens(line);
    std::string word;
    if (!(tokens >> word) || word.empty() || word[0] == '#') continue;
    if (word == "v") {
      Vec3 v;
      tokens >> v.x >> v.y >> v.z;
      require(!tokens.fail(), ErrorCode::Parse,
              "line " + std::to_string(line_no) + ": malformed vertex");
      mesh.vertices.push_back(v);
      vertex_normal_index.push_back(-1);
    } else if (word == "vn") {
      Vec3 n;
      tokens >> n.x >> n.y >> n.z;
      require(!tokens.fail(), ErrorCode::Parse,
              "line " + std::to_string(line_no) + ": malformed normal");
      file_normals.push_back(n);
    } else if (word == "f") {
      std::vector<std::uint32_t> corners;
      std::string corner;
      while (tokens >> corner) {
        // v, v/vt, v//vn or v/vt/vn
        const std::size_t s1 = corner.find('/');
        long vi = 0, ni = 0;
        bool has_normal = false;
        try {
          if (s1 == std::string::npos) {
            vi = std::stol(corner);
          } else {
            vi = std::stol(corner.substr(0, s1));
            const std::size_t s2 = corner.find('/', s1 + 1);
            if (s2 != std::string::npos && s2 + 1 < corner.size()) {
              ni = std::stol(corner.substr(s2 + 1));
              has_normal = true;
            }
          }
        } catch (const std::exception&) {
          fail(ErrorCode::Parse, "line " + std::to_string(line_no) + ": malformed face corner '" +
                                     corner + "'");
        }
        const std::uint32_t v = resolve(vi, mesh.vertices.size(), "vertex");
        corners.push_back(v);
        if (has_normal) {
          const std::uint32_t n = resolve(ni, file_normals.size(), "normal");
          vertex_normal_index[v] = static_cast<int>(n);
          any_corner_normals = true;
        }
      }
      require(corners.size() >= 3, ErrorCode::Parse,
              "line " + std::to_string(line_no) + ": face with fewer than 3 corners");
      // Fan triangulation of polygons.
      for (std::size_t c = 1; c + 1 < corners.size(); ++c) {
        mesh.faces.push_back(Face{corners[0], corners[c], corners[c + 1]});
      }
    }
    // Other directives (vt, usemtl, o, g, s, mtllib, ...) are ignored.
  }

  if (!file_normals.empty()) {
    if (any_corner_normals) {
      bool complete = true;
      for (const Face& f : mesh.faces) {
        for (int c = 0; c < 3; ++c) complete = complete && vertex_normal_index[f[c]] >= 0;
      }
      if (complete && !mesh.faces.empty()) {
        mesh.normals.resize(mesh.vertices.size(), Vec3{0, 0, 1});
        for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
          if (vertex_normal_index[v] >= 0) mesh.normals[v] = file_normals[vertex_normal_index[v]];
        }
        mesh.has_normals = true;
      }
    } else if (file_normals.size() == mesh.vertices.size()) {
      // Point-cloud style OBJ: vn lines pair with v lines by position.
      mesh.normals = file_normals;
      mesh.has_normals = true;
    }
  }
  return mesh;
}

ParsedMesh parse_any(const std::string& bytes, const std::string& format) {
  if (format == "ply") return parse_ply(bytes);
  if (format == "obj") return parse_obj(bytes);
  fail(ErrorCode::UnsupportedFeature, "unsupported mesh format '" + format + "' (use ply or obj)");
}

std::vector<Vec3> renormalized(const std::vector<Vec3>& normals) {
  std::vector<Vec3> out(normals.size());
  for (std::size_t i = 0; i < normals.size(); ++i) {
    const double len = norm(normals[i]);
    require(len > 1e-9, ErrorCode::Parse,
            "zero-length normal at index " + std::to_string(i));
    // Already-unit normals pass through untouched so round trips stay bitwise.
    out[i] = std::abs(len - 1.0) <= 1e-12 ? normals[i] : normals[i] / len;
  }
  return out;
}

void append_f64_le(std::string& out, double v) {
  const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

void append_u32_le(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

}  // namespace

std::string encode_ply(const TriMesh& mesh, PlyEncoding encoding) {
  const bool binary = encoding == PlyEncoding::BinaryLittleEndian;
  const bool normals = mesh.has_vertex_normals();
  std::ostringstream header;
  header << "ply\nformat " << (binary ? "binary_little_endian" : "ascii") << " 1.0\n";
  header << "element vertex " << mesh.vertices.size() << "\n";
  header << "property double x\nproperty double y\nproperty double z\n";
  if (normals) header << "property double nx\nproperty double ny\nproperty double nz\n";
  header << "element face " << mesh.faces.size() << "\n";
  header << "property list uchar uint vertex_indices\n";
  header << "end_header\n";

  std::string out = header.str();
  if (binary) {
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
      append_f64_le(out, mesh.vertices[i].x);
      append_f64_le(out, mesh.vertices[i].y);
      append_f64_le(out, mesh.vertices[i].z);
      if (normals) {
        append_f64_le(out, mesh.vertex_normals[i].x);
        append_f64_le(out, mesh.vertex_normals[i].y);
        append_f64_le(out, mesh.vertex_normals[i].z);
      }
    }
    for (const Face& f : mesh.faces) {
      out.push_back(static_cast<char>(3));
      for (int c = 0; c < 3; ++c) append_u32_le(out, f[c]);
    }
  } else {
    std::ostringstream body;
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
      body << format_double(mesh.vertices[i].x) << ' ' << format_double(mesh.vertices[i].y) << ' '
           << format_double(mesh.vertices[i].z);
      if (normals) {
        body << ' ' << format_double(mesh.vertex_normals[i].x) << ' '
             << format_double(mesh.vertex_normals[i].y) << ' '
             << format_double(mesh.vertex_normals[i].z);
      }
      body << '\n';
    }
    for (const Face& f : mesh.faces) {
      body << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
    }
    out += body.str();
  }
  return out;
}

std::string encode_obj(const TriMesh& mesh) {
  std::ostringstream out;
  for (const Vec3& v : mesh.vertices) {
    out << "v " << format_double(v.x) << ' ' << format_double(v.y) << ' ' << format_double(v.z)
        << '\n';
  }
  const bool normals = mesh.has_vertex_normals();
  if (normals) {
    for (const Vec3& n : mesh.vertex_normals) {
      out << "vn " << format_double(n.x) << ' ' << format_double(n.y) << ' ' << format_double(n.z)
          << '\n';
    }
  }
  for (const Face& f : mesh.faces) {
    if (normals) {
      out << "f " << f[0] + 1 << "//" << f[0] + 1 << ' ' << f[1] + 1 << "//" << f[1] + 1 << ' '
          << f[2] + 1 << "//" << f[2] + 1 << '\n';
    } else {
      out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
    }
  }
  return out.str();
}

TriMesh decode_mesh(const std::string& bytes, const std::string& format_hint) {
  const ParsedMesh parsed = parse_any(bytes, format_hint);
  TriMesh mesh;
  mesh.vertices = parsed.vertices;
  mesh.faces = parsed.faces;
  if (parsed.has_normals) mesh.vertex_normals = renormalized(parsed.normals);
  mesh.validate();
  return mesh;
}

TriMesh read_mesh(const std::string& path) {
  return decode_mesh(read_file(path), lower_ext(path));
}

void write_mesh(const TriMesh& mesh, const std::string& path, PlyEncoding encoding) {
  mesh.validate();
  const std::string ext = lower_ext(path);
  if (ext == "ply") {
    write_file_atomic(path, encode_ply(mesh, encoding));
  } else if (ext == "obj") {
    write_file_atomic(path, encode_obj(mesh));
  } else {
    fail(ErrorCode::UnsupportedFeature, "unsupported mesh format '" + ext + "' (use ply or obj)");
  }
}

PointSet read_pointset(const std::string& path) {
  const ParsedMesh parsed = parse_any(read_file(path), lower_ext(path));
  PointSet out;
  out.positions = parsed.vertices;
  require(!out.positions.empty(), ErrorCode::EmptySet, path + " contains no points");
  if (parsed.has_normals) {
    require(parsed.normals.size() == out.positions.size(), ErrorCode::LengthMismatch,
            "normal count does not match point count");
    out.normals = renormalized(parsed.normals);
  } else {
    require(out.positions.size() >= 4, ErrorCode::InvalidArgument,
            path + " has no normals and too few points to estimate them");
    const std::size_t k = std::min<std::size_t>(16, out.positions.size() - 1);
    out.normals = estimate_normals(out.positions, std::max<std::size_t>(k, 3));
  }
  out.validate();
  return out;
}

void write_pointset(const PointSet& points, const std::string& path, PlyEncoding encoding) {
  points.validate();
  TriMesh as_mesh;
  as_mesh.vertices = points.positions;
  as_mesh.vertex_normals = points.normals;
  const std::string ext = lower_ext(path);
  if (ext == "ply") {
    write_file_atomic(path, encode_ply(as_mesh, encoding));
  } else if (ext == "obj") {
    write_file_atomic(path, encode_obj(as_mesh));
  } else {
    fail(ErrorCode::UnsupportedFeature, "unsupported point set format '" + ext + "'");
  }
}

}  // namespace dpf
