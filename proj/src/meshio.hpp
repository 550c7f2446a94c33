#pragma once

#include <string>

#include "types.hpp"

namespace dpf {

enum class PlyEncoding { BinaryLittleEndian, Ascii };

// Format is chosen by extension: .ply or .obj. PLY writes are binary
// little-endian by default (bitwise round trips); OBJ and ascii PLY round-trip
// exactly as well because coordinates are printed with full precision.
TriMesh read_mesh(const std::string& path);
void write_mesh(const TriMesh& mesh, const std::string& path,
                PlyEncoding encoding = PlyEncoding::BinaryLittleEndian);

// Point sets read the vertex data of either format; faces are ignored. When a
// file carries no normals they are estimated from the positions (k = 16).
PointSet read_pointset(const std::string& path);
void write_pointset(const PointSet& points, const std::string& path,
                    PlyEncoding encoding = PlyEncoding::BinaryLittleEndian);

// In-memory codecs (used by the writers and directly by tests).
std::string encode_ply(const TriMesh& mesh, PlyEncoding encoding);
std::string encode_obj(const TriMesh& mesh);
TriMesh decode_mesh(const std::string& bytes, const std::string& format_hint);

}  // namespace dpf
