#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "config.hpp"
#include "csvio.hpp"
#include "error.hpp"
#include "fsutil.hpp"
#include "meshio.hpp"
#include "rng.hpp"

using namespace dpf;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

PointSet cube_cloud() {
  PointSet out;
  Rng rng(1);
  for (int x = 0; x <= 1; ++x)
    for (int y = 0; y <= 1; ++y)
      for (int z = 0; z <= 1; ++z) {
        out.positions.push_back(Vec3{x + rng.uniform(0, 1e-3), y + rng.uniform(0, 1e-3),
                                     z + rng.uniform(0, 1e-3)});
        out.normals.push_back(rng.unit_vector());
      }
  return out;
}

TriMesh small_mesh() {
  TriMesh mesh;
  Rng rng(2);
  mesh.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0.3, 0.3, 1.7}};
  mesh.faces = {{0, 1, 2}, {0, 1, 3}, {1, 2, 3}, {0, 3, 2}};
  for (int i = 0; i < 4; ++i) mesh.vertex_normals.push_back(rng.unit_vector());
  return mesh;
}

}  // namespace

TEST_CASE("binary PLY point cloud round-trips bitwise") {
  const PointSet cloud = cube_cloud();
  const std::string path = temp_path("dpf_cube.ply");
  write_pointset(cloud, path);
  const PointSet back = read_pointset(path);
  REQUIRE(back.size() == cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    CHECK(back.positions[i] == cloud.positions[i]);
    CHECK(back.normals[i] == cloud.normals[i]);
  }
  std::remove(path.c_str());
}

TEST_CASE("binary PLY mesh round-trips bitwise, ascii within 1e-9") {
  const TriMesh mesh = small_mesh();
  const std::string bin_path = temp_path("dpf_mesh_bin.ply");
  const std::string asc_path = temp_path("dpf_mesh_asc.ply");
  write_mesh(mesh, bin_path, PlyEncoding::BinaryLittleEndian);
  write_mesh(mesh, asc_path, PlyEncoding::Ascii);

  const TriMesh bin = read_mesh(bin_path);
  REQUIRE(bin.vertices.size() == mesh.vertices.size());
  REQUIRE(bin.faces.size() == mesh.faces.size());
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    CHECK(bin.vertices[i] == mesh.vertices[i]);
    CHECK(bin.vertex_normals[i] == mesh.vertex_normals[i]);
  }
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) CHECK(bin.faces[f] == mesh.faces[f]);

  const TriMesh asc = read_mesh(asc_path);
  REQUIRE(asc.vertices.size() == mesh.vertices.size());
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    CHECK(std::abs(asc.vertices[i].x - mesh.vertices[i].x) <= 1e-9);
    CHECK(std::abs(asc.vertices[i].y - mesh.vertices[i].y) <= 1e-9);
    CHECK(std::abs(asc.vertices[i].z - mesh.vertices[i].z) <= 1e-9);
  }
  std::remove(bin_path.c_str());
  std::remove(asc_path.c_str());
}

TEST_CASE("OBJ quad faces fan-triangulate") {
  const std::string obj =
      "v 0 0 0\n"
      "v 1 0 0\n"
      "v 1 1 0\n"
      "v 0 1 0\n"
      "f 1 2 3 4\n";
  const TriMesh mesh = decode_mesh(obj, "obj");
  REQUIRE(mesh.faces.size() == 2);
  CHECK(mesh.faces[0] == Face{0, 1, 2});
  CHECK(mesh.faces[1] == Face{0, 2, 3});
}

TEST_CASE("OBJ with normals round-trips through our writer") {
  const TriMesh mesh = small_mesh();
  const std::string path = temp_path("dpf_mesh.obj");
  write_mesh(mesh, path);
  const TriMesh back = read_mesh(path);
  REQUIRE(back.vertices.size() == mesh.vertices.size());
  REQUIRE(back.has_vertex_normals());
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    CHECK(back.vertices[i] == mesh.vertices[i]);
    CHECK(std::abs(back.vertex_normals[i].x - mesh.vertex_normals[i].x) < 1e-12);
  }
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) CHECK(back.faces[f] == mesh.faces[f]);
  std::remove(path.c_str());
}

TEST_CASE("OBJ negative indices resolve relative to the current count") {
  const std::string obj =
      "v 0 0 0\n"
      "v 1 0 0\n"
      "v 0 1 0\n"
      "f -3 -2 -1\n";
  const TriMesh mesh = decode_mesh(obj, "obj");
  REQUIRE(mesh.faces.size() == 1);
  CHECK(mesh.faces[0] == Face{0, 1, 2});
}

TEST_CASE("PLY declaring more vertices than present reports counts") {
  const std::string ply =
      "ply\n"
      "format ascii 1.0\n"
      "element vertex 10\n"
      "property double x\n"
      "property double y\n"
      "property double z\n"
      "element face 0\n"
      "property list uchar uint vertex_indices\n"
      "end_header\n"
      "0 0 0\n"
      "1 0 0\n"
      "2 0 0\n"
      "3 0 0\n"
      "4 0 0\n"
      "5 0 0\n"
      "6 0 0\n"
      "7 0 0\n";
  try {
    decode_mesh(ply, "ply");
    FAIL("expected Parse error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Parse);
    const std::string msg = e.what();
    CHECK(msg.find("10") != std::string::npos);  // declared count named
  }
}

TEST_CASE("big-endian PLY is an explicit unsupported feature") {
  const std::string ply =
      "ply\n"
      "format binary_big_endian 1.0\n"
      "element vertex 0\n"
      "property float x\n"
      "property float y\n"
      "property float z\n"
      "end_header\n";
  try {
    decode_mesh(ply, "ply");
    FAIL("expected UnsupportedFeature");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnsupportedFeature);
    CHECK(std::string(e.what()).find("big-endian") != std::string::npos);
  }
}

TEST_CASE("float32 PLY vertices parse") {
  std::string ply =
      "ply\n"
      "format binary_little_endian 1.0\n"
      "element vertex 1\n"
      "property float x\n"
      "property float y\n"
      "property float z\n"
      "element face 0\n"
      "property list uchar int vertex_indices\n"
      "end_header\n";
  const float coords[3] = {1.5f, -2.25f, 0.125f};
  ply.append(reinterpret_cast<const char*>(coords), sizeof(coords));
  const TriMesh mesh = decode_mesh(ply, "ply");
  REQUIRE(mesh.vertices.size() == 1);
  CHECK(mesh.vertices[0].x == 1.5);
  CHECK(mesh.vertices[0].y == -2.25);
  CHECK(mesh.vertices[0].z == 0.125);
}

TEST_CASE("pointset read estimates normals when the file has none") {
  TriMesh flat;
  Rng rng(3);
  for (int i = 0; i < 64; ++i) {
    flat.vertices.push_back(Vec3{rng.uniform(-1, 1), rng.uniform(-1, 1), 0.0});
  }
  const std::string path = temp_path("dpf_no_normals.ply");
  write_mesh(flat, path);
  const PointSet cloud = read_pointset(path);
  REQUIRE(cloud.size() == 64);
  for (const Vec3& n : cloud.normals) {
    CHECK(std::abs(std::abs(n.z) - 1.0) < 1e-9);  // flat patch: +-z
  }
  std::remove(path.c_str());
}

TEST_CASE("correspondence CSV round trip and header check") {
  CorrespondenceSet pairs;
  Rng rng(4);
  for (int i = 0; i < 9; ++i) {
    pairs.pairs.push_back(Correspondence{rng.unit_vector(), rng.unit_vector()});
  }
  const std::string path = temp_path("dpf_pairs.csv");
  write_correspondences(pairs, path);
  const CorrespondenceSet back = read_correspondences(path);
  REQUIRE(back.size() == pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    CHECK(back.pairs[i].source == pairs.pairs[i].source);
    CHECK(back.pairs[i].target == pairs.pairs[i].target);
  }
  std::remove(path.c_str());

  CHECK_THROWS_AS(decode_correspondences("bad,header\n"), Error);
  CHECK_THROWS_AS(decode_correspondences("cx,cy,cz,tx,ty,tz\n1,2,3\n"), Error);
  CHECK_THROWS_AS(decode_correspondences("cx,cy,cz,tx,ty,tz\n1,2,3,4,5,banana\n"), Error);
}

TEST_CASE("flow CSV round trip preserves values exactly") {
  FlowFile flow;
  Rng rng(5);
  for (int i = 0; i < 12; ++i) {
    flow.base.push_back(rng.unit_vector() * 2.0);
    flow.displacement.push_back(rng.unit_vector() * 0.1);
  }
  const std::string path = temp_path("dpf_flow.csv");
  write_flow(flow, path);
  const FlowFile back = read_flow(path);
  REQUIRE(back.size() == flow.size());
  for (std::size_t i = 0; i < flow.size(); ++i) {
    CHECK(back.base[i] == flow.base[i]);
    CHECK(back.displacement[i] == flow.displacement[i]);
  }
  std::remove(path.c_str());
}

TEST_CASE("config: empty text keeps every default") {
  const FitConfig config = parse_config("");
  CHECK(config.steps == 2000);
  CHECK(config.sample_count == 10000);
  CHECK(config.lr == 1e-4);
  CHECK(config.k == 5);
  CHECK(config.normalize);
  CHECK(config.weights.lambda_cd == 1e4);
  CHECK(config.weights.lambda_n == 1.0);
  CHECK(config.weights.lambda_ni == 10.0);
  CHECK(config.weights.lambda_iso == 0.1);
  CHECK(config.weights.lambda_v == 1e3);
  CHECK(config.patience == 200);
  CHECK(config.lr_factor == 0.1);
  CHECK(config.omega0 == 30.0);
}

TEST_CASE("config: values parse and are tracked as explicit") {
  const FitConfig config = parse_config("lambda_iso=0.1\nsteps=500\n# a comment\nlr = 2e-4\n");
  CHECK(config.weights.lambda_iso == 0.1);
  CHECK(config.steps == 500);
  CHECK(config.lr == 2e-4);
  CHECK(config.is_set("lambda_iso"));
  CHECK(config.is_set("steps"));
  CHECK_FALSE(config.is_set("lambda_v"));
}

TEST_CASE("config: unknown keys are rejected by name") {
  try {
    parse_config("foo=1\n");
    FAIL("expected UnknownKey");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownKey);
    CHECK(std::string(e.what()).find("foo") != std::string::npos);
  }
}

TEST_CASE("config: malformed values and lines") {
  CHECK_THROWS_AS(parse_config("steps\n"), Error);
  CHECK_THROWS_AS(parse_config("steps=abc\n"), Error);
  CHECK_THROWS_AS(parse_config("lr=-1\n"), Error);
  CHECK_THROWS_AS(parse_config("normalize=2\n"), Error);
}

TEST_CASE("config: animation defaults apply only to unset keys") {
  const FitConfig base = parse_config("");
  const FitConfig anim = animation_defaults(base);
  CHECK(anim.weights.lambda_iso == 1e3);
  CHECK(anim.weights.lambda_v == 1e4);
  CHECK(anim.weights.lambda_s == 0.0);

  const FitConfig custom = animation_defaults(parse_config("lambda_iso=7\n"));
  CHECK(custom.weights.lambda_iso == 7.0);
  CHECK(custom.weights.lambda_v == 1e4);
}

TEST_CASE("config: to_string lists the resolved settings") {
  const FitConfig config = parse_config("steps=123\n");
  const std::string text = config.to_string();
  CHECK(text.find("steps=123") != std::string::npos);
  CHECK(text.find("lr=0.0001") != std::string::npos);
  CHECK(text.find("seed=0") != std::string::npos);
}

TEST_CASE("atomic writes do not leave temp files or partial output") {
  const std::string path = temp_path("dpf_atomic.txt");
  write_file_atomic(path, "hello");
  CHECK(read_file(path) == "hello");
  CHECK_FALSE(std::filesystem::exists(path + ".tmp"));
  write_file_atomic(path, "replaced");
  CHECK(read_file(path) == "replaced");
  std::remove(path.c_str());

  // A write into a missing directory fails without creating the target.
  const std::string bad = temp_path("no_such_dir/impossible.txt");
  CHECK_THROWS_AS(write_file_atomic(bad, "x"), Error);
  CHECK_FALSE(std::filesystem::exists(bad));
}

TEST_CASE("unsupported extensions are rejected") {
  const TriMesh mesh = small_mesh();
  CHECK_THROWS_AS(write_mesh(mesh, temp_path("mesh.stl")), Error);
  CHECK_THROWS_AS(read_mesh(temp_path("mesh.gltf")), Error);
}
