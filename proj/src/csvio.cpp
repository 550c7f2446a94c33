#include "csvio.hpp"

#include <array>
#include <sstream>

#include "config.hpp"
#include "error.hpp"
#include "fsutil.hpp"

namespace dpf {

namespace {

// Parses rows of exactly six comma-separated finite doubles.
std::vector<std::array<double, 6>> parse_six_columns(const std::string& text,
                                                     const std::string& expected_header) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;

  require(static_cast<bool>(std::getline(in, line)), ErrorCode::Parse, "empty file");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  require(line == expected_header, ErrorCode::Parse,
          "line 1: expected header '" + expected_header + "', got '" + line + "'");

  std::vector<std::array<double, 6>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::array<double, 6> row{};
    std::size_t begin = 0;
    for (int c = 0; c < 6; ++c) {
      std::size_t end = line.find(',', begin);
      const bool last = c == 5;
      require(last == (end == std::string::npos), ErrorCode::Parse,
              "line " + std::to_string(line_no) + ": expected 6 comma-separated values");
      const std::string cell = line.substr(begin, last ? std::string::npos : end - begin);
      try {
        std::size_t used = 0;
        row[c] = std::stod(cell, &used);
        require(used == cell.size(), ErrorCode::Parse,
                "line " + std::to_string(line_no) + ": trailing characters in '" + cell + "'");
      } catch (const Error&) {
        throw;
      } catch (const std::exception&) {
        fail(ErrorCode::Parse, "line " + std::to_string(line_no) + ": cannot parse '" + cell + "'");
      }
      require(std::isfinite(row[c]), ErrorCode::Parse,
              "line " + std::to_string(line_no) + ": non-finite value");
      begin = end + 1;
    }
    rows.push_back(row);
  }
  return rows;
}

std::string encode_six_columns(const std::string& header,
                               const std::vector<std::array<double, 6>>& rows) {
  std::ostringstream out;
  out << header << '\n';
  for (const auto& row : rows) {
    for (int c = 0; c < 6; ++c) {
      if (c) out << ',';
      out << format_double(row[c]);
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace

CorrespondenceSet decode_correspondences(const std::string& text) {
  CorrespondenceSet set;
  for (const auto& row : parse_six_columns(text, "cx,cy,cz,tx,ty,tz")) {
    set.pairs.push_back(
        Correspondence{Vec3{row[0], row[1], row[2]}, Vec3{row[3], row[4], row[5]}});
  }
  return set;
}

std::string encode_correspondences(const CorrespondenceSet& pairs) {
  std::vector<std::array<double, 6>> rows;
  rows.reserve(pairs.size());
  for (const Correspondence& c : pairs.pairs) {
    rows.push_back({c.source.x, c.source.y, c.source.z, c.target.x, c.target.y, c.target.z});
  }
  return encode_six_columns("cx,cy,cz,tx,ty,tz", rows);
}

CorrespondenceSet read_correspondences(const std::string& path) {
  return decode_correspondences(read_file(path));
}

void write_correspondences(const CorrespondenceSet& pairs, const std::string& path) {
  pairs.validate();
  write_file_atomic(path, encode_correspondences(pairs));
}

FlowFile decode_flow(const std::string& text) {
  FlowFile flow;
  for (const auto& row : parse_six_columns(text, "x,y,z,dx,dy,dz")) {
    flow.base.push_back(Vec3{row[0], row[1], row[2]});
    flow.displacement.push_back(Vec3{row[3], row[4], row[5]});
  }
  return flow;
}

std::string encode_flow(const FlowFile& flow) {
  require(flow.base.size() == flow.displacement.size(), ErrorCode::LengthMismatch,
          "flow base and displacement counts differ");
  std::vector<std::array<double, 6>> rows;
  rows.reserve(flow.size());
  for (std::size_t i = 0; i < flow.size(); ++i) {
    rows.push_back({flow.base[i].x, flow.base[i].y, flow.base[i].z, flow.displacement[i].x,
                    flow.displacement[i].y, flow.displacement[i].z});
  }
  return encode_six_columns("x,y,z,dx,dy,dz", rows);
}

FlowFile read_flow(const std::string& path) { return decode_flow(read_file(path)); }

void write_flow(const FlowFile& flow, const std::string& path) {
  write_file_atomic(path, encode_flow(flow));
}

}  // namespace dpf
