#pragma once

#include <string>
#include <vector>

#include "losses.hpp"
#include "types.hpp"

namespace dpf {

// Correspondence files: header "cx,cy,cz,tx,ty,tz", one pair per row.
CorrespondenceSet read_correspondences(const std::string& path);
void write_correspondences(const CorrespondenceSet& pairs, const std::string& path);

// Ground-truth flow files: header "x,y,z,dx,dy,dz" with the base position and
// its displacement per row.
struct FlowFile {
  std::vector<Vec3> base;
  std::vector<Vec3> displacement;

  std::size_t size() const { return base.size(); }
};

FlowFile read_flow(const std::string& path);
void write_flow(const FlowFile& flow, const std::string& path);

std::string encode_correspondences(const CorrespondenceSet& pairs);
CorrespondenceSet decode_correspondences(const std::string& text);
std::string encode_flow(const FlowFile& flow);
FlowFile decode_flow(const std::string& text);

}  // namespace dpf
