#pragma once

#include <vector>

#include "types.hpp"

namespace dpf {

// Predicted and ground-truth per-point displacements of matching points.
struct FlowField {
  std::vector<Vec3> predicted;
  std::vector<Vec3> ground_truth;

  std::size_t size() const { return predicted.size(); }
  void validate() const;
};

// Chamfer distance between two oriented point sets, reported scaled by 1e4.
double chamfer_metric(const PointSet& x, const PointSet& y);

// Pooled mean of 1 - |cos| between nearest-neighbor normals, both directions.
double normal_consistency_metric(const PointSet& x, const PointSet& y);

// Mean endpoint error of the predicted flow.
double epe(const FlowField& flow);

struct AccuracyThresholds {
  double absolute = 0.025;  // meters
  double relative = 0.025;
};

// Percentage of points whose flow error beats the absolute OR relative bound.
double accuracy(const FlowField& flow, const AccuracyThresholds& thresholds);
double acc_strict(const FlowField& flow);
double acc_relaxed(const FlowField& flow);

}  // namespace dpf
