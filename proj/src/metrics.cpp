#include "metrics.hpp"

#include <cmath>

#include "error.hpp"
#include "losses.hpp"

namespace dpf {

void FlowField::validate() const {
  require(predicted.size() == ground_truth.size(), ErrorCode::LengthMismatch,
          "predicted and ground-truth flow lengths differ");
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    require(is_finite(predicted[i]) && is_finite(ground_truth[i]), ErrorCode::NonFiniteValue,
            "non-finite flow at index " + std::to_string(i));
  }
}

double chamfer_metric(const PointSet& x, const PointSet& y) {
  return chamfer_loss(x, y).cd * 1e4;
}

double normal_consistency_metric(const PointSet& x, const PointSet& y) {
  return chamfer_loss(x, y).n;
}

double epe(const FlowField& flow) {
  flow.validate();
  require(flow.size() > 0, ErrorCode::EmptyFlow, "flow is empty");
  double acc = 0.0;
  for (std::size_t i = 0; i < flow.size(); ++i) {
    acc += norm(flow.predicted[i] - flow.ground_truth[i]);
  }
  return acc / static_cast<double>(flow.size());
}

double accuracy(const FlowField& flow, const AccuracyThresholds& thresholds) {
  flow.validate();
  require(flow.size() > 0, ErrorCode::EmptyFlow, "flow is empty");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < flow.size(); ++i) {
    const double err = norm(flow.predicted[i] - flow.ground_truth[i]);
    const double rel = err / std::max(norm(flow.ground_truth[i]), 1e-12);
    if (err < thresholds.absolute || rel < thresholds.relative) ++hits;
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(flow.size());
}

double acc_strict(const FlowField& flow) { return accuracy(flow, {0.025, 0.025}); }

double acc_relaxed(const FlowField& flow) { return accuracy(flow, {0.05, 0.05}); }

}  // namespace dpf
