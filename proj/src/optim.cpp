#include "optim.hpp"

#include <cmath>

namespace dpf {

std::size_t Adam::add_parameters(const std::string& name, std::vector<double>* values) {
  require(values != nullptr, ErrorCode::InvalidArgument, "null parameter array");
  Slot slot;
  slot.name = name;
  slot.values = values;
  slot.m.assign(values->size(), 0.0);
  slot.v.assign(values->size(), 0.0);
  slots_.push_back(std::move(slot));
  return slots_.size() - 1;
}

void Adam::step(const std::vector<std::vector<double>>& grads) {
  require(grads.size() == slots_.size(), ErrorCode::LengthMismatch,
          "gradient list does not match registered parameters");
  for (std::size_t s = 0; s < slots_.size(); ++s) {
    require(grads[s].size() == slots_[s].values->size(), ErrorCode::LengthMismatch,
            "gradient size mismatch for " + slots_[s].name);
    for (std::size_t i = 0; i < grads[s].size(); ++i) {
      require(std::isfinite(grads[s][i]), ErrorCode::NonFiniteGradient,
              "non-finite gradient in " + slots_[s].name + " at index " + std::to_string(i));
    }
  }

  ++step_count_;
  const double t = static_cast<double>(step_count_);
  const double bias1 = 1.0 - std::pow(beta1_, t);
  const double bias2 = 1.0 - std::pow(beta2_, t);

  for (std::size_t s = 0; s < slots_.size(); ++s) {
    Slot& slot = slots_[s];
    const std::vector<double>& g = grads[s];
    std::vector<double>& x = *slot.values;
    for (std::size_t i = 0; i < g.size(); ++i) {
      slot.m[i] = beta1_ * slot.m[i] + (1.0 - beta1_) * g[i];
      slot.v[i] = beta2_ * slot.v[i] + (1.0 - beta2_) * g[i] * g[i];
      const double m_hat = slot.m[i] / bias1;
      const double v_hat = slot.v[i] / bias2;
      x[i] -= lr_ * m_hat / (std::sqrt(v_hat) + epsilon_);
    }
  }
}

double PlateauSchedule::update(double loss) {
  require(std::isfinite(loss), ErrorCode::NonFiniteLoss, "loss is not finite");
  const double scale = std::max(std::abs(best_), 1e-300);
  const bool improved = has_best_ && (best_ - loss) / scale > kRelativeImprovement;
  if (!has_best_ || loss < best_) {
    best_ = loss;
    has_best_ = true;
  }
  if (improved) {
    stale_ = 0;
    return lr_;
  }
  // The first observation establishes the baseline but is not an improvement
  // over anything, so a flat loss stream reduces exactly at call `patience`.
  ++stale_;
  if (stale_ >= patience_) {
    lr_ = std::max(min_lr_, lr_ * factor_);
    stale_ = 0;
  }
  return lr_;
}

}  // namespace dpf
