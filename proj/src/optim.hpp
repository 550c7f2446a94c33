#pragma once

#include <span>
#include <string>
#include <vector>

#include "error.hpp"

namespace dpf {

// Bias-corrected Adam over a fixed set of named parameter arrays.
class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {
    require(lr > 0.0, ErrorCode::InvalidArgument, "learning rate must be positive");
  }

  // Registers a parameter array; the pointer must stay valid for the
  // optimizer's lifetime. Returns the slot index.
  std::size_t add_parameters(const std::string& name, std::vector<double>* values);

  // One update step; grads are ordered like the registered slots.
  void step(const std::vector<std::vector<double>>& grads);

  void set_learning_rate(double lr) { lr_ = lr; }
  double learning_rate() const { return lr_; }
  std::uint64_t step_count() const { return step_count_; }

 private:
  struct Slot {
    std::string name;
    std::vector<double>* values = nullptr;
    std::vector<double> m, v;
  };

  double lr_, beta1_, beta2_, epsilon_;
  std::uint64_t step_count_ = 0;
  std::vector<Slot> slots_;
};

// Reduce-on-plateau learning-rate policy: after `patience` consecutive updates
// with no relative improvement over the best loss seen, the rate is multiplied
// by `factor` (never below `min_lr`).
class PlateauSchedule {
 public:
  PlateauSchedule(double initial_lr, std::size_t patience = 200, double factor = 0.1,
                  double min_lr = 1e-8)
      : lr_(initial_lr), patience_(patience), factor_(factor), min_lr_(min_lr) {}

  // Feeds the current loss; returns the (possibly reduced) learning rate.
  double update(double loss);

  double learning_rate() const { return lr_; }
  double best_loss() const { return best_; }

 private:
  static constexpr double kRelativeImprovement = 1e-12;

  double lr_;
  std::size_t patience_;
  double factor_;
  double min_lr_;
  double best_ = 0.0;
  bool has_best_ = false;
  std::size_t stale_ = 0;
};

}  // namespace dpf
