#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "motionmidi/tensor.hpp"

namespace motionmidi {

/// Warmup-then-inverse-sqrt learning-rate schedule: linear ramp to peak_lr
/// over warmup_steps, then peak_lr * sqrt(warmup_steps / step). Continuous at
/// the warmup boundary.
struct LrSchedule {
  double peak_lr = 7e-4;
  std::size_t warmup_steps = 4000;
};

/// Learning rate at 1-based step. step == 0 raises LengthError.
double lr_at(std::size_t step, const LrSchedule& sched);

/// A parameter tensor with the stable name used in checkpoints and RNG
/// stream derivation.
struct NamedParam {
  std::string name;
  Tensor tensor;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-9;
};

/// Bias-corrected Adam. Moment buffers are indexed parallel to the parameter
/// list the state was created from; the step counter increases by exactly
/// one per step().
class AdamState {
 public:
  AdamState() = default;
  AdamState(const std::vector<NamedParam>& params, AdamConfig cfg = {});

  /// Applies one update from the gradients currently stored on the
  /// parameters. Raises DivergenceError if any gradient is non-finite.
  void step(std::vector<NamedParam>& params, double lr);

  std::int64_t step_count() const { return t_; }

  // exposed for checkpointing
  std::vector<Tensor>& first_moments() { return m_; }
  std::vector<Tensor>& second_moments() { return v_; }
  const std::vector<Tensor>& first_moments() const { return m_; }
  const std::vector<Tensor>& second_moments() const { return v_; }
  void set_step_count(std::int64_t t) { t_ = t; }
  const AdamConfig& config() const { return cfg_; }

 private:
  std::vector<Tensor> m_, v_;
  std::int64_t t_ = 0;
  AdamConfig cfg_;
};

void zero_grads(std::vector<NamedParam>& params);

/// L2 norm over all gradients.
double global_grad_norm(const std::vector<NamedParam>& params);

/// Scales all gradients so the global norm is at most max_norm.
/// max_norm <= 0 disables clipping. Returns the pre-clip norm.
double clip_grad_norm(std::vector<NamedParam>& params, double max_norm);

}  // namespace motionmidi
