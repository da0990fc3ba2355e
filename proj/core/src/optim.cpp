#include "motionmidi/optim.hpp"

#include <cmath>

#include "motionmidi/errors.hpp"

namespace motionmidi {

double lr_at(std::size_t step, const LrSchedule& sched) {
  if (step == 0) throw LengthError("lr_at: step must be >= 1");
  const double s = static_cast<double>(step);
  const double w = static_cast<double>(sched.warmup_steps);
  if (step <= sched.warmup_steps) return sched.peak_lr * s / w;
  return sched.peak_lr * std::sqrt(w / s);
}

AdamState::AdamState(const std::vector<NamedParam>& params, AdamConfig cfg)
    : cfg_(cfg) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const NamedParam& p : params) {
    m_.push_back(Tensor::zeros(p.tensor.shape()));
    v_.push_back(Tensor::zeros(p.tensor.shape()));
  }
}

void AdamState::step(std::vector<NamedParam>& params, double lr) {
  if (params.size() != m_.size()) {
    throw DimensionError("adam: state built for " + std::to_string(m_.size()) +
                         " parameters, got " + std::to_string(params.size()));
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& w = params[p].tensor;
    const double* g = w.grad();
    double* m = m_[p].data();
    double* v = v_[p].data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (!std::isfinite(g[i])) {
        throw DivergenceError(
            "adam: non-finite gradient in " + params[p].name,
            static_cast<std::size_t>(t_));
      }
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      w.at(i) -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

void zero_grads(std::vector<NamedParam>& params) {
  for (NamedParam& p : params) p.tensor.zero_grad();
}

double global_grad_norm(const std::vector<NamedParam>& params) {
  double sq = 0.0;
  for (const NamedParam& p : params) {
    if (!p.tensor.has_grad()) continue;
    const double* g = p.tensor.grad();
    for (std::size_t i = 0; i < p.tensor.size(); ++i) sq += g[i] * g[i];
  }
  return std::sqrt(sq);
}

double clip_grad_norm(std::vector<NamedParam>& params, double max_norm) {
  const double norm = global_grad_norm(params);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (NamedParam& p : params) {
      if (!p.tensor.has_grad()) continue;
      double* g = p.tensor.grad();
      for (std::size_t i = 0; i < p.tensor.size(); ++i) g[i] *= s;
    }
  }
  return norm;
}

}  // namespace motionmidi
