#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace motionmidi {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);

/// Dense row-major float64 tensor. Copies are shallow (shared storage), so a
/// parameter and every op that captured it see one value buffer and one
/// gradient buffer; clone() makes a deep copy. The gradient buffer is
/// allocated lazily and always matches the value shape.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> values,
                          bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return s_ != nullptr; }
  const Shape& shape() const { return s_->shape; }
  std::size_t rank() const { return s_->shape.size(); }
  std::size_t size() const { return s_->value.size(); }
  std::size_t dim(std::size_t i) const { return s_->shape[i]; }

  double* data() { return s_->value.data(); }
  const double* data() const { return s_->value.data(); }
  std::vector<double>& values() { return s_->value; }
  const std::vector<double>& values() const { return s_->value; }

  double& at(std::size_t i) { return s_->value[i]; }
  double at(std::size_t i) const { return s_->value[i]; }
  double& at2(std::size_t i, std::size_t j) {
    return s_->value[i * s_->shape[1] + j];
  }
  double at2(std::size_t i, std::size_t j) const {
    return s_->value[i * s_->shape[1] + j];
  }
  double& at3(std::size_t i, std::size_t j, std::size_t k) {
    return s_->value[(i * s_->shape[1] + j) * s_->shape[2] + k];
  }
  double at3(std::size_t i, std::size_t j, std::size_t k) const {
    return s_->value[(i * s_->shape[1] + j) * s_->shape[2] + k];
  }

  /// Value of a scalar tensor.
  double item() const;

  bool requires_grad() const { return s_ && s_->requires_grad; }
  Tensor& set_requires_grad(bool v);

  /// Gradient buffer, zero-initialized on first access.
  double* grad();
  const double* grad() const { return const_cast<Tensor*>(this)->grad(); }
  bool has_grad() const { return s_ && !s_->grad.empty(); }
  void zero_grad();
  void accumulate_grad(const double* g, std::size_t n);

  /// Deep copy of the values (fresh, empty gradient).
  Tensor clone() const;

  bool same_storage(const Tensor& other) const { return s_ == other.s_; }

  /// True when every value is finite.
  bool all_finite() const;

 private:
  struct Storage {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Storage> s_;
};

/// Reverse-mode tape: ops append their backward rule in execution order and
/// backward() replays them once, in reverse. Inputs of an op were recorded
/// before the op itself, so the replay order is a valid reverse-topological
/// order. A tape must not be shared across threads.
class Tape {
 public:
  void record(std::function<void()> backward_rule) {
    nodes_.push_back(std::move(backward_rule));
  }

  /// Seeds d(loss)/d(loss) = 1 and replays all recorded rules.
  void backward(Tensor& loss);

  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  std::vector<std::function<void()>> nodes_;
};

}  // namespace motionmidi
