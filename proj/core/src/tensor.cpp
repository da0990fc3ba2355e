#include "motionmidi/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "motionmidi/errors.hpp"

namespace motionmidi {

namespace {
std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}
}  // namespace

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << 'x';
    os << s[i];
  }
  os << ']';
  return os.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  Tensor t;
  t.s_ = std::make_shared<Storage>();
  t.s_->value.assign(shape_numel(shape), value);
  t.s_->shape = std::move(shape);
  t.s_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::from_data(Shape shape, std::vector<double> values,
                         bool requires_grad) {
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("tensor data length " + std::to_string(values.size()) +
                         " does not match shape " + shape_str(shape));
  }
  Tensor t;
  t.s_ = std::make_shared<Storage>();
  t.s_->shape = std::move(shape);
  t.s_->value = std::move(values);
  t.s_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_data({1}, {value}, requires_grad);
}

double Tensor::item() const {
  if (!s_ || s_->value.size() != 1) {
    throw DimensionError("item() requires a scalar tensor, got shape " +
                         (s_ ? shape_str(s_->shape) : std::string("<empty>")));
  }
  return s_->value[0];
}

Tensor& Tensor::set_requires_grad(bool v) {
  s_->requires_grad = v;
  return *this;
}

double* Tensor::grad() {
  if (s_->grad.empty()) s_->grad.assign(s_->value.size(), 0.0);
  return s_->grad.data();
}

void Tensor::zero_grad() {
  if (!s_->grad.empty()) s_->grad.assign(s_->value.size(), 0.0);
}

void Tensor::accumulate_grad(const double* g, std::size_t n) {
  double* dst = grad();
  for (std::size_t i = 0; i < n; ++i) dst[i] += g[i];
}

Tensor Tensor::clone() const {
  Tensor t;
  t.s_ = std::make_shared<Storage>();
  t.s_->shape = s_->shape;
  t.s_->value = s_->value;
  t.s_->requires_grad = s_->requires_grad;
  return t;
}

bool Tensor::all_finite() const {
  for (double v : s_->value) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Tape::backward(Tensor& loss) {
  if (loss.size() != 1) {
    throw DimensionError("backward() expects a scalar loss, got shape " +
                         shape_str(loss.shape()));
  }
  loss.grad()[0] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
}

}  // namespace motionmidi
