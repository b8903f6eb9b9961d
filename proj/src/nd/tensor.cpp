#include "gapcast/nd/tensor.hpp"

#include <functional>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace gapcast::nd {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return filled(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::filled(Shape shape, double value, bool requires_grad) {
  for (auto extent : shape) {
    if (extent == 0) throw std::invalid_argument("tensor extents must be positive: " + shape_string(shape));
  }
  auto s = std::make_shared<Storage>();
  s->value.assign(shape_size(shape), value);
  s->shape = std::move(shape);
  s->requires_grad = requires_grad;
  return Tensor(std::move(s));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  if (values.size() != shape_size(shape)) {
    throw std::invalid_argument("tensor data length " + std::to_string(values.size()) + " does not match shape " +
                                shape_string(shape));
  }
  auto t = filled(std::move(shape), 0.0, requires_grad);
  t.storage_->value = std::move(values);
  return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) { return filled({1}, value, requires_grad); }

Tensor::Storage& Tensor::storage() const {
  if (!storage_) throw std::logic_error("use of undefined tensor");
  return *storage_;
}

const Shape& Tensor::shape() const { return storage().shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) throw std::out_of_range("axis out of range for shape " + shape_string(s));
  return s[axis];
}

std::size_t Tensor::size() const { return storage().value.size(); }

std::span<double> Tensor::data() { return storage().value; }
std::span<const double> Tensor::data() const { return storage().value; }

double Tensor::item() const {
  if (size() != 1) throw std::logic_error("item() on tensor of shape " + shape_string(shape()));
  return storage().value[0];
}

bool Tensor::requires_grad() const { return storage().requires_grad; }
void Tensor::set_requires_grad(bool flag) { storage().requires_grad = flag; }

bool Tensor::has_grad() const { return !storage().grad.empty(); }

std::span<double> Tensor::grad() {
  auto& s = storage();
  if (s.grad.empty()) s.grad.assign(s.value.size(), 0.0);
  return s.grad;
}

std::span<const double> Tensor::grad_view() const { return storage().grad; }

void Tensor::zero_grad() {
  auto& s = storage();
  std::fill(s.grad.begin(), s.grad.end(), 0.0);
}

Tensor Tensor::clone() const {
  const auto& s = storage();
  return from(s.shape, s.value, false);
}

}  // namespace gapcast::nd
