#include "dio/tensor.hpp"

#include <cstring>
#include <functional>
#include <numeric>
#include <sstream>

namespace dio {

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

ShapeError::ShapeError(std::string op, Shape lhs, Shape rhs)
    : std::invalid_argument(op + ": incompatible shapes " + to_string(lhs) +
                            " and " + to_string(rhs)),
      op_(std::move(op)),
      lhs_(std::move(lhs)),
      rhs_(std::move(rhs)) {}

namespace {

void check_shape(const Shape& shape) {
  if (shape.empty()) throw ShapeError("tensor", shape, {});
  for (auto d : shape)
    if (d == 0) throw ShapeError("tensor", shape, {});
}

const Shape kEmptyShape{};

}  // namespace

Tensor::Tensor() = default;

Tensor::Tensor(Shape shape, double fill) {
  check_shape(shape);
  storage_ = std::make_shared<Storage>();
  storage_->data.assign(numel(shape), fill);
  storage_->shape = std::move(shape);
}

Tensor::Tensor(Shape shape, std::vector<double> data) {
  check_shape(shape);
  if (numel(shape) != data.size())
    throw ShapeError("tensor", shape, Shape{data.size()});
  storage_ = std::make_shared<Storage>();
  storage_->shape = std::move(shape);
  storage_->data = std::move(data);
}

Tensor Tensor::scalar(double value) { return Tensor({1}, value); }

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols,
                      std::initializer_list<double> values) {
  return Tensor({rows, cols}, std::vector<double>(values));
}

const Shape& Tensor::shape() const noexcept {
  return storage_ ? storage_->shape : kEmptyShape;
}

std::size_t Tensor::size() const noexcept {
  return storage_ ? storage_->data.size() : 0;
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) throw ShapeError("dim", shape(), Shape{axis});
  return shape()[axis];
}

std::span<double> Tensor::data() noexcept {
  if (!storage_) return {};
  return storage_->data;
}

std::span<const double> Tensor::data() const noexcept {
  if (!storage_) return {};
  return storage_->data;
}

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item", shape(), Shape{1});
  return storage_->data[0];
}

bool Tensor::requires_grad() const noexcept {
  return storage_ && storage_->requires_grad;
}

Tensor& Tensor::set_requires_grad(bool on) {
  if (storage_) storage_->requires_grad = on;
  return *this;
}

bool Tensor::has_grad() const noexcept {
  return storage_ && storage_->grad.has_value();
}

std::span<const double> Tensor::grad() const {
  if (!has_grad()) throw GradError("tensor has no gradient");
  return *storage_->grad;
}

std::span<double> Tensor::mutable_grad() {
  if (!storage_) throw GradError("gradient requested on empty tensor");
  if (!storage_->grad) storage_->grad.emplace(storage_->data.size(), 0.0);
  return *storage_->grad;
}

void Tensor::clear_grad() noexcept {
  if (storage_) storage_->grad.reset();
}

Tensor Tensor::clone() const {
  if (!storage_) return {};
  return Tensor(storage_->shape, storage_->data);
}

Tensor Tensor::reshaped(Shape shape) const {
  if (numel(shape) != size()) throw ShapeError("reshape", this->shape(), shape);
  return Tensor(std::move(shape), storage_->data);
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return false;
  auto x = a.data();
  auto y = b.data();
  return std::memcmp(x.data(), y.data(), x.size() * sizeof(double)) == 0;
}

}  // namespace dio
