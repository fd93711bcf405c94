#pragma once

#include <cstddef>
#include <initializer_list>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dio {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

/// Raised when a primitive receives operands of incompatible shape. Carries
/// the primitive name and both operand shapes so callers can report them.
class ShapeError : public std::invalid_argument {
 public:
  ShapeError(std::string op, Shape lhs, Shape rhs);

  const std::string& op() const noexcept { return op_; }
  const Shape& lhs() const noexcept { return lhs_; }
  const Shape& rhs() const noexcept { return rhs_; }

 private:
  std::string op_;
  Shape lhs_;
  Shape rhs_;
};

/// Misuse of the differentiation machinery (non-scalar loss, consumed tape,
/// missing gradient, non-finite value).
class GradError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense row-major float64 array with an optional gradient buffer.
///
/// Copies share storage (handle semantics), which is what lets a parameter
/// held by a model receive gradients from a graph that only saw a copy of
/// the handle. Use clone() for an independent deep copy.
class Tensor {
 public:
  Tensor();
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double value);
  static Tensor vector(std::initializer_list<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::initializer_list<double> values);

  const Shape& shape() const noexcept;
  std::size_t size() const noexcept;
  std::size_t rank() const noexcept { return shape().size(); }
  std::size_t dim(std::size_t axis) const;

  std::span<double> data() noexcept;
  std::span<const double> data() const noexcept;
  double& operator[](std::size_t i) { return data()[i]; }
  double operator[](std::size_t i) const { return data()[i]; }
  double item() const;

  bool requires_grad() const noexcept;
  Tensor& set_requires_grad(bool on);

  bool has_grad() const noexcept;
  std::span<const double> grad() const;
  /// Allocates a zero gradient on first use.
  std::span<double> mutable_grad();
  void clear_grad() noexcept;

  Tensor clone() const;
  Tensor reshaped(Shape shape) const;
  bool shares_storage(const Tensor& other) const noexcept {
    return storage_ == other.storage_;
  }
  bool valid() const noexcept { return storage_ != nullptr; }

 private:
  struct Storage {
    Shape shape;
    std::vector<double> data;
    bool requires_grad = false;
    std::optional<std::vector<double>> grad;
  };
  std::shared_ptr<Storage> storage_;
};

/// Bitwise equality of shape and data.
bool bitwise_equal(const Tensor& a, const Tensor& b);

}  // namespace dio
