#pragma once

// Minimal dense tensor engine with tape-based reverse-mode differentiation.
//
// All values are 64-bit. A Tensor is a shared handle: copies alias the same
// storage, which is how the tape refers back to operands during backward.
// Every op checks its output for non-finite values and throws NonFiniteError.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace geocloak::ndiff {

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);
std::size_t element_count(const Shape& shape);

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor from(Shape shape, std::vector<double> values);
  static Tensor scalar(double value);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t dim(std::size_t axis) const;
  std::size_t rank() const { return shape().size(); }
  std::size_t size() const;

  std::span<const double> data() const;
  // Writable view for leaves being filled before use. Mutating a tensor
  // that already participates in a recorded op invalidates the tape.
  std::span<double> mutable_data();
  double item() const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool on);

  // Zero-filled span of the same size as data() when requires_grad().
  std::span<const double> grad() const;
  // Grad storage is shared by every handle, hence writable through const.
  std::span<double> grad_mut() const;
  void zero_grad();

  bool same(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  struct Impl {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Impl> impl_;
};

// Records operations in execution order and replays their backward rules
// in reverse. One tape per forward pass; discard it afterwards.
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Tensor add(const Tensor& a, const Tensor& b);
  Tensor sub(const Tensor& a, const Tensor& b);
  Tensor mul(const Tensor& a, const Tensor& b);
  Tensor scale(const Tensor& a, double factor);
  Tensor matmul(const Tensor& a, const Tensor& b);
  Tensor relu(const Tensor& a);
  Tensor tanh(const Tensor& a);
  Tensor sqrt(const Tensor& a);
  Tensor square(const Tensor& a);
  Tensor sum(const Tensor& a);
  Tensor mean(const Tensor& a);
  Tensor reshape(const Tensor& a, Shape shape);

  // input C×H×W, kernel K×C×kh×kw, optional bias of K elements.
  Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias,
                std::size_t stride, std::size_t padding = 0);

  // plane C×H×W, coords M×2 with (u, v) in [0,1]²; u runs along W, v along
  // H, corners aligned to texel centers. Out-of-range coords clamp and get
  // zero coordinate gradient. Returns M×C.
  Tensor bilinear_sample(const Tensor& plane, const Tensor& coords);

  // Extension point for ops defined outside this module. Validates that
  // `output` is finite, marks it as requiring grad when any input does, and
  // records `backward` only in that case.
  Tensor record(std::vector<Tensor> inputs, Tensor output, BackwardFn backward,
                const char* op_name);

  // Seeds d(loss)/d(loss) = 1 and accumulates into every requires_grad leaf.
  // Intermediate grads are reset first, so repeated calls accumulate leaf
  // grads exactly once per call.
  void backward(const Tensor& loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    std::vector<Tensor> inputs;
    Tensor output;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
};

}  // namespace geocloak::ndiff
