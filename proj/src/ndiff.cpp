#include "geocloak/ndiff.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace geocloak::ndiff {

std::string to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

std::size_t element_count(const Shape& shape) {
  std::size_t n = 1;
  for (auto extent : shape) n *= extent;
  return n;
}

namespace {

void check_extents(const Shape& shape) {
  for (auto extent : shape) {
    if (extent == 0) throw ShapeError("tensor extents must be positive, got " + to_string(shape));
  }
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
}

void require_defined(const char* op, const Tensor& t) {
  if (!t.defined()) throw std::invalid_argument(std::string(op) + ": undefined tensor");
}

}  // namespace

// --- Tensor ----------------------------------------------------------------

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
  check_extents(shape);
  Tensor t;
  t.impl_ = std::make_shared<Impl>();
  t.impl_->data.assign(element_count(shape), value);
  t.impl_->shape = std::move(shape);
  return t;
}

Tensor Tensor::from(Shape shape, std::vector<double> values) {
  check_extents(shape);
  if (element_count(shape) != values.size()) {
    throw ShapeError("tensor of shape " + to_string(shape) + " cannot hold " +
                     std::to_string(values.size()) + " values");
  }
  Tensor t;
  t.impl_ = std::make_shared<Impl>();
  t.impl_->shape = std::move(shape);
  t.impl_->data = std::move(values);
  return t;
}

Tensor Tensor::scalar(double value) { return from({1}, {value}); }

const Shape& Tensor::shape() const { return impl_->shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= impl_->shape.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " + to_string(shape()));
  }
  return impl_->shape[axis];
}

std::size_t Tensor::size() const { return impl_->data.size(); }

std::span<const double> Tensor::data() const { return impl_->data; }

std::span<double> Tensor::mutable_data() { return impl_->data; }

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item() on non-scalar tensor " + to_string(shape()));
  return impl_->data[0];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool on) {
  impl_->requires_grad = on;
  if (on && impl_->grad.size() != impl_->data.size()) impl_->grad.assign(impl_->data.size(), 0.0);
  if (!on) impl_->grad.clear();
  return *this;
}

std::span<const double> Tensor::grad() const { return impl_->grad; }

std::span<double> Tensor::grad_mut() const { return impl_->grad; }

void Tensor::zero_grad() { std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0); }

// --- Tape ------------------------------------------------------------------

Tensor Tape::record(std::vector<Tensor> inputs, Tensor output, BackwardFn backward,
                    const char* op_name) {
  for (double v : output.data()) {
    if (!std::isfinite(v)) throw NonFiniteError(std::string(op_name) + ": non-finite output");
  }
  const bool needs_grad =
      std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
  if (needs_grad) {
    output.set_requires_grad(true);
    nodes_.push_back({std::move(inputs), output, std::move(backward)});
  }
  return output;
}

void Tape::backward(const Tensor& loss) {
  require_defined("backward", loss);
  if (loss.size() != 1) {
    throw ShapeError("backward: loss must be a scalar, got " + to_string(loss.shape()));
  }
  if (!loss.requires_grad()) return;

  for (auto& node : nodes_) node.output.zero_grad();
  loss.grad_mut()[0] += 1.0;

  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) it->backward();
}

Tensor Tape::add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  std::vector<double> out(a.size());
  auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  Tensor result = Tensor::from(a.shape(), std::move(out));
  return record({a, b}, result,
                [a, b, result]() mutable {
                  auto g = result.grad();
                  if (a.requires_grad()) {
                    auto ga = a.grad_mut();
                    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                  }
                  if (b.requires_grad()) {
                    auto gb = b.grad_mut();
                    for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
                  }
                },
                "add");
}

Tensor Tape::sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  std::vector<double> out(a.size());
  auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  Tensor result = Tensor::from(a.shape(), std::move(out));
  return record({a, b}, result,
                [a, b, result]() mutable {
                  auto g = result.grad();
                  if (a.requires_grad()) {
                    auto ga = a.grad_mut();
                    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                  }
                  if (b.requires_grad()) {
                    auto gb = b.grad_mut();
                    for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
                  }
                },
                "sub");
}

Tensor Tape::mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  std::vector<double> out(a.size());
  auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  Tensor result = Tensor::from(a.shape(), std::move(out));
  return record({a, b}, result,
                [a, b, result]() mutable {
                  auto g = result.grad();
                  auto x = a.data(), y = b.data();
                  if (a.requires_grad()) {
                    auto ga = a.grad_mut();
                    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i];
                  }
                  if (b.requires_grad()) {
                    auto gb = b.grad_mut();
                    for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * x[i];
                  }
                },
                "mul");
}

Tensor Tape::scale(const Tensor& a, double factor) {
  std::vector<double> out(a.size());
  auto x = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * factor;
  Tensor result = Tensor::from(a.shape(), std::move(out));
  return record({a}, result,
                [a, result, factor]() mutable {
                  auto g = result.grad();
                  auto ga = a.grad_mut();
                  for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factor;
                },
                "scale");
}

Tensor Tape::matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: cannot multiply " + to_string(a.shape()) + " by " +
                     to_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n, 0.0);
  auto x = a.data(), w = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double s = x[i * k + p];
      const double* wrow = w.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += s * wrow[j];
    }
  }
  Tensor result = Tensor::from({m, n}, std::move(out));
  return record({a, b}, result,
                [a, b, result, m, k, n]() mutable {
                  auto g = result.grad();
                  auto x = a.data(), w = b.data();
                  if (a.requires_grad()) {
                    auto ga = a.grad_mut();
                    for (std::size_t i = 0; i < m; ++i) {
                      for (std::size_t p = 0; p < k; ++p) {
                        const double* wrow = w.data() + p * n;
                        const double* grow = g.data() + i * n;
                        double acc = 0.0;
                        for (std::size_t j = 0; j < n; ++j) acc += grow[j] * wrow[j];
                        ga[i * k + p] += acc;
                      }
                    }
                  }
                  if (b.requires_grad()) {
                    auto gb = b.grad_mut();
                    for (std::size_t i = 0; i < m; ++i) {
                      for (std::size_t p = 0; p < k; ++p) {
                        const double s = x[i * k + p];
                        double* gbrow = gb.data() + p * n;
                        const double* grow = g.data() + i * n;
                        for (std::size_t j = 0; j < n; ++j) gbrow[j] += s * grow[j];
                      }
                    }
                  }
                },
                "matmul");
}

Tensor Tape::relu(const Tensor& a) {
  std::vector<double> out(a.size());
  auto x = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
  Tensor result = Tensor::from(a.shape(), std::move(out));
  return record({a}, result,
                [a, result]() mutable {
                  auto g = result.grad();
                  auto x = a.data();
                  auto ga = a.grad_mut();
                  // subgradient at 0 is 0
                  for (std::size_t i = 0; i < g.size(); ++i) {
                    if (x[i] > 0.0) ga[i] += g[i];
                  }
                },
                "relu");
}

Tensor Tape::tanh(const Tensor& a) {
  std::vector<double> out(a.size());
  auto x = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(x[i]);
  Tensor result = Tensor::from(a.shape(), std::move(out));
  return record({a}, result,
                [a, result]() mutable {
                  auto g = result.grad();
                  auto y = result.data();
                  auto ga = a.grad_mut();
                  for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
                },
                "tanh");
}

Tensor Tape::sqrt(const Tensor& a) {
  std::vector<double> out(a.size());
  auto x = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (x[i] < 0.0) throw std::domain_error("sqrt: negative input");
    out[i] = std::sqrt(x[i]);
  }
  Tensor result = Tensor::from(a.shape(), std::move(out));
  return record({a}, result,
                [a, result]() mutable {
                  auto g = result.grad();
                  auto y = result.data();
                  auto ga = a.grad_mut();
                  for (std::size_t i = 0; i < g.size(); ++i) {
                    const double d = g[i] / (2.0 * y[i]);
                    if (!std::isfinite(d)) throw NonFiniteError("sqrt: gradient at zero");
                    ga[i] += d;
                  }
                },
                "sqrt");
}

Tensor Tape::square(const Tensor& a) {
  std::vector<double> out(a.size());
  auto x = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * x[i];
  Tensor result = Tensor::from(a.shape(), std::move(out));
  return record({a}, result,
                [a, result]() mutable {
                  auto g = result.grad();
                  auto x = a.data();
                  auto ga = a.grad_mut();
                  for (std::size_t i = 0; i < g.size(); ++i) ga[i] += 2.0 * x[i] * g[i];
                },
                "square");
}

Tensor Tape::sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.data()) total += v;
  Tensor result = Tensor::scalar(total);
  return record({a}, result,
                [a, result]() mutable {
                  const double g = result.grad()[0];
                  for (double& v : a.grad_mut()) v += g;
                },
                "sum");
}

Tensor Tape::mean(const Tensor& a) {
  double total = 0.0;
  for (double v : a.data()) total += v;
  const double n = static_cast<double>(a.size());
  Tensor result = Tensor::scalar(total / n);
  return record({a}, result,
                [a, result, n]() mutable {
                  const double g = result.grad()[0] / n;
                  for (double& v : a.grad_mut()) v += g;
                },
                "mean");
}

Tensor Tape::reshape(const Tensor& a, Shape shape) {
  check_extents(shape);
  if (element_count(shape) != a.size()) {
    throw ShapeError("reshape: cannot view " + to_string(a.shape()) + " as " + to_string(shape));
  }
  Tensor result = Tensor::from(std::move(shape), std::vector<double>(a.data().begin(), a.data().end()));
  return record({a}, result,
                [a, result]() mutable {
                  auto g = result.grad();
                  auto ga = a.grad_mut();
                  for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                },
                "reshape");
}

Tensor Tape::conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias,
                    std::size_t stride, std::size_t padding) {
  if (input.rank() != 3 || kernel.rank() != 4 || kernel.dim(1) != input.dim(0)) {
    throw ShapeError("conv2d: input " + to_string(input.shape()) + " incompatible with kernel " +
                     to_string(kernel.shape()));
  }
  if (stride < 1) throw ShapeError("conv2d: stride must be >= 1");
  const std::size_t channels = input.dim(0), height = input.dim(1), width = input.dim(2);
  const std::size_t filters = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
  if (bias.defined() && (bias.size() != filters)) {
    throw ShapeError("conv2d: bias " + to_string(bias.shape()) + " does not match " +
                     std::to_string(filters) + " filters");
  }
  if (height + 2 * padding < kh || width + 2 * padding < kw) {
    throw ShapeError("conv2d: kernel " + to_string(kernel.shape()) + " larger than padded input " +
                     to_string(input.shape()));
  }
  const std::size_t out_h = (height + 2 * padding - kh) / stride + 1;
  const std::size_t out_w = (width + 2 * padding - kw) / stride + 1;

  auto x = input.data(), w = kernel.data();
  std::vector<double> out(filters * out_h * out_w);
  for (std::size_t f = 0; f < filters; ++f) {
    const double b0 = bias.defined() ? bias.data()[f] : 0.0;
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      for (std::size_t ox = 0; ox < out_w; ++ox) {
        double acc = b0;
        for (std::size_t c = 0; c < channels; ++c) {
          for (std::size_t ky = 0; ky < kh; ++ky) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) -
                                      static_cast<std::ptrdiff_t>(padding);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(height)) continue;
            for (std::size_t kx = 0; kx < kw; ++kx) {
              const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) -
                                        static_cast<std::ptrdiff_t>(padding);
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(width)) continue;
              acc += w[((f * channels + c) * kh + ky) * kw + kx] *
                     x[(c * height + static_cast<std::size_t>(iy)) * width + static_cast<std::size_t>(ix)];
            }
          }
        }
        out[(f * out_h + oy) * out_w + ox] = acc;
      }
    }
  }

  Tensor result = Tensor::from({filters, out_h, out_w}, std::move(out));
  std::vector<Tensor> inputs{input, kernel};
  if (bias.defined()) inputs.push_back(bias);
  return record(
      std::move(inputs), result,
      [input, kernel, bias, result, stride, padding, channels, height, width, filters, kh, kw, out_h,
       out_w]() mutable {
        auto g = result.grad();
        auto x = input.data(), w = kernel.data();
        const bool want_x = input.requires_grad(), want_w = kernel.requires_grad();
        std::span<double> gx, gw;
        if (want_x) gx = input.grad_mut();
        if (want_w) gw = kernel.grad_mut();
        for (std::size_t f = 0; f < filters; ++f) {
          for (std::size_t oy = 0; oy < out_h; ++oy) {
            for (std::size_t ox = 0; ox < out_w; ++ox) {
              const double go = g[(f * out_h + oy) * out_w + ox];
              if (go == 0.0) continue;
              for (std::size_t c = 0; c < channels; ++c) {
                for (std::size_t ky = 0; ky < kh; ++ky) {
                  const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) -
                                            static_cast<std::ptrdiff_t>(padding);
                  if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(height)) continue;
                  for (std::size_t kx = 0; kx < kw; ++kx) {
                    const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) -
                                              static_cast<std::ptrdiff_t>(padding);
                    if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(width)) continue;
                    const std::size_t wi = ((f * channels + c) * kh + ky) * kw + kx;
                    const std::size_t xi = (c * height + static_cast<std::size_t>(iy)) * width +
                                           static_cast<std::size_t>(ix);
                    if (want_x) gx[xi] += w[wi] * go;
                    if (want_w) gw[wi] += x[xi] * go;
                  }
                }
              }
            }
          }
        }
        if (bias.defined() && bias.requires_grad()) {
          auto gb = bias.grad_mut();
          for (std::size_t f = 0; f < filters; ++f) {
            double acc = 0.0;
            for (std::size_t i = 0; i < out_h * out_w; ++i) acc += g[f * out_h * out_w + i];
            gb[f] += acc;
          }
        }
      },
      "conv2d");
}

namespace {

struct BilinearCell {
  std::size_t x0, y0;
  double fx, fy;
  bool clamped_u, clamped_v;
};

BilinearCell locate(double u, double v, std::size_t height, std::size_t width) {
  BilinearCell cell{};
  cell.clamped_u = u < 0.0 || u > 1.0;
  cell.clamped_v = v < 0.0 || v > 1.0;
  const double px = std::clamp(u, 0.0, 1.0) * static_cast<double>(width - 1);
  const double py = std::clamp(v, 0.0, 1.0) * static_cast<double>(height - 1);
  cell.x0 = std::min(static_cast<std::size_t>(px), width - 2);
  cell.y0 = std::min(static_cast<std::size_t>(py), height - 2);
  cell.fx = px - static_cast<double>(cell.x0);
  cell.fy = py - static_cast<double>(cell.y0);
  return cell;
}

}  // namespace

Tensor Tape::bilinear_sample(const Tensor& plane, const Tensor& coords) {
  if (plane.rank() != 3 || coords.rank() != 2 || coords.dim(1) != 2) {
    throw ShapeError("bilinear_sample: expected C×H×W plane and M×2 coords, got " +
                     to_string(plane.shape()) + " and " + to_string(coords.shape()));
  }
  const std::size_t channels = plane.dim(0), height = plane.dim(1), width = plane.dim(2);
  if (height < 2 || width < 2) {
    throw ShapeError("bilinear_sample: plane must be at least 2×2, got " + to_string(plane.shape()));
  }
  const std::size_t m = coords.dim(0);
  auto p = plane.data(), uv = coords.data();
  std::vector<double> out(m * channels);
  for (std::size_t i = 0; i < m; ++i) {
    const auto cell = locate(uv[2 * i], uv[2 * i + 1], height, width);
    for (std::size_t c = 0; c < channels; ++c) {
      const double* base = p.data() + c * height * width;
      const double t00 = base[cell.y0 * width + cell.x0];
      const double t01 = base[cell.y0 * width + cell.x0 + 1];
      const double t10 = base[(cell.y0 + 1) * width + cell.x0];
      const double t11 = base[(cell.y0 + 1) * width + cell.x0 + 1];
      const double top = (1.0 - cell.fx) * t00 + cell.fx * t01;
      const double bottom = (1.0 - cell.fx) * t10 + cell.fx * t11;
      out[i * channels + c] = (1.0 - cell.fy) * top + cell.fy * bottom;
    }
  }
  Tensor result = Tensor::from({m, channels}, std::move(out));
  return record(
      {plane, coords}, result,
      [plane, coords, result, channels, height, width, m]() mutable {
        auto g = result.grad();
        auto p = plane.data(), uv = coords.data();
        const bool want_p = plane.requires_grad(), want_c = coords.requires_grad();
        std::span<double> gp, gc;
        if (want_p) gp = plane.grad_mut();
        if (want_c) gc = coords.grad_mut();
        for (std::size_t i = 0; i < m; ++i) {
          const auto cell = locate(uv[2 * i], uv[2 * i + 1], height, width);
          for (std::size_t c = 0; c < channels; ++c) {
            const double go = g[i * channels + c];
            const std::size_t i00 = c * height * width + cell.y0 * width + cell.x0;
            const std::size_t i01 = i00 + 1, i10 = i00 + width, i11 = i10 + 1;
            if (want_p) {
              gp[i00] += go * (1.0 - cell.fx) * (1.0 - cell.fy);
              gp[i01] += go * cell.fx * (1.0 - cell.fy);
              gp[i10] += go * (1.0 - cell.fx) * cell.fy;
              gp[i11] += go * cell.fx * cell.fy;
            }
            if (want_c) {
              if (!cell.clamped_u) {
                const double d_dx = (1.0 - cell.fy) * (p[i01] - p[i00]) + cell.fy * (p[i11] - p[i10]);
                gc[2 * i] += go * d_dx * static_cast<double>(width - 1);
              }
              if (!cell.clamped_v) {
                const double top = (1.0 - cell.fx) * p[i00] + cell.fx * p[i01];
                const double bottom = (1.0 - cell.fx) * p[i10] + cell.fx * p[i11];
                gc[2 * i + 1] += go * (bottom - top) * static_cast<double>(height - 1);
              }
            }
          }
        }
      },
      "bilinear_sample");
}

}  // namespace geocloak::ndiff
